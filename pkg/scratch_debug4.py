"""Scratch: debug slow convergence with large delay."""
import numpy as np

import qloss.resonance as R
from qloss.resonance import ResonanceFit, initial_guess, synthesize_trace
from qloss.calibration import loaded_q

f0 = 6e9
qi, qc, phi = 2.18e6, 1.5e6, 0.006
tau = 5.55e-6
ql = loaded_q(qi, qc)
lw = f0 / ql
truth = ResonanceFit(f0=f0, qi=qi, qc_star=qc, phi=phi, env_delay=tau,
                     env_amplitude=1.3, env_phase=0.4)
freqs = np.linspace(f0 - 5 * lw, f0 + 5 * lw, 401)
trace = synthesize_trace(truth, freqs)

g = initial_guess(trace)
print(f"truth tilt psi = {2*np.pi*tau*5*lw:.3f} rad at band edge")
print("guess vs truth:")
print(f"  f0 rel {(g.f0-truth.f0)/truth.f0:.2e}")
print(f"  qi {g.qi:.3e} vs {qi:.3e}")
print(f"  qc {g.qc_star:.3e} vs {qc:.3e}")
print(f"  phi {g.phi:.3f} vs {phi:.3f}")
print(f"  amp {g.env_amplitude:.3f} vs 1.3, phase {g.env_phase:.3f} vs 0.4")
print(f"  delay {g.env_delay:.3e} vs {tau:.3e}")
print(f"  rms {g.residual_rms:.3e}")

coords = R._Coords.for_trace(trace, g.f0)
x = trace.frequencies / coords.f_ref
y = trace.s21
p = np.clip(coords.pack(g), R._BOUNDS_LO, R._BOUNDS_HI)
print("internal p0:", np.round(p, 4))
p_truth = coords.pack(truth)
print("internal truth:", np.round(p_truth, 4))

cost, r, jac = R._cost_and_linearization(p, x, y, coords)
damping = 1e-3
for it in range(60):
    jtj = jac.T @ jac
    gv = jac.T @ r
    diag = np.clip(np.diag(jtj), 1e-32, None)
    while damping <= 1e12:
        step = np.linalg.solve(jtj + damping * np.diag(diag), -gv)
        overshoot = float(np.max(np.abs(step) / R._STEP_LIMITS))
        which = int(np.argmax(np.abs(step) / R._STEP_LIMITS))
        if overshoot > 1.0:
            step = step / overshoot
        p_try = np.clip(p + step, R._BOUNDS_LO, R._BOUNDS_HI)
        cost_try = R._cost_and_linearization(p_try, x, y, coords)[0]
        if np.isfinite(cost_try) and cost_try < cost:
            break
        damping *= 7.0
    impr = cost - cost_try
    if it % 5 == 0 or it > 50:
        print(f"it {it}: cost {cost:.4e} impr {impr:.2e} capped@{which if overshoot>1 else '-'} "
              f"p={np.round(p_try, 3)}")
    p = p_try
    cost, r, jac = R._cost_and_linearization(p, x, y, coords)
    damping = max(damping * 0.25, 1e-14)
    if impr <= 1e-12 * cost:
        print("converged at it", it, "cost", cost)
        break
