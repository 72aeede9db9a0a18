"""Scratch: trace LM iterations on a previously-good case."""
import numpy as np

from qloss.resonance import (ResonanceFit, _cost_and_linearization, _internal_params,
                             initial_guess, synthesize_trace, _STEP_LIMITS,
                             _BOUNDS_LO, _BOUNDS_HI)
from qloss.calibration import loaded_q

f0, qi, qc, phi = 4909344089.868679, 1652115.864577789, 1614994.3689321948, 0.3525093415019491
truth = ResonanceFit(f0=f0, qi=qi, qc_star=qc, phi=phi)
ql = loaded_q(qi, qc)
lw = f0 / ql
freqs = np.linspace(f0 - 5 * lw, f0 + 5 * lw, 401)
trace = synthesize_trace(truth, freqs)

g = initial_guess(trace)
f_ref = g.f0
x = trace.frequencies / f_ref
y = trace.s21
p = np.clip(_internal_params(g, f_ref), _BOUNDS_LO, _BOUNDS_HI)
cost, r, jac = _cost_and_linearization(p, x, y)
damping = 1e-3
for it in range(25):
    jtj = jac.T @ jac
    gv = jac.T @ r
    diag = np.clip(np.diag(jtj), 1e-32, None)
    while damping <= 1e12:
        step = np.linalg.solve(jtj + damping * np.diag(diag), -gv)
        overshoot = float(np.max(np.abs(step) / _STEP_LIMITS))
        capped = overshoot > 1.0
        if capped:
            step = step / overshoot
        p_try = np.clip(p + step, _BOUNDS_LO, _BOUNDS_HI)
        cost_try = _cost_and_linearization(p_try, x, y)[0]
        if np.isfinite(cost_try) and cost_try < cost:
            break
        damping *= 7.0
    impr = cost - cost_try
    print(f"it {it}: cost {cost:.6e} -> {cost_try:.6e} impr {impr:.2e} "
          f"damping {damping:.1e} capped={capped} |step|max {np.max(np.abs(step)):.2e}")
    p = p_try
    cost, r, jac = _cost_and_linearization(p, x, y)
    damping = max(damping * 0.25, 1e-14)
    if impr <= 1e-12 * cost:
        print("converged")
        break
