"""Scratch: check analytic Jacobian against finite differences, inspect guess."""
import numpy as np

from qloss.resonance import (ResonanceFit, _cost_and_linearization, _internal_params,
                             _model_and_jacobian, initial_guess, synthesize_trace)
from qloss.calibration import loaded_q

f0, qi, qc, phi = 4909344089.868679, 1652115.864577789, 1614994.3689321948, 0.3525093415019491
truth = ResonanceFit(f0=f0, qi=qi, qc_star=qc, phi=phi)
ql = loaded_q(qi, qc)
lw = f0 / ql
freqs = np.linspace(f0 - 5 * lw, f0 + 5 * lw, 401)
trace = synthesize_trace(truth, freqs)

g = initial_guess(trace)
print("guess vs truth:")
print(f"  f0: {g.f0:.6e} vs {f0:.6e}  rel {(g.f0-f0)/f0:.2e}")
print(f"  qi: {g.qi:.4e} vs {qi:.4e}  rel {(g.qi-qi)/qi:.2e}")
print(f"  qc: {g.qc_star:.4e} vs {qc:.4e}  rel {(g.qc_star-qc)/qc:.2e}")
print(f"  phi: {g.phi:.4f} vs {phi:.4f}")
print(f"  amp {g.env_amplitude:.4f} phase {g.env_phase:.4f} delay {g.env_delay:.3e}")
print(f"  guess residual rms: {g.residual_rms:.4e}")

f_ref = g.f0
x = trace.frequencies / f_ref
y = trace.s21
p0 = _internal_params(g, f_ref)

s, jac = _model_and_jacobian(p0, x)
eps = 1e-7
for k in range(7):
    dp = np.zeros(7)
    dp[k] = eps
    s_plus, _ = _model_and_jacobian(p0 + dp, x)
    s_minus, _ = _model_and_jacobian(p0 - dp, x)
    fd = (s_plus - s_minus) / (2 * eps)
    err = np.max(np.abs(fd - jac[:, k])) / max(np.max(np.abs(fd)), 1e-300)
    print(f"param {k}: max |fd| {np.max(np.abs(fd)):.3e}  rel err vs analytic {err:.2e}")

cost, r, J = _cost_and_linearization(p0, x, y)
print("cost at guess:", cost)
jtj = J.T @ J
gvec = J.T @ r
print("grad:", gvec)
diag = np.clip(np.diag(jtj), 1e-32, None)
print("diag(JTJ):", diag)
for lam in [1e-3, 1e-1, 1e1, 1e3, 1e6]:
    step = np.linalg.solve(jtj + lam * np.diag(diag), -gvec)
    c2 = _cost_and_linearization(p0 + step, x, y)[0]
    print(f"  lambda {lam:.0e}: step {np.round(step, 6)}  cost {c2:.6e}")
