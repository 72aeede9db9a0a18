"""Scratch: exercise the LM fitter on random draws (acceptance criterion 1 dry run)."""
import time

import numpy as np

from qloss.resonance import ResonanceFit, fit_trace, initial_guess, synthesize_trace
from qloss.calibration import loaded_q

rng = np.random.default_rng(12345)
n_draws = 200
worst = 0.0
fails = []
t0 = time.time()
for k in range(n_draws):
    f0 = rng.uniform(4e9, 8e9)
    qi = rng.uniform(1e5, 5e6)
    qc = rng.uniform(1e5, 2e6)
    phi = rng.uniform(-1, 1)
    truth = ResonanceFit(f0=f0, qi=qi, qc_star=qc, phi=phi)
    ql = loaded_q(qi, qc)
    lw = f0 / ql
    freqs = np.linspace(f0 - 5 * lw, f0 + 5 * lw, 401)
    trace = synthesize_trace(truth, freqs)
    try:
        fit = fit_trace(trace)
    except Exception as e:
        fails.append((k, f0, qi, qc, phi, repr(e)))
        continue
    errs = [abs(fit.f0 - f0) / f0, abs(fit.qi - qi) / qi,
            abs(fit.qc_star - qc) / qc, abs(fit.phi - phi) / max(abs(phi), 1e-9)]
    worst = max(worst, max(errs))
    if max(errs) > 1e-6:
        fails.append((k, f0, qi, qc, phi, f"err={max(errs):.2e} iters={fit.n_iterations}"))
elapsed = time.time() - t0
print(f"{n_draws} draws in {elapsed:.2f}s ({elapsed/n_draws*1000:.1f} ms/fit)")
print(f"worst relative error: {worst:.3e}")
print(f"failures: {len(fails)}")
for f in fails[:10]:
    print("  ", f)
