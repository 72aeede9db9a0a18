"""Scratch: stress the fitter — env terms, noise calibration, invariances, one-sided."""
import time
import numpy as np

from qloss.resonance import (ResonanceFit, fit_trace, synthesize_trace, residual_rms,
                             initial_guess)
from qloss.errors import FitDivergedError, UnidentifiableParametersError, NoResonanceError
from qloss.calibration import loaded_q

# --- 1000 draws with random environment terms ---
rng = np.random.default_rng(777)
worst = 0.0
fails = 0
t0 = time.time()
for k in range(1000):
    f0 = rng.uniform(4e9, 8e9)
    qi = rng.uniform(1e5, 5e6)
    qc = rng.uniform(1e5, 2e6)
    phi = rng.uniform(-1, 1)
    amp = rng.uniform(0.5, 2.0)
    theta = rng.uniform(-np.pi, np.pi) * 0.99
    ql = loaded_q(qi, qc)
    lw = f0 / ql
    tau = rng.uniform(0, 0.3) / lw / (2 * np.pi)  # up to ~0.3 rad tilt per linewidth
    truth = ResonanceFit(f0=f0, qi=qi, qc_star=qc, phi=phi,
                         env_amplitude=amp, env_phase=theta, env_delay=tau)
    freqs = np.linspace(f0 - 5 * lw, f0 + 5 * lw, 401)
    trace = synthesize_trace(truth, freqs)
    try:
        fit = fit_trace(trace)
    except Exception as e:
        fails += 1
        print("  fail", k, f"qi={qi:.3g} qc={qc:.3g} phi={phi:.3f} tau={tau:.3g}", repr(e)[:90])
        continue
    errs = [abs(fit.f0 - f0) / f0, abs(fit.qi - qi) / qi, abs(fit.qc_star - qc) / qc,
            abs(fit.phi - phi)]
    worst = max(worst, max(errs))
    if max(errs) > 1e-6:
        fails += 1
        print("  bad", k, f"err={max(errs):.2e}")
print(f"[env draws] 1000 in {time.time()-t0:.1f}s worst {worst:.2e} fails {fails}")

# --- noisy fit calibration: criterion 2 ---
truth = ResonanceFit(f0=5.8e9, qi=2e6, qc_star=5e5, phi=0.1)
ql = loaded_q(2e6, 5e5)
lw = 5.8e9 / ql
freqs = np.linspace(5.8e9 - 5 * lw, 5.8e9 + 5 * lw, 401)
hits = 0
pulls = []
for seed in range(200):
    trace = synthesize_trace(truth, freqs, noise_sigma=1e-3, rng_seed=seed)
    fit = fit_trace(trace)
    err = fit.stderr[1]
    pull = (fit.qi - truth.qi) / err
    pulls.append(pull)
    if abs(pull) <= 3:
        hits += 1
print(f"[noise calib] within 3 sigma: {hits}/200, pull std {np.std(pulls):.3f}")

# --- scale invariance on noiseless and noisy ---
for sigma, tag in [(0.0, "noiseless"), (1e-3, "noisy")]:
    trace = synthesize_trace(truth, freqs, noise_sigma=sigma, rng_seed=42)
    fit1 = fit_trace(trace)
    factor = 0.73 * np.exp(1.1j)
    from qloss.resonance import ComplexTrace
    trace2 = ComplexTrace(frequencies=trace.frequencies, s21=trace.s21 * factor)
    fit2 = fit_trace(trace2)
    rel = [abs(fit2.f0 - fit1.f0) / fit1.f0, abs(fit2.qi - fit1.qi) / fit1.qi,
           abs(fit2.qc_star - fit1.qc_star) / fit1.qc_star, abs(fit2.phi - fit1.phi)]
    print(f"[scale inv {tag}] max rel diff {max(rel):.2e}")

# --- one-sided trace ---
trace_full = synthesize_trace(truth, freqs, noise_sigma=1e-3, rng_seed=7)
mask = trace_full.frequencies >= truth.f0
from qloss.resonance import ComplexTrace
one_sided = ComplexTrace(frequencies=trace_full.frequencies[mask], s21=trace_full.s21[mask])
try:
    fit_os = fit_trace(one_sided)
    fit_full = fit_trace(trace_full)
    print(f"[one-sided] fitted: qi rel stderr {fit_os.stderr[1]/fit_os.qi:.3g} "
          f"(full: {fit_full.stderr[1]/fit_full.qi:.3g}), phi stderr {fit_os.stderr[3]:.3g} "
          f"(full {fit_full.stderr[3]:.3g})")
except (UnidentifiableParametersError, FitDivergedError, NoResonanceError) as e:
    print(f"[one-sided] raised {type(e).__name__}: {e}")

# --- condition number at optimum for healthy fits ---
import qloss.resonance as R
trace = synthesize_trace(truth, freqs)
g = initial_guess(trace)
coords = R._Coords.for_trace(trace, g.f0)
fit = fit_trace(trace)
p = coords.pack(fit)
_, r, jac = R._cost_and_linearization(p, trace.frequencies / coords.f_ref, trace.s21, coords)
cn = np.linalg.norm(jac, axis=0)
sv = np.linalg.svd(jac / cn, compute_uv=False)
print(f"[cond] scaled Jacobian condition healthy fit: {sv[0]/sv[-1]:.3e}")
