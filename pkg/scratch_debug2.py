"""Scratch: debug the deep-dip failure case."""
import numpy as np

from qloss.resonance import (ResonanceFit, fit_trace, initial_guess, synthesize_trace,
                             residual_rms)
from qloss.calibration import loaded_q

np.seterr(all="ignore")

f0, qi, qc, phi = 7533371578.058217, 4741416.053449104, 152029.07166152573, 0.8355044890051131
truth = ResonanceFit(f0=f0, qi=qi, qc_star=qc, phi=phi)
ql = loaded_q(qi, qc)
lw = f0 / ql
freqs = np.linspace(f0 - 5 * lw, f0 + 5 * lw, 401)
trace = synthesize_trace(truth, freqs)

g = initial_guess(trace)
print("guess vs truth:")
print(f"  f0: rel {(g.f0-f0)/f0:.2e}")
print(f"  qi: {g.qi:.4e} vs {qi:.4e}  rel {(g.qi-qi)/qi:.2e}")
print(f"  qc: {g.qc_star:.4e} vs {qc:.4e}  rel {(g.qc_star-qc)/qc:.2e}")
print(f"  phi: {g.phi:.4f} vs {phi:.4f}")
print(f"  delay {g.env_delay:.3e}")
print(f"  guess residual rms: {g.residual_rms:.4e}")

fit = fit_trace(trace)
print("fit:")
print(f"  f0 rel {(fit.f0-f0)/f0:.2e}  qi {fit.qi:.4e}  qc {fit.qc_star:.4e} phi {fit.phi:.4f}")
print(f"  iters {fit.n_iterations} rms {fit.residual_rms:.4e}")
print(f"  amp {fit.env_amplitude:.4e} phase {fit.env_phase:.4f} delay {fit.env_delay:.3e}")
