import numpy as np
import pytest

from qloss.calibration import loaded_q
from qloss.resonance import ResonanceFit, synthesize_trace


def linewidth(fit: ResonanceFit) -> float:
    return fit.f0 / loaded_q(fit.qi, fit.qc_star)


def span(fit: ResonanceFit, halfwidths: float = 5.0, n: int = 401) -> np.ndarray:
    lw = linewidth(fit)
    return np.linspace(fit.f0 - halfwidths * lw, fit.f0 + halfwidths * lw, n)


@pytest.fixture
def paper_like_fit() -> ResonanceFit:
    """Parameters typical of the measured devices: deep dip, mild asymmetry."""
    return ResonanceFit(f0=5.8e9, qi=2e6, qc_star=5e5, phi=0.1)


@pytest.fixture
def noiseless_trace(paper_like_fit):
    return synthesize_trace(paper_like_fit, span(paper_like_fit))


@pytest.fixture
def noisy_trace(paper_like_fit):
    return synthesize_trace(paper_like_fit, span(paper_like_fit),
                            noise_sigma=1e-3, rng_seed=11)
