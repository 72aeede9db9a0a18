import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qloss.calibration import loaded_q
from qloss.errors import (
    FitDivergedError,
    NoResonanceError,
    UnidentifiableParametersError,
)
from qloss.resonance import (
    ComplexTrace,
    ResonanceFit,
    fit_trace,
    initial_guess,
    model_inverse_s21,
    model_s21,
    residual_rms,
    synthesize_trace,
)

from conftest import linewidth, span


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------

def test_model_far_off_resonance_tends_to_one():
    value = model_inverse_s21(6e9, 1e6, 1e6, 0.0, 1e12)
    assert abs(value - 1.0) < 1e-5


def test_model_on_resonance_identity():
    assert model_inverse_s21(6e9, 1e6, 1e6, 0.0, 6e9) == pytest.approx(2.0 + 0j)
    # S21 itself is the reciprocal
    fit = ResonanceFit(f0=6e9, qi=1e6, qc_star=1e6, phi=0.0)
    assert model_s21(fit, 6e9) == pytest.approx(0.5 + 0j)


def test_model_half_linewidth_point():
    f = 6e9 * (1.0 + 1.0 / (2e6))
    assert model_inverse_s21(6e9, 1e6, 1e6, 0.0, f) == pytest.approx(1.5 - 0.5j)


@given(qi=st.floats(1e4, 1e7), qc=st.floats(1e4, 1e7),
       phi=st.floats(-3.0, 3.0))
def test_model_at_f0_equals_closed_form(qi, qc, phi):
    value = model_inverse_s21(5e9, qi, qc, phi, 5e9)
    assert value == pytest.approx(1.0 + (qi / qc) * np.exp(1j * phi), rel=1e-12)


def test_model_rejects_nonpositive_parameters():
    for bad in [(0, 1e6, 1e6), (6e9, -1, 1e6), (6e9, 1e6, 0)]:
        with pytest.raises(ValueError):
            model_inverse_s21(bad[0], bad[1], bad[2], 0.0, 6e9)


def test_magnitude_minimum_at_f0_for_symmetric_phi():
    fit = ResonanceFit(f0=6e9, qi=1.5e6, qc_star=6e5, phi=0.0)
    freqs = span(fit, halfwidths=10.0, n=4001)
    mags = np.abs(model_s21(fit, freqs))
    assert freqs[np.argmin(mags)] == pytest.approx(6e9, abs=freqs[1] - freqs[0])


# ---------------------------------------------------------------------------
# trace type
# ---------------------------------------------------------------------------

def test_trace_validates_lengths_and_monotonicity():
    with pytest.raises(ValueError):
        ComplexTrace(frequencies=[1.0, 2.0], s21=[1 + 0j])
    with pytest.raises(ValueError):
        ComplexTrace(frequencies=[1.0, 1.0], s21=[1 + 0j, 1 + 0j])
    with pytest.raises(ValueError):
        ComplexTrace(frequencies=[1.0], s21=[1 + 0j])
    with pytest.raises(ValueError):
        ComplexTrace(frequencies=[1.0, 2.0], s21=[1 + 0j, 1 + 0j],
                     line_attenuation=-1.0)


def test_trace_canonicalizes_descending_input():
    up = ComplexTrace(frequencies=[1.0, 2.0, 3.0], s21=[1j, 2j, 3j])
    down = ComplexTrace(frequencies=[3.0, 2.0, 1.0], s21=[3j, 2j, 1j])
    assert np.array_equal(up.frequencies, down.frequencies)
    assert np.array_equal(up.s21, down.s21)


# ---------------------------------------------------------------------------
# synthesize
# ---------------------------------------------------------------------------

def test_synthesize_noiseless_matches_model(paper_like_fit):
    freqs = span(paper_like_fit)
    trace = synthesize_trace(paper_like_fit, freqs)
    assert np.array_equal(trace.s21, model_s21(paper_like_fit, freqs))


def test_synthesize_same_seed_is_bit_identical(paper_like_fit):
    freqs = span(paper_like_fit)
    a = synthesize_trace(paper_like_fit, freqs, noise_sigma=1e-3, rng_seed=42)
    b = synthesize_trace(paper_like_fit, freqs, noise_sigma=1e-3, rng_seed=42)
    assert np.array_equal(a.s21, b.s21)
    c = synthesize_trace(paper_like_fit, freqs, noise_sigma=1e-3, rng_seed=43)
    assert not np.array_equal(a.s21, c.s21)


def test_noisy_round_trip_recovers_qi_within_one_percent():
    truth = ResonanceFit(f0=5.8e9, qi=2e6, qc_star=5e5, phi=0.1)
    trace = synthesize_trace(truth, span(truth), noise_sigma=1e-3, rng_seed=5)
    fit = fit_trace(trace)
    assert fit.qi == pytest.approx(truth.qi, rel=0.01)


# ---------------------------------------------------------------------------
# initial guess
# ---------------------------------------------------------------------------

def test_guess_f0_within_half_step():
    truth = ResonanceFit(f0=6.1e9, qi=1.2e6, qc_star=4e5, phi=0.0)
    freqs = span(truth)
    guess = initial_guess(synthesize_trace(truth, freqs))
    assert abs(guess.f0 - truth.f0) <= 0.5 * (freqs[1] - freqs[0])


def test_guess_flat_trace_raises_no_resonance():
    freqs = np.linspace(5e9, 6e9, 101)
    trace = ComplexTrace(frequencies=freqs, s21=np.ones(101, dtype=complex))
    with pytest.raises(NoResonanceError):
        initial_guess(trace)


def test_guess_depth_half_splits_q_evenly():
    # S21(f0) = 0.5 happens exactly when Qi = Qc*.
    truth = ResonanceFit(f0=6e9, qi=8e5, qc_star=8e5, phi=0.0)
    guess = initial_guess(synthesize_trace(truth, span(truth)))
    assert guess.qi / guess.qc_star == pytest.approx(1.0, rel=0.2)


def test_guess_requires_eight_points():
    fit = ResonanceFit(f0=6e9, qi=1e6, qc_star=1e6, phi=0.0)
    freqs = span(fit, n=7)
    with pytest.raises(ValueError):
        initial_guess(synthesize_trace(fit, freqs))


def test_multiple_dips_warn_and_deepest_wins():
    deep = ResonanceFit(f0=5.8e9, qi=2e6, qc_star=5e5, phi=0.0)
    shallow = ResonanceFit(f0=5.80015e9, qi=5e5, qc_star=2.5e6, phi=0.0)
    freqs = np.linspace(5.7995e9, 5.8004e9, 1201)
    cascade = model_s21(deep, freqs) * model_s21(shallow, freqs)
    trace = ComplexTrace(frequencies=freqs, s21=cascade)
    with pytest.warns(UserWarning, match="dips"):
        guess = initial_guess(trace)
    assert abs(guess.f0 - deep.f0) < abs(guess.f0 - shallow.f0)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def test_fit_noiseless_recovers_exactly(paper_like_fit, noiseless_trace):
    fit = fit_trace(noiseless_trace)
    assert fit.f0 == pytest.approx(paper_like_fit.f0, rel=1e-9)
    assert fit.qi == pytest.approx(paper_like_fit.qi, rel=1e-6)
    assert fit.qc_star == pytest.approx(paper_like_fit.qc_star, rel=1e-6)
    assert fit.phi == pytest.approx(paper_like_fit.phi, abs=1e-6)


def test_fit_with_environment_terms():
    truth = ResonanceFit(f0=4.7e9, qi=9e5, qc_star=3e5, phi=-0.4,
                         env_amplitude=1.7, env_phase=1.1, env_delay=2e-8)
    trace = synthesize_trace(truth, span(truth))
    fit = fit_trace(trace)
    assert fit.qi == pytest.approx(truth.qi, rel=1e-6)
    assert fit.qc_star == pytest.approx(truth.qc_star, rel=1e-6)
    assert fit.env_amplitude == pytest.approx(1.7, rel=1e-6)
    assert fit.env_delay == pytest.approx(2e-8, rel=1e-4)


def test_fit_never_degrades_the_guess(noisy_trace):
    guess = initial_guess(noisy_trace)
    fit = fit_trace(noisy_trace)
    assert fit.residual_rms <= guess.residual_rms


def test_fit_invariant_under_complex_scaling(paper_like_fit, noiseless_trace):
    reference = fit_trace(noiseless_trace)
    factor = 0.73 * np.exp(1.1j)
    scaled = ComplexTrace(frequencies=noiseless_trace.frequencies,
                          s21=noiseless_trace.s21 * factor)
    fit = fit_trace(scaled)
    assert fit.f0 == pytest.approx(reference.f0, rel=1e-9)
    assert fit.qi == pytest.approx(reference.qi, rel=1e-9)
    assert fit.qc_star == pytest.approx(reference.qc_star, rel=1e-9)
    assert abs(fit.phi - reference.phi) < 1e-9
    assert fit.env_amplitude == pytest.approx(
        reference.env_amplitude * abs(factor), rel=1e-9)


def test_fit_invariant_under_sample_reversal(noisy_trace):
    reference = fit_trace(noisy_trace)
    reversed_trace = ComplexTrace(frequencies=noisy_trace.frequencies[::-1],
                                  s21=noisy_trace.s21[::-1],
                                  drive_power=noisy_trace.drive_power)
    fit = fit_trace(reversed_trace)
    assert fit.qi == reference.qi
    assert fit.f0 == reference.f0


def test_fit_round_trip_property():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        truth = ResonanceFit(
            f0=rng.uniform(4e9, 8e9), qi=rng.uniform(1e5, 5e6),
            qc_star=rng.uniform(1e5, 2e6), phi=rng.uniform(-1, 1))
        fit = fit_trace(synthesize_trace(truth, span(truth)))
        assert fit.f0 == pytest.approx(truth.f0, rel=1e-6)
        assert fit.qi == pytest.approx(truth.qi, rel=1e-6)
        assert fit.qc_star == pytest.approx(truth.qc_star, rel=1e-6)
        assert fit.phi == pytest.approx(truth.phi, abs=1e-6)


def test_fit_uncertainty_covers_truth(paper_like_fit):
    freqs = span(paper_like_fit)
    misses = 0
    for seed in range(30):
        trace = synthesize_trace(paper_like_fit, freqs, noise_sigma=1e-3,
                                 rng_seed=seed)
        fit = fit_trace(trace)
        if abs(fit.qi - paper_like_fit.qi) > 4.0 * fit.stderr[1]:
            misses += 1
    assert misses == 0


def test_one_sided_trace_flags_degeneracy(paper_like_fit):
    freqs = span(paper_like_fit)
    full = synthesize_trace(paper_like_fit, freqs, noise_sigma=1e-3, rng_seed=7)
    reference = fit_trace(full)
    lw = linewidth(paper_like_fit)
    keep = full.frequencies >= paper_like_fit.f0 + lw
    one_sided = ComplexTrace(frequencies=full.frequencies[keep],
                             s21=full.s21[keep])
    try:
        fit = fit_trace(one_sided)
    except (UnidentifiableParametersError, FitDivergedError, NoResonanceError):
        return
    # Covariance must flag what the data cannot pin down.
    assert fit.stderr[1] / fit.qi > 10.0 * reference.stderr[1] / reference.qi


def test_fit_diverged_carries_last_iterate(noisy_trace):
    from qloss.resonance import FitConfig
    with pytest.raises(FitDivergedError) as excinfo:
        fit_trace(noisy_trace, config=FitConfig(max_iterations=1))
    assert excinfo.value.last_fit is not None
    assert excinfo.value.last_fit.qi > 0


def test_residual_rms_definition(paper_like_fit, noiseless_trace):
    assert residual_rms(paper_like_fit, noiseless_trace) == pytest.approx(0.0, abs=1e-14)
