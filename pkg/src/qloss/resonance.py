"""Notch-resonator transmission model and complex least-squares fitting.

The measured transmission past a capacitively coupled quarter-wave resonator
is modeled through its normalized inverse,

    S21_inv(f) = 1 + (Qi/Qc*) e^{i phi} / (1 + 2i Qi (f - f0)/f0),

which equals 1 far off resonance.  Real traces additionally carry a cable
amplitude, a phase offset and an electrical delay, so the full model fitted
here is

    S21(f) = A e^{i (theta - 2 pi f tau)} / S21_inv(f)

with seven parameters: four core (f0, Qi, Qc*, phi) and three environment
(A, theta, tau).  Fitting minimizes the sum of squared complex residuals
(both quadratures) with a damped Gauss-Newton (Levenberg-Marquardt)
iteration using an analytic Jacobian.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    FitDivergedError,
    NoResonanceError,
    UnidentifiableParametersError,
)

__all__ = [
    "ComplexTrace",
    "ResonanceFit",
    "FitConfig",
    "model_inverse_s21",
    "model_s21",
    "synthesize_trace",
    "initial_guess",
    "fit_trace",
    "residual_rms",
]

MIN_POINTS_MODEL = 2
MIN_POINTS_FIT = 8


@dataclass(frozen=True)
class ComplexTrace:
    """A frequency-ordered series of complex transmission samples.

    Samples are canonicalized to ascending frequency on construction, so a
    trace recorded in a downward sweep fits identically to its upward twin.
    ``drive_power`` is the instrument output power in dBm and
    ``line_attenuation`` the total attenuation (dB, >= 0) between instrument
    and device.
    """

    frequencies: np.ndarray
    s21: np.ndarray
    drive_power: float = 0.0
    line_attenuation: float = 0.0
    label: str = ""

    def __post_init__(self):
        freq = np.asarray(self.frequencies, dtype=float)
        s21 = np.asarray(self.s21, dtype=complex)
        if freq.ndim != 1 or s21.ndim != 1:
            raise ValueError("frequencies and s21 must be 1-D arrays")
        if freq.size != s21.size:
            raise ValueError(
                f"length mismatch: {freq.size} frequencies vs {s21.size} s21 samples")
        if freq.size < MIN_POINTS_MODEL:
            raise ValueError(f"need at least {MIN_POINTS_MODEL} points, got {freq.size}")
        order = np.argsort(freq, kind="stable")
        freq = freq[order]
        s21 = s21[order]
        if np.any(np.diff(freq) <= 0):
            raise ValueError("frequencies must be distinct (strictly increasing after sorting)")
        if self.line_attenuation < 0:
            raise ValueError(f"line_attenuation must be >= 0, got {self.line_attenuation}")
        freq.setflags(write=False)
        s21.setflags(write=False)
        object.__setattr__(self, "frequencies", freq)
        object.__setattr__(self, "s21", s21)

    def __len__(self) -> int:
        return self.frequencies.size


@dataclass(frozen=True)
class ResonanceFit:
    """Fitted resonance parameters with environment terms and uncertainties.

    ``param_covariance`` is the 4x4 covariance of (f0, Qi, Qc*, phi) derived
    from the Jacobian at the optimum; ``residual_rms`` is the rms complex
    residual per point.
    """

    f0: float
    qi: float
    qc_star: float
    phi: float
    env_amplitude: float = 1.0
    env_phase: float = 0.0
    env_delay: float = 0.0
    param_covariance: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)))
    residual_rms: float = float("nan")
    n_iterations: int = 0

    def __post_init__(self):
        if self.f0 <= 0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if self.qi <= 0 or self.qc_star <= 0:
            raise ValueError(
                f"quality factors must be positive, got Qi={self.qi}, Qc*={self.qc_star}")
        if not abs(self.phi) < np.pi:
            raise ValueError(f"|phi| must be < pi, got {self.phi}")
        if self.env_amplitude <= 0:
            raise ValueError(f"env_amplitude must be positive, got {self.env_amplitude}")
        cov = np.asarray(self.param_covariance, dtype=float)
        if cov.shape != (4, 4):
            raise ValueError(f"param_covariance must be 4x4, got {cov.shape}")
        object.__setattr__(self, "param_covariance", cov)

    @property
    def stderr(self) -> np.ndarray:
        """Standard errors of (f0, Qi, Qc*, phi)."""
        return np.sqrt(np.clip(np.diag(self.param_covariance), 0.0, None))


@dataclass(frozen=True)
class FitConfig:
    """Optimizer knobs for :func:`fit_trace`.

    The damping factor multiplies the diagonal of J^T J; it shrinks by
    ``damping_down`` on accepted steps and grows by ``damping_up`` on
    rejected ones.  Iteration stops when the relative cost change drops
    below ``cost_rtol`` (default 1e-12), when the cost reaches the numeric
    noise floor, or at ``max_iterations`` (then the fit is declared
    diverged).  A few undamped polish steps sharpen the optimum afterwards.
    """

    max_iterations: int = 200
    cost_rtol: float = 1e-12
    damping_init: float = 1e-3
    damping_up: float = 7.0
    damping_down: float = 0.25
    damping_max: float = 1e12
    polish_steps: int = 3
    edge_fraction: float = 0.1
    condition_limit: float = 1e12


def _wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi)."""
    wrapped = float(np.arctan2(np.sin(angle), np.cos(angle)))
    if wrapped >= np.pi:
        wrapped -= 2.0 * np.pi
    return wrapped


def model_inverse_s21(f0: float, qi: float, qc_star: float, phi: float, f):
    """Normalized inverse transmission of the four-parameter notch model.

    Accepts a scalar or array of frequencies; tends to 1 far off resonance.
    """
    if f0 <= 0 or qi <= 0 or qc_star <= 0:
        raise ValueError(
            f"f0, Qi and Qc* must be positive, got f0={f0}, Qi={qi}, Qc*={qc_star}")
    f_arr = np.asarray(f, dtype=float)
    detuning = 2.0 * qi * (f_arr - f0) / f0
    value = 1.0 + (qi / qc_star) * np.exp(1j * phi) / (1.0 + 1j * detuning)
    return complex(value) if np.isscalar(f) else value


def _env_factor(amplitude: float, phase: float, delay: float, f):
    return amplitude * np.exp(1j * (phase - 2.0 * np.pi * np.asarray(f, dtype=float) * delay))


def model_s21(fit: ResonanceFit, f):
    """Full model transmission including the environment factor."""
    env = _env_factor(fit.env_amplitude, fit.env_phase, fit.env_delay, f)
    return env / model_inverse_s21(fit.f0, fit.qi, fit.qc_star, fit.phi, f)


def residual_rms(fit: ResonanceFit, trace: ComplexTrace) -> float:
    """Root-mean-square complex residual of ``fit`` against ``trace``."""
    res = model_s21(fit, trace.frequencies) - trace.s21
    return float(np.sqrt(np.mean(np.abs(res) ** 2)))


def synthesize_trace(fit: ResonanceFit, frequencies, noise_sigma: float = 0.0,
                     rng_seed: int = 0, drive_power: float = 0.0,
                     line_attenuation: float = 0.0, label: str = "synthetic") -> ComplexTrace:
    """Generate a trace from exact model parameters plus optional noise.

    Noise is i.i.d. complex Gaussian with standard deviation ``noise_sigma``
    per quadrature; a fixed ``rng_seed`` gives bit-identical output.
    """
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma}")
    freq = np.asarray(frequencies, dtype=float)
    s21 = model_s21(fit, freq)
    if noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        s21 = s21 + noise_sigma * (rng.standard_normal(freq.size)
                                   + 1j * rng.standard_normal(freq.size))
    return ComplexTrace(frequencies=freq, s21=s21, drive_power=drive_power,
                        line_attenuation=line_attenuation, label=label)


# ---------------------------------------------------------------------------
# Initial guess
# ---------------------------------------------------------------------------

def _edge_indices(n: int, fraction: float) -> np.ndarray:
    k = max(3, int(round(n * fraction)))
    k = min(k, n // 3) or 1
    return np.concatenate([np.arange(k), np.arange(n - k, n)])


def _estimate_delay(freq: np.ndarray, s21: np.ndarray, fraction: float) -> float:
    """Electrical delay from the linear phase slope of the trace edges."""
    n = freq.size
    k = max(3, int(round(n * fraction)))
    k = min(k, n // 3) or 2
    slopes = []
    for sl in (slice(0, k), slice(n - k, n)):
        phase = np.unwrap(np.angle(s21[sl]))
        if phase.size >= 2:
            slopes.append(np.polyfit(freq[sl], phase, 1)[0])
    slope = float(np.mean(slopes))
    return -slope / (2.0 * np.pi)


def initial_guess(trace: ComplexTrace, edge_fraction: float = 0.1) -> ResonanceFit:
    """Starting parameters for :func:`fit_trace` from dip geometry.

    Removes the edge-estimated delay and off-resonance level, locates the
    transmission minimum, reads the loaded Q off the full width at half
    depth of the |S21|^2 dip and splits it into Qi and Qc* from the dip
    depth.  Raises :class:`NoResonanceError` when the dip does not clear
    three times the edge noise.
    """
    n = len(trace)
    if n < MIN_POINTS_FIT:
        raise ValueError(f"need at least {MIN_POINTS_FIT} points to fit, got {n}")
    freq = trace.frequencies
    s21 = trace.s21

    delay = _estimate_delay(freq, s21, edge_fraction)
    edges = _edge_indices(n, edge_fraction)
    derotated = s21 * np.exp(2j * np.pi * freq * delay)
    env_vector = np.mean(derotated[edges])
    amplitude = abs(env_vector)
    if amplitude == 0 or not np.isfinite(amplitude):
        raise NoResonanceError("trace edges have zero amplitude")
    phase = float(np.angle(env_vector))

    z = derotated / env_vector
    mag = np.abs(z)

    depth = 1.0 - float(mag.min())
    # Robust noise estimate from adjacent-sample differences; the smooth
    # resonance trend cancels, so a dip sitting at the trace edge does not
    # masquerade as noise.
    noise = 1.4826 * float(np.median(np.abs(np.diff(mag)))) / np.sqrt(2.0)
    floor = 100.0 * np.finfo(float).eps
    if depth < max(3.0 * noise, floor):
        raise NoResonanceError(
            f"no resonance found: dip depth {depth:.3g} is below 3x the "
            f"edge noise estimate {noise:.3g}")

    i_min = int(np.argmin(mag))
    _warn_extra_dips(freq, mag, depth, noise, i_min)
    f0 = float(freq[i_min])
    dip = float(mag[i_min])

    # Full width of the |S21|^2 dip at half depth -> loaded Q.
    power = mag**2
    half_level = 0.5 * (1.0 + dip**2)
    f_left = _crossing(freq, power, i_min, half_level, direction=-1)
    f_right = _crossing(freq, power, i_min, half_level, direction=+1)
    if f_left is not None and f_right is not None:
        width = f_right - f_left
    elif f_right is not None:
        width = 2.0 * (f_right - f0)
    elif f_left is not None:
        width = 2.0 * (f0 - f_left)
    else:
        width = (freq[-1] - freq[0]) / 2.0
    width = max(width, float(np.min(np.diff(freq))))
    ql = f0 / width

    dip = min(max(dip, 1e-6), 1.0 - 1e-6)
    qi = ql / dip
    qc_star = ql / (1.0 - dip)
    phi = _wrap_angle(float(np.angle(1.0 / z[i_min] - 1.0)))

    guess = ResonanceFit(f0=f0, qi=qi, qc_star=qc_star, phi=phi,
                         env_amplitude=amplitude, env_phase=phase, env_delay=delay)
    return replace(guess, residual_rms=residual_rms(guess, trace))


def _crossing(freq, power, i_min, level, direction):
    """Interpolated frequency where the dip recrosses ``level`` on one side."""
    i = i_min
    n = power.size
    while 0 <= i + direction < n:
        j = i + direction
        if power[j] >= level:
            frac = (level - power[i]) / (power[j] - power[i])
            return float(freq[i] + frac * (freq[j] - freq[i]))
        i = j
    return None


def _warn_extra_dips(freq, mag, depth, noise, i_min):
    """Warn when the trace holds more than one resolved dip; the deepest wins."""
    threshold = max(0.1 * depth, 5.0 * noise)
    below = mag < 1.0 - threshold
    runs = []
    start = None
    for i, flag in enumerate(below):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(below) - 1))
    runs = [r for r in runs if r[1] - r[0] + 1 >= 5]
    if len(runs) > 1:
        others = [f"{freq[(a + b) // 2]:.6g} Hz" for a, b in runs
                  if not a <= i_min <= b]
        warnings.warn(
            f"trace shows {len(runs)} dips; fitting the deepest, "
            f"ignoring dip(s) near {', '.join(others)}", stacklevel=3)


# ---------------------------------------------------------------------------
# Levenberg-Marquardt fit
# ---------------------------------------------------------------------------

# Per-iteration step caps and hard bounds in internal coordinates
# (nu, ln Qi, ln Qc*, phi, ln A, theta_c, psi).  The caps keep a single
# damped step from jumping across the shallow valley at Qi -> infinity where
# the model loses its Qi dependence; the bounds keep trial points physical.
_STEP_LIMITS = np.array([2e-2, 1.5, 1.5, 0.75, 1.5, 1.5, 3.0])
_BOUNDS_LO = np.array([-0.5, 0.0, 0.0, -np.inf, -34.0, -np.inf, -1e5])
_BOUNDS_HI = np.array([1.0, 27.6, 27.6, np.inf, 34.0, np.inf, 1e5])


@dataclass(frozen=True)
class _Coords:
    """Internal coordinate frame of the optimizer.

    Frequencies are scaled by the reference ``f_ref`` (the initial f0
    estimate): x = f / f_ref.  The electrical delay is carried as the phase
    tilt ``psi`` it produces across the half-band ``x_half`` around the
    band center ``x0``, and ``theta_c`` is the environment phase at the band
    center.  Over a narrow band the raw (phase, delay) pair is almost
    collinear; this pair is orthogonal and O(1).
    """

    f_ref: float
    x0: float
    x_half: float

    @classmethod
    def for_trace(cls, trace: ComplexTrace, f_ref: float) -> "_Coords":
        x = trace.frequencies / f_ref
        return cls(f_ref=f_ref, x0=0.5 * float(x[0] + x[-1]),
                   x_half=0.5 * float(x[-1] - x[0]))

    def pack(self, fit: ResonanceFit) -> np.ndarray:
        scale = 2.0 * np.pi * self.f_ref * fit.env_delay
        # theta_c is only meaningful mod 2 pi; wrapping keeps trig arguments
        # small so the cost can reach the roundoff floor.
        return np.array([
            (fit.f0 - self.f_ref) / self.f_ref,
            np.log(fit.qi),
            np.log(fit.qc_star),
            fit.phi,
            np.log(fit.env_amplitude),
            _wrap_angle(fit.env_phase - scale * self.x0),
            scale * self.x_half,
        ])

    def unpack(self, p: np.ndarray, **extra) -> ResonanceFit:
        return ResonanceFit(
            f0=self.f_ref * (1.0 + p[0]),
            qi=float(np.exp(p[1])),
            qc_star=float(np.exp(p[2])),
            phi=_wrap_angle(p[3]),
            env_amplitude=float(np.exp(p[4])),
            env_phase=_wrap_angle(p[5] + p[6] * self.x0 / self.x_half),
            env_delay=p[6] / (2.0 * np.pi * self.f_ref * self.x_half),
            **extra,
        )


def _model_and_jacobian(p: np.ndarray, x: np.ndarray, coords: _Coords):
    """Model S21 and its complex Jacobian in internal coordinates.

    ``x`` is frequency divided by the reference frequency; the delay phase
    is parameterized as -psi (x - x0) / x_half.
    """
    nu, lqi, lqc, phi, lna, theta_c, psi = p
    tilt = (x - coords.x0) / coords.x_half
    with np.errstate(all="ignore"):
        qi = np.exp(lqi)
        b = np.exp(lqi - lqc + 1j * phi)
        u = 2.0 * qi * (x / (1.0 + nu) - 1.0)
        den = 1.0 + 1j * u
        d = 1.0 + b / den
        env = np.exp(lna + 1j * (theta_c - psi * tilt))
        s = env / d

        common = -s / d
        jac = np.empty((x.size, 7), dtype=complex)
        jac[:, 0] = common * (2j * qi * x * b) / ((1.0 + nu) ** 2 * den**2)
        jac[:, 1] = common * b / den**2
        jac[:, 2] = -common * b / den
        jac[:, 3] = common * 1j * b / den
        jac[:, 4] = s
        jac[:, 5] = 1j * s
        jac[:, 6] = -1j * tilt * s
    return s, jac


def _cost_and_linearization(p, x, y, coords):
    s, jac_c = _model_and_jacobian(p, x, coords)
    res_c = s - y
    r = np.concatenate([res_c.real, res_c.imag])
    jac = np.vstack([jac_c.real, jac_c.imag])
    return 0.5 * float(r @ r), r, jac


def fit_trace(trace: ComplexTrace, config: FitConfig = FitConfig(),
              guess: ResonanceFit | None = None) -> ResonanceFit:
    """Fit the seven-parameter notch model to a measured trace.

    Runs a damped least-squares iteration on the stacked real and imaginary
    residuals starting from :func:`initial_guess`.  Frequencies are scaled
    by the initial resonance estimate internally so the Jacobian is well
    conditioned.  Returns the fit with the 4x4 core-parameter covariance
    estimated from the Jacobian at the optimum.

    Raises
    ------
    FitDivergedError
        If the iteration cap is reached; the best iterate rides along.
    UnidentifiableParametersError
        If the Jacobian at the optimum is numerically rank deficient.
    NoResonanceError
        If no dip is found to seed the fit.
    """
    if guess is None:
        guess = initial_guess(trace, edge_fraction=config.edge_fraction)
    coords = _Coords.for_trace(trace, guess.f0)
    x = trace.frequencies / coords.f_ref
    y = trace.s21

    p = np.clip(coords.pack(guess), _BOUNDS_LO, _BOUNDS_HI)
    cost, r, jac = _cost_and_linearization(p, x, y, coords)
    scale = float(np.mean(np.abs(y)))
    cost_floor = x.size * (50.0 * np.finfo(float).eps * max(scale, 1e-300)) ** 2

    damping = config.damping_init
    n_iter = 0
    converged = cost <= cost_floor
    while not converged and n_iter < config.max_iterations:
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.clip(np.diag(jtj), 1e-32, None)
        step_found = False
        while damping <= config.damping_max:
            try:
                step = np.linalg.solve(jtj + damping * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                damping *= config.damping_up
                continue
            overshoot = float(np.max(np.abs(step) / _STEP_LIMITS))
            if overshoot > 1.0:
                step = step / overshoot
            p_try = np.clip(p + step, _BOUNDS_LO, _BOUNDS_HI)
            cost_try = _cost_and_linearization(p_try, x, y, coords)[0]
            if np.isfinite(cost_try) and cost_try < cost:
                step_found = True
                break
            damping *= config.damping_up
        if not step_found:
            # Even an arbitrarily damped (steepest-descent-like) step cannot
            # reduce the cost, so this is the optimum to numerical precision.
            converged = True
            break
        n_iter += 1
        improvement = cost - cost_try
        p = p_try
        cost, r, jac = _cost_and_linearization(p, x, y, coords)
        damping = max(damping * config.damping_down, 1e-14)
        if cost <= cost_floor or improvement <= config.cost_rtol * max(cost, 1e-300):
            converged = True

    if not converged:
        raise FitDivergedError(
            f"fit diverged: iteration cap {config.max_iterations} reached",
            last_fit=_final_fit(p, coords, x, y, trace, n_iter, config))

    # Undamped polish: sharpen into the quadratic basin so the optimum is
    # independent of the path taken to reach it.
    for _ in range(config.polish_steps):
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.clip(np.diag(jtj), 1e-32, None)
        try:
            step = np.linalg.solve(jtj + 1e-14 * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            break
        overshoot = float(np.max(np.abs(step) / _STEP_LIMITS))
        if overshoot > 1.0:
            step = step / overshoot
        p_try = np.clip(p + step, _BOUNDS_LO, _BOUNDS_HI)
        cost_try, r_try, jac_try = _cost_and_linearization(p_try, x, y, coords)
        if not np.isfinite(cost_try) or cost_try > cost:
            break
        p, cost, r, jac = p_try, cost_try, r_try, jac_try

    return _final_fit(p, coords, x, y, trace, n_iter, config, jac=jac, r=r,
                      check_rank=True)


def _final_fit(p, coords, x, y, trace, n_iter, config, jac=None, r=None,
               check_rank=False) -> ResonanceFit:
    if jac is None or r is None:
        _, r, jac = _cost_and_linearization(p, x, y, coords)

    m, n_par = jac.shape
    col_norm = np.linalg.norm(jac, axis=0)
    if check_rank:
        if np.any(col_norm == 0):
            raise UnidentifiableParametersError(
                "unidentifiable parameters: a model parameter has no effect "
                "on the data")
        sv = np.linalg.svd(jac / col_norm, compute_uv=False)
        if sv[-1] == 0 or sv[0] / sv[-1] > config.condition_limit:
            raise UnidentifiableParametersError(
                f"unidentifiable parameters: scaled Jacobian condition "
                f"{sv[0] / max(sv[-1], 1e-300):.2e} exceeds "
                f"{config.condition_limit:.0e}")

    dof = max(m - n_par, 1)
    sigma2 = float(r @ r) / dof
    u, s, vt = np.linalg.svd(jac, full_matrices=False)
    s_inv2 = np.where(s > s[0] * 1e-15, 1.0 / np.clip(s, 1e-300, None) ** 2, 0.0)
    cov_internal = (vt.T * s_inv2) @ vt * sigma2

    qi = float(np.exp(p[1]))
    qc = float(np.exp(p[2]))
    transform = np.diag([coords.f_ref, qi, qc, 1.0])
    cov_core = transform @ cov_internal[:4, :4] @ transform

    fit = coords.unpack(p, param_covariance=cov_core, n_iterations=n_iter)
    return replace(fit, residual_rms=residual_rms(fit, trace))
