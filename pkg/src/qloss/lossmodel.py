"""Participation-ratio loss budgets and junction-electrode loss extraction.

A loss budget combines a background quality factor with a set of dielectric
channels, each contributing participation times loss tangent to the total
inverse quality.  Per-electrode-site loss is extracted from measured
1/Qi versus site count by (optionally weighted) linear regression, and a
handful of closed-form circuit ratios compare how junction-lead metal
participates in a quarter-wave resonator versus a lumped qubit capacitor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateAbscissaError

__all__ = [
    "LossChannel",
    "LossBudget",
    "SiteLossFit",
    "CircuitCapacitances",
    "DEFAULT_CAPACITANCES",
    "total_quality",
    "channel_losses",
    "fit_loss_per_site",
    "infer_loss_tangent",
    "resonator_voltage_profile",
    "resonator_energy",
    "qubit_energy",
    "voltage_ratio_squared",
    "qubit_sensitivity_factor",
    "participation_equivalence",
]


@dataclass(frozen=True)
class LossChannel:
    """One dielectric loss channel: a participation and its loss tangent."""

    label: str
    participation: float
    loss_tangent: float

    def __post_init__(self):
        if not 0.0 < self.participation <= 1.0:
            raise ValueError(
                f"channel {self.label!r}: participation must be in (0, 1], "
                f"got {self.participation}")
        if self.loss_tangent < 0.0:
            raise ValueError(
                f"channel {self.label!r}: loss_tangent must be >= 0, "
                f"got {self.loss_tangent}")

    @property
    def loss(self) -> float:
        """Contribution of this channel to total 1/Q."""
        return self.participation * self.loss_tangent


@dataclass(frozen=True)
class LossBudget:
    """Background quality plus participation-weighted dielectric channels."""

    q0: float
    channels: tuple[LossChannel, ...] = ()

    def __post_init__(self):
        if self.q0 <= 0:
            raise ValueError(f"q0 must be positive, got {self.q0}")
        object.__setattr__(self, "channels", tuple(self.channels))
        labels = [c.label for c in self.channels]
        if len(set(labels)) != len(labels):
            raise ValueError(f"channel labels must be unique, got {labels}")


def total_quality(budget: LossBudget) -> float:
    """Total quality factor: background loss plus every channel's p*delta."""
    inverse = 1.0 / budget.q0 + sum(c.loss for c in budget.channels)
    return 1.0 / inverse


def channel_losses(budget: LossBudget) -> list[tuple[str, float]]:
    """Per-channel loss contributions, sorted largest first."""
    return sorted(((c.label, c.loss) for c in budget.channels),
                  key=lambda item: item[1], reverse=True)


@dataclass(frozen=True)
class SiteLossFit:
    """Line fit of 1/Qi against electrode-site count."""

    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    r_squared: float
    weighted: bool = False

    def __post_init__(self):
        if self.slope_stderr < 0 or self.intercept_stderr < 0:
            raise ValueError("standard errors must be >= 0")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError(f"r_squared must be in [0, 1], got {self.r_squared}")


def fit_loss_per_site(points) -> SiteLossFit:
    """Fit ``1/Qi = intercept + slope * n_sites`` to measured loss points.

    ``points`` is a sequence of ``(n_sites, inverse_qi)`` or
    ``(n_sites, inverse_qi, sigma)`` tuples.  When sigmas are given for every
    point the fit is weighted by 1/sigma^2 and the parameter standard errors
    come straight from the weighted normal equations (sigmas are taken as
    absolute); without sigmas the fit is ordinary least squares and the
    errors are scaled by the residual variance.

    Requires at least three distinct site counts.
    """
    pts = [tuple(p) for p in points]
    if not pts:
        raise ValueError("no points given")
    widths = {len(p) for p in pts}
    if not widths <= {2, 3}:
        raise ValueError("points must be (n, 1/Qi) or (n, 1/Qi, sigma) tuples")
    if len(widths) != 1:
        raise ValueError("either all points or no points may carry sigmas")

    n = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    weighted = widths == {3}
    if weighted:
        sigma = np.array([p[2] for p in pts], dtype=float)
        if np.any(sigma <= 0):
            raise ValueError("sigmas must be positive")
        w = 1.0 / sigma**2
    else:
        w = np.ones_like(y)

    distinct = np.unique(n)
    if distinct.size == 1:
        raise DegenerateAbscissaError(
            f"all points share n_sites = {distinct[0]:g}; no line is defined")
    if distinct.size < 3:
        raise ValueError(
            f"need at least 3 distinct n_sites values, got {distinct.size}")

    # Weighted normal equations for [intercept, slope].
    x_design = np.column_stack([np.ones_like(n), n])
    xtw = x_design.T * w
    normal = xtw @ x_design
    beta = np.linalg.solve(normal, xtw @ y)
    intercept, slope = beta

    residuals = y - x_design @ beta
    rss = float(np.sum(w * residuals**2))
    cov = np.linalg.inv(normal)
    if not weighted:
        dof = len(pts) - 2
        cov = cov * (rss / dof if dof > 0 else 0.0)
    intercept_err, slope_err = np.sqrt(np.diag(cov))

    y_mean = float(np.sum(w * y) / np.sum(w))
    tss = float(np.sum(w * (y - y_mean) ** 2))
    r2 = 1.0 if tss == 0.0 and rss == 0.0 else 1.0 - rss / tss
    r2 = min(max(r2, 0.0), 1.0)

    return SiteLossFit(slope=float(slope), intercept=float(intercept),
                       slope_stderr=float(slope_err),
                       intercept_stderr=float(intercept_err),
                       r_squared=r2, weighted=weighted)


def infer_loss_tangent(excess_loss: float, participation: float) -> float:
    """Intrinsic loss tangent of a region given its participation.

    Inverse of the budget term: a region holding fraction ``participation``
    of the electric-field energy and adding ``excess_loss`` to 1/Qi has loss
    tangent ``excess_loss / participation``.
    """
    if excess_loss < 0:
        raise ValueError(f"excess_loss must be >= 0, got {excess_loss}")
    if not 0.0 < participation <= 1.0:
        raise ValueError(f"participation must be in (0, 1], got {participation}")
    return excess_loss / participation


def resonator_voltage_profile(v0: float, x, length: float):
    """Standing-wave voltage of a quarter-wave line, open end at x = 0.

    ``V(x) = v0 cos(pi x / (2 L))``: full amplitude at the open (capacitive)
    end, zero at the short.
    """
    if length <= 0:
        raise ValueError(f"length must be positive, got {length}")
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0) or np.any(x_arr > length):
        raise ValueError(f"x must lie within [0, {length}]")
    profile = v0 * np.cos(math.pi * x_arr / (2.0 * length))
    return float(profile) if np.isscalar(x) else profile


def resonator_energy(c_per_length: float, length: float, v0: float) -> float:
    """Capacitive energy of a quarter-wave resonator with anti-node voltage v0.

    Integrating the cos^2 profile gives ``C_L * L * v0^2 / 4``.
    """
    _require_positive(c_per_length=c_per_length, length=length, v0=v0)
    return c_per_length * length * v0**2 / 4.0


def qubit_energy(c_per_length: float, length: float, v0: float) -> float:
    """Capacitive energy of an electrically short (lumped) qubit capacitor.

    The voltage is uniform along the capacitor, so the energy is
    ``C_L * L * v0^2 / 2`` - twice the distributed-resonator value.
    """
    _require_positive(c_per_length=c_per_length, length=length, v0=v0)
    return c_per_length * length * v0**2 / 2.0


def voltage_ratio_squared(l_qubit: float, l_resonator: float) -> float:
    """(V_resonator / V_qubit)^2 at equal stored energy: ``2 L_Q / L_R``."""
    _require_positive(l_qubit=l_qubit, l_resonator=l_resonator)
    return 2.0 * l_qubit / l_resonator


def qubit_sensitivity_factor(l_qubit: float, l_resonator: float) -> float:
    """How much more sensitive the qubit is to anti-node loss than the resonator."""
    return 1.0 / voltage_ratio_squared(l_qubit, l_resonator)


DEFAULT_CAPACITANCES = {
    "resonator": 338e-15,
    "xmon_cross": 86e-15,
    "junction": 4e-15,
    "cpw_stub": 2.27e-15,
    "liftoff_metal": 0.75e-15,
    "hooks": 0.05e-15,
}


@dataclass(frozen=True)
class CircuitCapacitances:
    """Equivalent lumped capacitances of the circuit elements, in farads."""

    farads: dict = field(default_factory=lambda: dict(DEFAULT_CAPACITANCES))

    def __post_init__(self):
        for label, value in self.farads.items():
            if value <= 0:
                raise ValueError(f"capacitance {label!r} must be positive, got {value}")

    def __getitem__(self, label: str) -> float:
        return self.farads[label]

    def __contains__(self, label: str) -> bool:
        return label in self.farads


def participation_equivalence(n_sites: int, caps: CircuitCapacitances,
                              n_qubit_electrodes: int = 2) -> float:
    """Ratio of resonator site participation to qubit electrode participation.

    Sites sit at the resonator's voltage anti-node, so each site stores
    energy against the full anti-node voltage while the distributed
    resonator stores only half of the equivalent lumped energy; the qubit
    capacitor is lumped, with no such factor.  Hence

        ratio = 2 * n_sites * C_qubit / (n_qubit_electrodes * C_resonator)

    A result near 1 means one resonator site count mimics the qubit's
    junction-lead participation.
    """
    if n_sites < 1 or n_qubit_electrodes < 1:
        raise ValueError("site and electrode counts must be >= 1")
    for label in ("resonator", "xmon_cross"):
        if label not in caps:
            raise ConfigurationError(f"capacitance table is missing {label!r}")
    return 2.0 * n_sites * caps["xmon_cross"] / (n_qubit_electrodes * caps["resonator"])


def _require_positive(**values):
    for name, value in values.items():
        if value <= 0:
            raise ValueError(f"{name} must be positive, got {value}")
