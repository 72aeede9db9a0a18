"""Drive-power and quality-factor calibration arithmetic.

Converts instrument drive power to mean intra-resonator photon number and
translates between qubit energy-relaxation time and the equivalent internal
quality factor at a given frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import h as PLANCK

__all__ = [
    "LineCalibration",
    "loaded_q",
    "dbm_to_watts",
    "mean_photon_number",
    "qi_from_t1",
    "t1_from_qi",
]


@dataclass(frozen=True)
class LineCalibration:
    """Transmission-line parameters needed to convert power to photons.

    ``c_per_length`` defaults to 1.6e-10 F/m, a typical value for a 50 ohm
    CPW on silicon; override it when the geometry is known.  All values are
    SI (ohms, F/m, meters, dB).
    """

    z0: float = 50.0
    c_per_length: float = 1.6e-10
    resonator_length: float = 5.0e-3
    line_attenuation: float = 0.0

    def __post_init__(self):
        if self.z0 <= 0:
            raise ValueError(f"z0 must be positive, got {self.z0}")
        if self.c_per_length <= 0:
            raise ValueError(f"c_per_length must be positive, got {self.c_per_length}")
        if self.resonator_length <= 0:
            raise ValueError(f"resonator_length must be positive, got {self.resonator_length}")
        if self.line_attenuation < 0:
            raise ValueError(f"line_attenuation must be >= 0, got {self.line_attenuation}")


def loaded_q(qi: float, qc_star: float) -> float:
    """Loaded quality factor of internal and coupling contributions in parallel."""
    if qi <= 0 or qc_star <= 0:
        raise ValueError(f"quality factors must be positive, got Qi={qi}, Qc*={qc_star}")
    return 1.0 / (1.0 / qi + 1.0 / qc_star)


def dbm_to_watts(power_dbm: float) -> float:
    """Convert dBm to watts.  ``-inf`` dBm maps to exactly zero watts."""
    return 10.0 ** ((power_dbm - 30.0) / 10.0)


def mean_photon_number(fit, cal: LineCalibration, drive_power_dbm: float) -> float:
    """Mean photon occupation of a notch resonator at a given drive power.

    The power arriving at the feedline is the instrument output power less
    the total line attenuation.  The stored energy follows from the loaded
    and coupling quality factors and the resonator's lumped capacitance
    (C per length times physical length):

        <n> = (4 Z0 / pi) * (Ql^2 / Qc*) * C_L * L_R * P_drive / (h f0)

    Strictly linear in the drive power expressed in watts.

    Parameters
    ----------
    fit : ResonanceFit
        Fitted resonance; only ``f0``, ``qi`` and ``qc_star`` are used.
    cal : LineCalibration
        Line and resonator geometry parameters.
    drive_power_dbm : float
        Power at the instrument output in dBm.
    """
    p_drive = dbm_to_watts(drive_power_dbm - cal.line_attenuation)
    ql = loaded_q(fit.qi, fit.qc_star)
    energy = (4.0 * cal.z0 / math.pi) * (ql**2 / fit.qc_star) \
        * cal.c_per_length * cal.resonator_length * p_drive
    return energy / (PLANCK * fit.f0)


def qi_from_t1(t1: float, f: float) -> float:
    """Effective internal quality factor of a qubit with relaxation time ``t1`` at ``f``."""
    if t1 < 0:
        raise ValueError(f"t1 must be >= 0, got {t1}")
    if f <= 0:
        raise ValueError(f"frequency must be positive, got {f}")
    return 2.0 * math.pi * f * t1


def t1_from_qi(qi: float, f: float) -> float:
    """Relaxation time equivalent to internal quality ``qi`` at frequency ``f``."""
    if qi < 0:
        raise ValueError(f"qi must be >= 0, got {qi}")
    if f <= 0:
        raise ValueError(f"frequency must be positive, got {f}")
    return qi / (2.0 * math.pi * f)
