"""Shared tool configuration: sectioned key = value text.

Precedence everywhere is CLI flag > config file > built-in default.

Recognized sections and keys (all optional):

    [calibration]
    z0_ohm = 50.0
    c_per_length_f_per_m = 1.6e-10     # typical CPW-on-silicon default
    resonator_length_m = 5.0e-3
    line_attenuation_db = 0.0

    [fit]
    max_iterations = 200
    cost_rtol = 1e-12

    [participation]
    tolerance = 0.05
    max_cells = 6000000

    [sweep]
    single_photon_max_n = 10.0         # <n> cutoff for the low-power plateau
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .calibration import LineCalibration
from .errors import ParseError
from .fileio import _ini_float, _read_ini
from .resonance import FitConfig

__all__ = ["ToolConfig", "load_config"]


@dataclass(frozen=True)
class ToolConfig:
    calibration: LineCalibration = field(default_factory=LineCalibration)
    fit: FitConfig = field(default_factory=FitConfig)
    participation_tolerance: float = 0.05
    participation_max_cells: int = 6_000_000
    single_photon_max_n: float = 10.0


def load_config(path=None) -> ToolConfig:
    """Read a config file; with ``path=None`` return the built-in defaults."""
    config = ToolConfig()
    if path is None:
        return config
    parser = _read_ini(path)

    if parser.has_section("calibration"):
        cal = config.calibration
        try:
            cal = LineCalibration(
                z0=_ini_float(parser, path, "calibration", "z0_ohm",
                              default=cal.z0),
                c_per_length=_ini_float(parser, path, "calibration",
                                        "c_per_length_f_per_m",
                                        default=cal.c_per_length),
                resonator_length=_ini_float(parser, path, "calibration",
                                            "resonator_length_m",
                                            default=cal.resonator_length),
                line_attenuation=_ini_float(parser, path, "calibration",
                                            "line_attenuation_db",
                                            default=cal.line_attenuation))
        except ValueError as exc:
            raise ParseError(path, str(exc)) from exc
        config = replace(config, calibration=cal)

    if parser.has_section("fit"):
        fit = replace(
            config.fit,
            max_iterations=int(_ini_float(parser, path, "fit", "max_iterations",
                                          default=float(config.fit.max_iterations))),
            cost_rtol=_ini_float(parser, path, "fit", "cost_rtol",
                                 default=config.fit.cost_rtol))
        config = replace(config, fit=fit)

    if parser.has_section("participation"):
        config = replace(
            config,
            participation_tolerance=_ini_float(
                parser, path, "participation", "tolerance",
                default=config.participation_tolerance),
            participation_max_cells=int(_ini_float(
                parser, path, "participation", "max_cells",
                default=float(config.participation_max_cells))))

    if parser.has_section("sweep"):
        config = replace(
            config,
            single_photon_max_n=_ini_float(parser, path, "sweep",
                                           "single_photon_max_n",
                                           default=config.single_photon_max_n))
    return config
