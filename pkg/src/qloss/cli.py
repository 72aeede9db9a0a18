"""Command-line front end.

Subcommands: ``fit`` (single trace), ``sweep`` (directory of traces at
different powers), ``regress-sites`` (loss per electrode site),
``participation`` (cross-section field solve), ``budget`` (participation
loss budget) and ``ratio`` (resonator-vs-qubit circuit ratios).

Reports are line-delimited JSON on stdout, or written to ``--out`` (in
which case stdout stays quiet).  Exit codes are stable: 0 success,
2 input error, 3 fit failure, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from . import __version__
from .calibration import LineCalibration, mean_photon_number
from .config import ToolConfig, load_config
from .errors import (
    ConfigurationError,
    ConvergenceNotReachedError,
    DegenerateAbscissaError,
    FitDivergedError,
    InterfaceNotSampledError,
    LinearSolveError,
    NoResonanceError,
    ParseError,
    UnidentifiableParametersError,
)
from .fieldsolver import refine_until_converged
from .fileio import (
    read_budget,
    read_geometry,
    read_regression_csv,
    read_trace,
    write_curve_csv,
)
from .lossmodel import (
    CircuitCapacitances,
    channel_losses,
    fit_loss_per_site,
    participation_equivalence,
    qubit_sensitivity_factor,
    total_quality,
    voltage_ratio_squared,
)
from .report import Report
from .resonance import ComplexTrace, ResonanceFit, fit_trace

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3
EXIT_SOLVER = 4

_INPUT_ERRORS = (ParseError, ConfigurationError, DegenerateAbscissaError,
                 ValueError, FileNotFoundError, NotADirectoryError)
_FIT_ERRORS = (NoResonanceError, FitDivergedError, UnidentifiableParametersError)
_SOLVER_ERRORS = (ConvergenceNotReachedError, LinearSolveError,
                  InterfaceNotSampledError)


@dataclass(frozen=True)
class PowerSweep:
    """Traces of one resonator at distinct drive powers, plus the shared line
    calibration used to convert power to photon number."""

    traces: tuple
    calibration: LineCalibration

    def __post_init__(self):
        labels = {t.label for t in self.traces if t.label}
        if len(labels) > 1:
            raise ValueError(f"sweep mixes resonator labels: {sorted(labels)}")
        powers = [t.drive_power for t in self.traces]
        if len(set(powers)) != len(powers):
            raise ValueError("sweep has duplicate drive powers")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="sectioned key = value config file")
    common.add_argument("--out", type=Path, default=None,
                        help="write the report here instead of stdout")
    common.add_argument("--plot", action="store_true",
                        help="also write an SVG plot where supported")
    common.add_argument("--seed", type=int, default=None,
                        help="seed recorded in the report header")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for sweep fitting")

    parser = argparse.ArgumentParser(
        prog="qloss",
        description="Loss characterization for superconducting resonators and qubits")
    parser.add_argument("--version", action="version", version=f"qloss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common],
                       help="fit one complex transmission trace")
    p.add_argument("trace", type=Path)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", parents=[common],
                       help="fit a directory of traces and build Qi vs <n>")
    p.add_argument("directory", type=Path)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("regress-sites", parents=[common],
                       help="extract loss per electrode site from a CSV")
    p.add_argument("csv", type=Path)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("participation", parents=[common],
                       help="solve a cross-section and report participations")
    p.add_argument("geometry", type=Path)
    p.add_argument("--tolerance", type=float, default=None,
                   help="relative mesh-convergence tolerance in (0, 0.1]")
    p.add_argument("--max-cells", type=int, default=None,
                   help="grid-node cap for refinement")
    p.add_argument("--field-dump", type=Path, default=None,
                   help="write the solved potential grid as CSV")
    p.set_defaults(func=cmd_participation)

    p = sub.add_parser("budget", parents=[common],
                       help="evaluate a participation loss budget file")
    p.add_argument("budget", type=Path)
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("ratio", parents=[common],
                       help="resonator/qubit voltage and participation ratios")
    p.add_argument("--qubit-length-m", type=float, default=640e-6)
    p.add_argument("--resonator-length-m", type=float, default=5000e-6)
    p.add_argument("--sites", type=int, default=4,
                   help="lift-off sites on the resonator")
    p.add_argument("--electrodes", type=int, default=2,
                   help="junction electrodes on the qubit (2 for a SQUID)")
    p.add_argument("--c-resonator-ff", type=float, default=None,
                   help="resonator capacitance in fF")
    p.add_argument("--c-qubit-ff", type=float, default=None,
                   help="qubit cross capacitance in fF")
    p.set_defaults(func=cmd_ratio)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _FIT_ERRORS as exc:
        print(f"qloss: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except _SOLVER_ERRORS as exc:
        print(f"qloss: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except _INPUT_ERRORS as exc:
        print(f"qloss: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _new_report(args, command: str) -> Report:
    report = Report(command=command, seed=args.seed)
    if args.config is not None:
        report.add_input(args.config)
    return report


def _fit_record(fit: ResonanceFit, label: str = "", **extra) -> dict:
    err = fit.stderr
    record = {
        "label": label,
        "f0_hz": fit.f0,
        "qi": fit.qi,
        "qc_star": fit.qc_star,
        "phi_rad": fit.phi,
        "f0_stderr_hz": float(err[0]),
        "qi_stderr": float(err[1]),
        "qc_star_stderr": float(err[2]),
        "phi_stderr_rad": float(err[3]),
        "env_amplitude": fit.env_amplitude,
        "env_phase_rad": fit.env_phase,
        "env_delay_s": fit.env_delay,
        "residual_rms": fit.residual_rms,
        "n_iterations": fit.n_iterations,
    }
    record.update(extra)
    return record


def cmd_fit(args) -> int:
    config = load_config(args.config)
    trace = read_trace(args.trace)
    report = _new_report(args, "fit")
    report.add_input(args.trace)
    fit = fit_trace(trace, config=config.fit)
    report.add("fit", **_fit_record(fit, label=trace.label))
    report.write(args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    directory = Path(args.directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*.csv"))
    if not paths:
        raise ParseError(directory, "no trace CSV files found")

    report = _new_report(args, "sweep")
    traces = []
    for path in paths:
        try:
            traces.append((path, read_trace(path)))
            report.add_input(path)
        except ParseError as exc:
            report.add("warning", file=str(path), message=str(exc))
    if not traces:
        raise ParseError(directory, "no readable traces in directory")

    sweep = PowerSweep(traces=tuple(t for _, t in traces),
                       calibration=config.calibration)

    def fit_one(item):
        path, trace = item
        try:
            return path, trace, fit_trace(trace, config=config.fit)
        except (ValueError,) + _FIT_ERRORS as exc:
            return path, trace, exc

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(fit_one, traces))

    # Report rows ordered by ascending drive power however the fits finished.
    results.sort(key=lambda item: item[1].drive_power)
    curve_rows = []
    for path, trace, outcome in results:
        if isinstance(outcome, Exception):
            report.add("warning", file=str(path), message=str(outcome))
            continue
        cal = sweep.calibration
        if trace.line_attenuation:
            cal = replace(cal, line_attenuation=trace.line_attenuation)
        photons = mean_photon_number(outcome, cal, trace.drive_power)
        record = _fit_record(outcome, label=trace.label, file=str(path),
                             drive_power_dbm=trace.drive_power,
                             photon_number_mean=photons)
        report.add("fit", **record)
        curve_rows.append({
            "drive_power_dbm": trace.drive_power,
            "photon_number_mean": photons,
            "qi": outcome.qi,
            "qi_stderr": float(outcome.stderr[1]),
            "f0_hz": outcome.f0,
        })

    if curve_rows:
        plateau = [row["qi"] for row in curve_rows
                   if row["photon_number_mean"] < config.single_photon_max_n]
        if plateau:
            report.add("plateau", qi_single_photon=sum(plateau) / len(plateau),
                       n_points=len(plateau),
                       photon_cutoff=config.single_photon_max_n)
        curve_path = (args.out.with_suffix(".curve.csv") if args.out
                      else Path("qloss_sweep.curve.csv"))
        write_curve_csv(curve_rows, curve_path)
        report.add("curve", path=str(curve_path), n_rows=len(curve_rows))
        if args.plot:
            plot_path = curve_path.with_suffix(".svg")
            _plot_sweep(curve_rows, plot_path)
            report.add("plot", path=str(plot_path))

    report.write(args.out)
    return EXIT_OK


def _plot_sweep(curve_rows, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = [row["photon_number_mean"] for row in curve_rows]
    qi = [row["qi"] for row in curve_rows]
    err = [row["qi_stderr"] for row in curve_rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(n, qi, yerr=err, fmt="o", ms=4, capsize=2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("mean photon number")
    ax.set_ylabel("internal quality factor")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_regress(args) -> int:
    points = read_regression_csv(args.csv)
    report = _new_report(args, "regress-sites")
    report.add_input(args.csv)
    fit = fit_loss_per_site(points)
    report.add("site_loss_fit",
               loss_per_site=fit.slope,
               loss_per_site_stderr=fit.slope_stderr,
               background_loss=fit.intercept,
               background_loss_stderr=fit.intercept_stderr,
               r_squared=fit.r_squared,
               weighted=fit.weighted,
               n_points=len(points))
    report.write(args.out)
    return EXIT_OK


def cmd_participation(args) -> int:
    config = load_config(args.config)
    geometry = read_geometry(args.geometry)
    tolerance = (config.participation_tolerance if args.tolerance is None
                 else args.tolerance)
    max_cells = (config.participation_max_cells if args.max_cells is None
                 else args.max_cells)
    report = _new_report(args, "participation")
    report.add_input(args.geometry)

    try:
        result = refine_until_converged(geometry, tolerance, max_cells=max_cells)
    except ConvergenceNotReachedError as exc:
        for level in exc.trajectory:
            report.add("level", **_participation_record(level))
        report.add("error", message=str(exc))
        report.write(args.out)
        raise
    report.add("participation", **_participation_record(result))
    if args.field_dump is not None:
        _dump_field(geometry, args.field_dump)
        report.add("field_dump", path=str(args.field_dump))
    report.write(args.out)
    return EXIT_OK


def _participation_record(ps) -> dict:
    record = {"cells_per_gap": ps.cells_per_gap}
    if ps.error_estimate is not None:
        record["error_estimate"] = ps.error_estimate
    for kind, value in ps.as_dict().items():
        if value is not None:
            record[f"p_{kind}"] = value
    for conductor in sorted(ps.per_conductor):
        for kind, value in sorted(ps.per_conductor[conductor].items()):
            record[f"p_{kind}_{conductor}"] = value
    return record


def _dump_field(geometry, path) -> None:
    import csv as _csv

    from .fieldsolver import solve_cross_section

    sol = solve_cross_section(geometry)
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = _csv.writer(handle)
        writer.writerow(["x_m", "y_m", "potential_v"])
        for j, yv in enumerate(sol.y):
            for i, xv in enumerate(sol.x):
                writer.writerow([repr(float(xv)), repr(float(yv)),
                                 repr(float(sol.potential[j, i]))])


def cmd_budget(args) -> int:
    budget = read_budget(args.budget)
    report = _new_report(args, "budget")
    report.add_input(args.budget)
    q_total = total_quality(budget)
    report.add("budget_total", q_total=q_total, q0=budget.q0,
               total_loss=1.0 / q_total, n_channels=len(budget.channels))
    for label, loss in channel_losses(budget):
        channel = next(c for c in budget.channels if c.label == label)
        report.add("channel", label=label, participation=channel.participation,
                   loss_tangent=channel.loss_tangent, loss_contribution=loss)
    report.write(args.out)
    return EXIT_OK


def cmd_ratio(args) -> int:
    report = _new_report(args, "ratio")
    ratio_sq = voltage_ratio_squared(args.qubit_length_m, args.resonator_length_m)
    caps = CircuitCapacitances()
    if args.c_resonator_ff is not None or args.c_qubit_ff is not None:
        farads = dict(caps.farads)
        if args.c_resonator_ff is not None:
            farads["resonator"] = args.c_resonator_ff * 1e-15
        if args.c_qubit_ff is not None:
            farads["xmon_cross"] = args.c_qubit_ff * 1e-15
        caps = CircuitCapacitances(farads=farads)
    report.add("ratio",
               qubit_length_m=args.qubit_length_m,
               resonator_length_m=args.resonator_length_m,
               voltage_ratio_squared=ratio_sq,
               qubit_sensitivity_factor=qubit_sensitivity_factor(
                   args.qubit_length_m, args.resonator_length_m),
               n_sites=args.sites,
               n_qubit_electrodes=args.electrodes,
               participation_ratio=participation_equivalence(
                   args.sites, caps, args.electrodes))
    report.write(args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
