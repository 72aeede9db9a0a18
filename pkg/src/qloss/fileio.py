"""File formats: traces, loss budgets, regression tables, geometries, curves.

Trace files are CSV with header ``frequency_hz,s21_real,s21_imag`` (or the
``frequency_hz,s21_db,s21_phase_deg`` magnitude/phase variant, converted on
load).  An optional sidecar next to the trace (same name, ``.meta``
extension) carries ``key = value`` lines for ``drive_power_dbm``,
``line_attenuation_db`` and ``label``.  Budgets and geometries use INI-style
sectioned key = value text.
"""

from __future__ import annotations

import configparser
import csv
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import ParseError
from .fieldsolver import CpwGeometry, InterfaceLayer, PlateGeometry
from .lossmodel import LossBudget, LossChannel
from .resonance import ComplexTrace

__all__ = [
    "read_trace",
    "write_trace",
    "read_budget",
    "read_regression_csv",
    "write_regression_csv",
    "read_geometry",
    "read_curve_csv",
    "write_curve_csv",
]

_TRACE_HEADERS = {
    ("frequency_hz", "s21_real", "s21_imag"): "cartesian",
    ("frequency_hz", "s21_db", "s21_phase_deg"): "polar",
}

_META_KEYS = {"drive_power_dbm", "line_attenuation_db", "label"}


def _float(path, line_no, text, column):
    try:
        return float(text)
    except ValueError:
        raise ParseError(path, f"column {column!r}: cannot parse {text!r} as a number",
                         line=line_no) from None


def meta_path(path) -> Path:
    """Sidecar metadata file belonging to a trace CSV."""
    return Path(path).with_suffix(".meta")


def read_trace(path) -> ComplexTrace:
    """Load a trace CSV plus its optional metadata sidecar."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, "empty file", line=1) from None
        header = tuple(h.strip().lower() for h in header)
        if header not in _TRACE_HEADERS:
            raise ParseError(
                path, f"unrecognized header {','.join(header)!r}; expected "
                "frequency_hz,s21_real,s21_imag or frequency_hz,s21_db,s21_phase_deg",
                line=1)
        polar = _TRACE_HEADERS[header] == "polar"

        freqs, values = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ParseError(path, f"expected 3 columns, got {len(row)}",
                                 line=line_no)
            freqs.append(_float(path, line_no, row[0], header[0]))
            a = _float(path, line_no, row[1], header[1])
            b = _float(path, line_no, row[2], header[2])
            if polar:
                values.append(10.0 ** (a / 20.0)
                              * complex(math.cos(math.radians(b)),
                                        math.sin(math.radians(b))))
            else:
                values.append(complex(a, b))

    meta = _read_meta(meta_path(path))
    try:
        return ComplexTrace(
            frequencies=np.array(freqs), s21=np.array(values),
            drive_power=float(meta.get("drive_power_dbm", 0.0)),
            line_attenuation=float(meta.get("line_attenuation_db", 0.0)),
            label=str(meta.get("label", path.stem)))
    except ValueError as exc:
        raise ParseError(path, str(exc)) from exc


def _read_meta(path: Path) -> dict:
    if not path.exists():
        return {}
    meta = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(),
                                  start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(path, f"expected 'key = value', got {line!r}",
                             line=line_no)
        key, _, value = line.partition("=")
        key = key.strip().lower()
        value = value.strip()
        if key not in _META_KEYS:
            warnings.warn(f"{path}:{line_no}: ignoring unknown metadata key {key!r}")
            continue
        if key != "label":
            value = _float(path, line_no, value, key)
        meta[key] = value
    return meta


def write_trace(trace: ComplexTrace, path, write_meta: bool = True) -> None:
    """Write a trace CSV (cartesian form) and, when useful, its sidecar."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["frequency_hz", "s21_real", "s21_imag"])
        for f, s in zip(trace.frequencies, trace.s21):
            writer.writerow([repr(float(f)), repr(float(s.real)), repr(float(s.imag))])
    if write_meta and (trace.drive_power or trace.line_attenuation or trace.label):
        lines = [f"drive_power_dbm = {trace.drive_power!r}",
                 f"line_attenuation_db = {trace.line_attenuation!r}"]
        if trace.label:
            lines.append(f"label = {trace.label}")
        meta_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_ini(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise ParseError(path, "file not found")
    try:
        with path.open(encoding="utf-8") as handle:
            parser.read_file(handle)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ParseError(path, exc.message.splitlines()[0], line=line) from exc
    return parser


def _ini_float(parser, path, section, key, default=None):
    if not parser.has_option(section, key):
        if default is not None:
            return default
        raise ParseError(path, f"missing key {key!r} in section [{section}]")
    raw = parser.get(section, key)
    try:
        return float(raw)
    except ValueError:
        raise ParseError(path, f"[{section}] {key}: cannot parse {raw!r} "
                         "as a number") from None


def read_budget(path) -> LossBudget:
    """Load a loss budget: a [background] q0 plus [channel.<label>] sections."""
    parser = _read_ini(path)
    if not parser.has_section("background"):
        raise ParseError(path, "missing [background] section")
    q0 = _ini_float(parser, path, "background", "q0")
    channels = []
    for section in parser.sections():
        if not section.startswith("channel."):
            continue
        label = section[len("channel."):]
        channels.append(LossChannel(
            label=label,
            participation=_ini_float(parser, path, section, "participation"),
            loss_tangent=_ini_float(parser, path, section, "loss_tangent")))
    try:
        return LossBudget(q0=q0, channels=tuple(channels))
    except ValueError as exc:
        raise ParseError(path, str(exc)) from exc


def read_regression_csv(path) -> list[tuple]:
    """Load per-site loss points: ``n_sites,inverse_qi[,sigma]`` rows."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise ParseError(path, "empty file", line=1) from None
        if header[:2] != ["n_sites", "inverse_qi"] or len(header) > 3 or (
                len(header) == 3 and header[2] != "sigma"):
            raise ParseError(path, "expected header n_sites,inverse_qi[,sigma]",
                             line=1)
        with_sigma = len(header) == 3
        points = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise ParseError(path, f"expected {len(header)} columns, got "
                                 f"{len(row)}", line=line_no)
            n = _float(path, line_no, row[0], "n_sites")
            y = _float(path, line_no, row[1], "inverse_qi")
            if with_sigma:
                points.append((n, y, _float(path, line_no, row[2], "sigma")))
            else:
                points.append((n, y))
    if not points:
        raise ParseError(path, "no data rows")
    return points


def write_regression_csv(points, path) -> None:
    path = Path(path)
    with_sigma = len(points[0]) == 3
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["n_sites", "inverse_qi", "sigma"] if with_sigma
                        else ["n_sites", "inverse_qi"])
        for point in points:
            writer.writerow([repr(float(v)) for v in point])


def read_geometry(path):
    """Load a cross-section geometry file.

    A ``[cpw]`` section selects the CPW solver; a ``[plate]`` section the
    parallel-plate one.  ``[layers.sm]``/``[layers.sv]``/``[layers.mv]``
    sections add interface films, and ``[domain]`` sets grid resolution and,
    for CPW, the domain extents (``height_m`` applies both above and below
    the substrate surface unless ``depth_m`` overrides the latter).
    """
    parser = _read_ini(path)
    layers = {}
    for kind in ("sm", "sv", "mv"):
        section = f"layers.{kind}"
        if parser.has_section(section):
            layers[kind] = InterfaceLayer(
                thickness=_ini_float(parser, path, section, "thickness_m"),
                epsilon=_ini_float(parser, path, section, "epsilon"))

    has_domain = parser.has_section("domain")
    cells_per_gap = int(_ini_float(parser, path, "domain", "cells_per_gap",
                                   default=8.0)) if has_domain else 8

    try:
        if parser.has_section("cpw"):
            height = (_ini_float(parser, path, "domain", "height_m", default=-1.0)
                      if has_domain else -1.0)
            depth = (_ini_float(parser, path, "domain", "depth_m",
                                default=height) if has_domain else -1.0)
            half_width = (_ini_float(parser, path, "domain", "half_width_m",
                                     default=-1.0) if has_domain else -1.0)
            return CpwGeometry(
                center_width=_ini_float(parser, path, "cpw", "w_m"),
                gap=_ini_float(parser, path, "cpw", "g_m"),
                metal_thickness=_ini_float(parser, path, "cpw",
                                           "metal_thickness_m", default=100e-9),
                substrate_epsilon=_ini_float(parser, path, "cpw",
                                             "substrate_epsilon", default=11.6),
                half_width=None if half_width <= 0 else half_width,
                height_above=None if height <= 0 else height,
                depth_below=None if depth <= 0 else depth,
                layers=layers, cells_per_gap=cells_per_gap)
        if parser.has_section("plate"):
            return PlateGeometry(
                width=_ini_float(parser, path, "plate", "width_m"),
                separation=_ini_float(parser, path, "plate", "separation_m"),
                medium_epsilon=_ini_float(parser, path, "plate",
                                          "medium_epsilon", default=1.0),
                split_interface=parser.getboolean("plate", "split_interface",
                                                  fallback=False),
                layers=layers, cells_per_gap=cells_per_gap)
    except ValueError as exc:
        raise ParseError(path, str(exc)) from exc
    raise ParseError(path, "geometry file needs a [cpw] or [plate] section")


def write_curve_csv(rows: list[dict], path) -> None:
    """Write a derived-curve CSV; floats keep full precision so the file
    round-trips bit-exactly."""
    path = Path(path)
    if not rows:
        raise ValueError("no rows to write")
    columns = list(rows[0].keys())
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(row[c])) if isinstance(row[c], float)
                             else str(row[c]) for c in columns])


def read_curve_csv(path) -> list[dict]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            columns = next(reader)
        except StopIteration:
            raise ParseError(path, "empty file", line=1) from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(columns):
                raise ParseError(path, f"expected {len(columns)} columns, got "
                                 f"{len(row)}", line=line_no)
            parsed = {}
            for key, value in zip(columns, row):
                try:
                    parsed[key] = float(value)
                except ValueError:
                    parsed[key] = value
            rows.append(parsed)
    return rows
