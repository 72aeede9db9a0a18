"""Machine-readable reports: line-delimited JSON records.

A report opens with a header record carrying the tool version, the SHA-256
digest of every input file and the seed, so identical inputs provably yield
identical reports.  Numeric keys carry their unit as a suffix (``_hz``,
``_dbm``, ``_s``, ``_rad``); bare names are dimensionless.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

__all__ = ["Report", "file_digest"]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class Report:
    """An ordered list of JSON records plus the provenance header."""

    command: str
    input_digests: dict = field(default_factory=dict)
    seed: int | None = None
    records: list = field(default_factory=list)

    def add_input(self, path) -> None:
        self.input_digests[str(path)] = file_digest(path)

    def add(self, record_type: str, **fields) -> None:
        self.records.append({"record": record_type, **fields})

    def to_jsonl(self) -> str:
        header = {
            "record": "header",
            "tool": "qloss",
            "tool_version": __version__,
            "command": self.command,
            "input_digests": self.input_digests,
        }
        if self.seed is not None:
            header["seed"] = self.seed
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(json.dumps(record, sort_keys=True, default=_jsonify)
                     for record in self.records)
        return "\n".join(lines) + "\n"

    def write(self, out_path=None) -> None:
        """Write to ``out_path``, or to stdout when no path is given."""
        text = self.to_jsonl()
        if out_path is None:
            sys.stdout.write(text)
        else:
            Path(out_path).write_text(text, encoding="utf-8")


def _jsonify(value):
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)
