"""CSV and JSON files read and written by the command line.

Observation files carry a header naming their columns: ``y,z`` for pairs or
``x1,x2,v3`` for raw triples. Curve files use ``t,value``; step functions use
``breakpoint,level`` after a comment line stating the right-continuity
convention. Numbers are written with 17 significant digits, so doubles
survive a round trip unchanged. Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import json
from typing import Any, Optional

import numpy as np

from .lcm import ConcaveMajorant, StepFunction
from .samples import DataError, ObservationSet, from_pairs, from_raw_triples

PAIR_HEADER = ("y", "z")
TRIPLE_HEADER = ("x1", "x2", "v3")
CURVE_HEADER = ("t", "value")
STEP_HEADER = ("breakpoint", "level")
STEP_COMMENT = ("# right-continuous: level holds on [breakpoint, next breakpoint); "
                "the last level holds beyond the last breakpoint")
REPORT_KEYS = ("config", "seed", "per_n", "slope", "slope_stderr", "version")


class FormatError(DataError):
    """Malformed file; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        where = path or "input"
        if line is not None:
            where = f"{where}, line {line}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.path = path


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_rows(path: str, header, rows, comment: Optional[str] = None) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        if comment:
            fh.write(comment + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _read_table(path: str) -> tuple[tuple[str, ...], np.ndarray, list[int]]:
    header = None
    rows, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            tokens = [t.strip() for t in text.split(",")]
            if header is None:
                if _all_numeric(tokens):
                    raise FormatError("missing header line", lineno, path)
                header = tuple(t.lower() for t in tokens)
                continue
            if len(tokens) != len(header):
                raise FormatError(f"expected {len(header)} fields, got {len(tokens)}", lineno, path)
            try:
                rows.append([float(t) for t in tokens])
            except ValueError:
                raise FormatError(f"non-numeric field in {text!r}", lineno, path) from None
            lines.append(lineno)
    if header is None:
        raise FormatError("empty file", None, path)
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, table, lines


def _all_numeric(tokens) -> bool:
    try:
        [float(t) for t in tokens]
    except ValueError:
        return False
    return True


def write_observations(path: str, obs: ObservationSet) -> None:
    _write_rows(path, PAIR_HEADER, zip(obs.y, obs.z))


def write_triples(path: str, x1, x2, v3) -> None:
    _write_rows(path, TRIPLE_HEADER, zip(x1, x2, v3))


def read_observations(path: str) -> ObservationSet:
    """Read pairs or triples, detected by the number of header fields."""
    header, table, lines = _read_table(path)
    if not lines:
        raise FormatError("no data rows", None, path)
    try:
        if len(header) == 2:
            return from_pairs(table)
        if len(header) == 3:
            return from_raw_triples(table)
    except DataError as exc:
        row = getattr(exc, "row", None)
        line = lines[row] if row is not None and row < len(lines) else None
        raise FormatError(str(exc).split(": ", 1)[-1], line, path) from None
    raise FormatError(f"header must have 2 (y,z) or 3 (x1,x2,v3) fields, got {len(header)}",
                      None, path)


def read_triples(path: str) -> np.ndarray:
    header, table, _ = _read_table(path)
    if len(header) != 3:
        raise FormatError("expected x1,x2,v3 columns", None, path)
    return table


def write_curve(path: str, t, values) -> None:
    t = np.asarray(t, dtype=float)
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise DataError("curve abscissae must be strictly increasing")
    _write_rows(path, CURVE_HEADER, zip(t, np.asarray(values, dtype=float)))


def read_curve(path: str) -> tuple[np.ndarray, np.ndarray]:
    header, table, lines = _read_table(path)
    if header != CURVE_HEADER:
        raise FormatError(f"expected header {','.join(CURVE_HEADER)}", None, path)
    bad = np.flatnonzero(np.diff(table[:, 0]) <= 0)
    if bad.size:
        raise FormatError("t must be strictly increasing", lines[bad[0] + 1], path)
    return table[:, 0].copy(), table[:, 1].copy()


def write_step(path: str, step: StepFunction) -> None:
    _write_rows(path, STEP_HEADER, zip(step.breakpoints, step.levels), comment=STEP_COMMENT)


def read_step(path: str) -> StepFunction:
    header, table, _ = _read_table(path)
    if header != STEP_HEADER:
        raise FormatError(f"expected header {','.join(STEP_HEADER)}", None, path)
    try:
        return StepFunction(table[:, 0], table[:, 1])
    except ValueError as exc:
        raise FormatError(str(exc), None, path) from None


def write_majorant(path: str, m: ConcaveMajorant) -> None:
    """Knots and values as a curve file; the terminal value is the last value."""
    write_curve(path, m.knots, m.values)


def read_majorant(path: str) -> ConcaveMajorant:
    t, v = read_curve(path)
    return ConcaveMajorant(t, v, float(v[-1]))


def write_report(path: str, report: dict[str, Any]) -> None:
    missing = [k for k in REPORT_KEYS if k not in report]
    if missing:
        raise DataError(f"report is missing keys {missing}")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_report(path: str) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        try:
            report = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(exc.msg, exc.lineno, path) from None
    missing = [k for k in REPORT_KEYS if k not in report]
    if missing:
        raise FormatError(f"report is missing keys {missing}", None, path)
    for i, row in enumerate(report["per_n"]):
        for key in ("n", "median", "q10", "q90"):
            if key not in row:
                raise FormatError(f"per_n[{i}] lacks {key!r}", None, path)
    return report
