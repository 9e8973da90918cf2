"""Observation sets of (squared projected radius, response) pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


class WicksellError(Exception):
    """Base class for errors raised by this package."""


class DataError(WicksellError, ValueError):
    """Invalid input data; ``row`` is the offending 0-based row when known."""

    def __init__(self, message: str, row: Optional[int] = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class EmptyInputError(DataError):
    """No observations were supplied."""


class NumericError(WicksellError, ArithmeticError):
    """A numerical routine failed to reach its tolerance."""


@dataclass(frozen=True, eq=False)
class Observation:
    y: float
    z: float


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Sample sorted ascending by ``y``.

    Ties in ``y`` are kept as separate observations. ``z_bound`` is metadata
    only (a known upper bound on ``z``); nothing is clamped to it.
    """

    y: np.ndarray
    z: np.ndarray
    z_bound: Optional[float] = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        z = np.array(self.z, dtype=float)
        if y.ndim != 1 or y.shape != z.shape:
            raise DataError("y and z must be one-dimensional arrays of equal length")
        if y.size == 0:
            raise EmptyInputError("observation set is empty")
        _check_rows(y, z)
        # (y, z) lexicographic order makes the set independent of row order
        order = np.lexsort((z, y))
        y, z = y[order], z[order]
        if self.z_bound is not None:
            if not (np.isfinite(self.z_bound) and self.z_bound >= 0):
                raise DataError("z_bound must be finite and nonnegative")
            bad = np.flatnonzero(z > self.z_bound)
            if bad.size:
                raise DataError(f"z = {float(z[bad[0]])!r} exceeds z_bound {self.z_bound!r}")
        y.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return int(self.y.size)

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        for yi, zi in zip(self.y, self.z):
            yield Observation(float(yi), float(zi))

    def __getitem__(self, i) -> Observation:
        return Observation(float(self.y[i]), float(self.z[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservationSet):
            return NotImplemented
        return (np.array_equal(self.y, other.y) and np.array_equal(self.z, other.z)
                and self.z_bound == other.z_bound)

    def with_unit_z(self) -> "ObservationSet":
        """Density-estimation mode: every response replaced by 1."""
        return ObservationSet(self.y, np.ones_like(self.z), z_bound=1.0)

    def scaled(self, factor: float) -> "ObservationSet":
        """Copy with every response multiplied by ``factor``."""
        bound = None if self.z_bound is None else self.z_bound * factor
        return ObservationSet(self.y, self.z * factor, z_bound=bound)

    def is_bounded_by(self, bound: float) -> bool:
        return bool(np.all(self.z <= bound))


def _check_rows(y: np.ndarray, z: np.ndarray) -> None:
    finite = np.isfinite(y) & np.isfinite(z)
    if not finite.all():
        raise DataError("non-finite value", row=int(np.flatnonzero(~finite)[0]))
    neg = (y < 0) | (z < 0)
    if neg.any():
        i = int(np.flatnonzero(neg)[0])
        raise DataError(f"negative value (y={float(y[i])!r}, z={float(z[i])!r})", row=i)


def _as_table(rows: Iterable[Sequence[float]], width: int) -> np.ndarray:
    rows = list(rows)
    if not rows:
        raise EmptyInputError("no rows supplied")
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"expected {width} fields, got {len(row)}", row=i)
        try:
            out[i] = [float(v) for v in row]
        except (TypeError, ValueError) as exc:
            raise DataError(str(exc), row=i) from None
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        raise DataError("non-finite value", row=int(np.flatnonzero(bad)[0]))
    return out


def from_raw_triples(rows, z_bound: Optional[float] = None) -> ObservationSet:
    """Build a sample from projected positions and line-of-sight velocities.

    Each row ``(x1, x2, v3)`` becomes ``y = x1**2 + x2**2`` and ``z = v3**2``.
    """
    t = _as_table(rows, 3)
    return ObservationSet(t[:, 0] ** 2 + t[:, 1] ** 2, t[:, 2] ** 2, z_bound=z_bound)


def from_pairs(rows, z_bound: Optional[float] = None, unit_z: bool = False) -> ObservationSet:
    """Build a sample from ``(y, z)`` rows; ``unit_z`` replaces every z by 1."""
    t = _as_table(rows, 2)
    obs = ObservationSet(t[:, 0], t[:, 1], z_bound=z_bound)
    return obs.with_unit_z() if unit_z else obs


def with_unit_z(rows) -> ObservationSet:
    return from_pairs(rows, unit_z=True)
