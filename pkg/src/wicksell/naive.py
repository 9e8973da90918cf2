"""Unbiased but non-monotone estimators of Psi and its integral U.

For a sample ``(Y_i, Z_i)`` of size n,

    psi_naive(y) = (1/n) sum_{Y_i > y} Z_i / sqrt(Y_i - y)
    u_naive(x)   = (1/n) sum_i 2 Z_i (sqrt(Y_i) - sqrt((Y_i - x)_+))

``u_naive`` is the integral of ``psi_naive`` from 0. Both are extended to
negative arguments by holding ``psi_naive`` at its value at 0.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from . import _kernels
from .samples import DataError, ObservationSet


def contribution(t, y, z):
    """Per-observation term ``2 z (sqrt(y) - sqrt((y - t)_+))`` of ``n * u_naive(t)``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(y < 0) or np.any(z < 0):
        raise DataError("contribution needs y >= 0 and z >= 0")
    t = np.asarray(t, dtype=float)
    out = 2.0 * z * (np.sqrt(y) - np.sqrt(np.maximum(y - t, 0.0)))
    return out[()] if out.ndim == 0 else out


class NaiveCurve:
    """Naive estimators over a fixed :class:`ObservationSet`.

    Evaluation is O(n) per point. Values of ``u_naive`` at the distinct
    observation knots are computed once on demand (``knot_values``), which is
    the O(n^2) step behind the global least concave majorant.
    """

    def __init__(self, source: ObservationSet):
        self.source = source
        self.n = source.n
        self._y = source.y
        self._z = source.z
        self._prefix = _kernels.prefix_root_sums(self._y, self._z)

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def z(self) -> np.ndarray:
        return self._z

    @property
    def y_max(self) -> float:
        return float(self._y[-1])

    @property
    def terminal(self) -> float:
        """Flat value of ``u_naive`` beyond the largest observation."""
        return float(self._prefix[-1] / self.n)

    @cached_property
    def psi0(self) -> float:
        return float(_kernels.psi_sum(self._y, self._z, 0.0) / self.n)

    @cached_property
    def knots(self) -> np.ndarray:
        """0 followed by the distinct positive observation values."""
        k = np.unique(self._y)
        if k[0] > 0:
            k = np.concatenate(([0.0], k))
        return k

    def psi(self, y):
        """``psi_naive``; a term with ``Y_i == y`` is dropped, so values are finite."""
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y).ravel()
        vals = _kernels.psi_sum_many(self._y, self._z, np.maximum(flat, 0.0)) / self.n
        vals = vals.reshape(y.shape)
        return vals[()] if y.ndim == 0 else vals

    def u(self, x):
        """``u_naive``, linear with slope ``psi_naive(0)`` for x < 0."""
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        vals = _kernels.u_sum_many(self._y, self._z, self._prefix, np.maximum(flat, 0.0)) / self.n
        neg = flat < 0
        if neg.any():
            vals[neg] = flat[neg] * self.psi0
        vals = vals.reshape(x.shape)
        return vals[()] if x.ndim == 0 else vals

    __call__ = psi

    def knot_values(self) -> np.ndarray:
        """``u_naive`` at every entry of :attr:`knots` (cached)."""
        return self.knot_values_at(self.knots)

    @property
    def has_knot_values(self) -> bool:
        return hasattr(self, "_kv") and not np.isnan(self._kv).any()

    def knot_values_at(self, pts) -> np.ndarray:
        """``u_naive`` at points that are entries of :attr:`knots`.

        Values are cached per knot, so overlapping requests (e.g. a growing
        window) never recompute a knot.
        """
        if not hasattr(self, "_kv"):
            self._kv = np.full(self.knots.size, np.nan)
        idx = np.searchsorted(self.knots, pts)
        todo = np.unique(idx[np.isnan(self._kv[idx])])
        if todo.size:
            self._kv[todo] = self.u(self.knots[todo])
        return self._kv[idx].copy()


def psi_naive(curve: NaiveCurve | ObservationSet, y):
    if isinstance(curve, ObservationSet):
        curve = NaiveCurve(curve)
    return curve.psi(y)


def u_naive(curve: NaiveCurve | ObservationSet, x):
    if isinstance(curve, ObservationSet):
        curve = NaiveCurve(curve)
    return curve.u(x)
