"""Least concave majorant of ``u_naive`` and the isotonized estimator.

Between consecutive observations ``u_naive`` is convex (each active term
``-sqrt(Y_i - x)`` is), and it is constant beyond the largest observation.
The least concave majorant of the whole function is therefore the upper
hull of its values at 0 and at the distinct observations, followed by a
flat tail. Its right derivative is the isotonic estimate of Psi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .naive import NaiveCurve

SLOPE_RTOL = 1e-12
SUP_GAP_TOL = 1e-9
SUP_GAP_MAX_ITER = 200


@dataclass(frozen=True, eq=False)
class ConcaveMajorant:
    """Piecewise-linear concave function, ``terminal`` beyond the last knot.

    For a majorant of a restriction (see :func:`least_concave_majorant`)
    ``knots[0]`` is the left end of the window rather than 0.
    """

    knots: np.ndarray
    values: np.ndarray
    terminal: float

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape or k.size == 0:
            raise ValueError("knots and values must be equal-length 1-d arrays")
        if np.any(np.diff(k) <= 0):
            raise ValueError("knots must be strictly increasing")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def __call__(self, t):
        return majorant_value(self, t)


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous step function.

    ``levels[j]`` holds on ``[breakpoints[j], breakpoints[j+1])``; the last
    level holds from the last breakpoint on, and the first level is also
    used for every t below the first breakpoint.
    """

    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        lv = np.asarray(self.levels, dtype=float)
        if b.ndim != 1 or b.shape != lv.shape or b.size == 0:
            raise ValueError("breakpoints and levels must be equal-length 1-d arrays")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "levels", lv)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.breakpoints, t, side="right") - 1
        out = self.levels[np.clip(j, 0, None)]
        return out[()] if t.ndim == 0 else out

    @property
    def jumps(self) -> np.ndarray:
        """``levels[j] - levels[j-1]`` at ``breakpoints[1:]``."""
        return np.diff(self.levels)

    def is_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.levels) <= 0))


def _hull(ts: np.ndarray, vs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx = _kernels.upper_hull(ts, vs, SLOPE_RTOL)
    return ts[idx], vs[idx]


def least_concave_majorant(curve: NaiveCurve, lo: Optional[float] = None,
                           hi: Optional[float] = None) -> ConcaveMajorant:
    """Least concave majorant of ``u_naive``.

    With ``lo``/``hi`` given, returns the majorant of the restriction of
    ``u_naive`` to ``[lo, hi]`` instead; it only needs ``u_naive`` at the
    observations inside the window.
    """
    if lo is None and hi is None:
        ts, vs = curve.knots, curve.knot_values()
        terminal = curve.terminal
    else:
        lo = 0.0 if lo is None else max(float(lo), 0.0)
        hi = curve.y_max if hi is None else min(float(hi), curve.y_max)
        if not lo < hi:
            raise ValueError("restriction window must satisfy lo < hi <= max(y)")
        inner = curve.knots[(curve.knots > lo) & (curve.knots < hi)]
        ts = np.concatenate(([lo], inner, [hi]))
        vs = np.concatenate((curve.u([lo]), curve.knot_values_at(inner), curve.u([hi])))
        terminal = float(vs[-1])
    hk, hv = _hull(ts, vs)
    # the flat tail starts at the first knot reaching the terminal value
    while hk.size > 1 and hv[-2] >= terminal:
        hk, hv = hk[:-1], hv[:-1]
    return ConcaveMajorant(hk, hv, float(terminal))


def majorant_value(m: ConcaveMajorant, t):
    """Evaluate a majorant; the first segment's slope is used for t < knots[0]."""
    t = np.asarray(t, dtype=float)
    out = np.interp(t, m.knots, m.values, right=m.terminal)
    if m.knots.size > 1:
        left = t < m.knots[0]
        if np.any(left):
            s0 = m.slopes[0]
            out = np.where(left, m.values[0] + s0 * (t - m.knots[0]), out)
    return out[()] if t.ndim == 0 else out


def isotonic_psi(m: ConcaveMajorant) -> StepFunction:
    """Right derivative of the majorant, 0 past the last knot."""
    return StepFunction(m.knots, np.concatenate((m.slopes, [0.0])))


def isotonic_estimate(obs) -> StepFunction:
    """Convenience: isotonic estimate of Psi straight from a sample."""
    curve = obs if isinstance(obs, NaiveCurve) else NaiveCurve(obs)
    return isotonic_psi(least_concave_majorant(curve))


def touch_points(m: ConcaveMajorant) -> np.ndarray:
    """Knots of a majorant built from a point set; each is a contact point."""
    return m.knots


def grid_lcm_oracle(ts, vs) -> np.ndarray:
    """LCM of the piecewise-linear interpolant of ``(ts, vs)``, evaluated at ``ts``.

    Gift wrapping: from the current vertex, step to the point of largest
    chord slope (farthest on ties). Quadratic in the worst case; meant as a
    test oracle independent of the monotone chain used elsewhere.
    """
    ts = np.asarray(ts, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if ts.size < 2 or ts.shape != vs.shape:
        raise ValueError("need at least two points")
    if np.any(np.diff(ts) <= 0):
        raise ValueError("ts must be strictly increasing")
    hull = [0]
    i = 0
    last = ts.size - 1
    while i < last:
        slopes = (vs[i + 1:] - vs[i]) / (ts[i + 1:] - ts[i])
        best = slopes.max()
        j = i + 1 + int(np.flatnonzero(slopes >= best)[-1])
        hull.append(j)
        i = j
    return np.interp(ts, ts[hull], vs[hull])


def sup_gap(curve: NaiveCurve, m: ConcaveMajorant, t0: float, t1: float,
            tol: float = SUP_GAP_TOL) -> float:
    """``sup_{t0 <= t <= t1} (majorant - u_naive)`` to absolute tolerance ``tol``.

    ``m`` must coincide with the least concave majorant on ``[t0, t1]``. The
    gap is concave between consecutive observations, so each interval is
    bounded by its tangent at the left end and only intervals whose bound
    can beat the running maximum are searched.
    """
    t0, t1 = float(t0), float(t1)
    if not 0 <= t0 < t1:
        raise ValueError("need 0 <= t0 < t1")
    top = min(t1, curve.y_max)
    if t0 >= top:
        return 0.0
    inner = curve.knots[(curve.knots > t0) & (curve.knots < top)]
    bounds = np.concatenate(([t0], inner, [top]))
    uvals = np.concatenate((curve.u([t0]), curve.knot_values_at(inner), curve.u([top])))
    gaps = np.asarray(majorant_value(m, bounds)) - uvals
    lo, hi = bounds[:-1], bounds[1:]
    seg = np.clip(np.searchsorted(m.knots, lo, side="right") - 1, 0, m.knots.size - 1)
    slopes = np.concatenate((m.slopes, [0.0]))[seg]
    best = max(float(gaps.max()), 0.0)
    # U_n^# is nondecreasing, so the gap grows at most like the majorant
    weak = gaps[:-1] + np.maximum(slopes, 0.0) * (hi - lo)
    order = np.argsort(-weak)
    ys, zs, prefix, n = curve.y, curve.z, curve._prefix, float(curve.n)
    for j in order:
        if weak[j] - best <= tol:
            break
        d = slopes[j] - _kernels.psi_sum(ys, zs, lo[j]) / n
        if gaps[j] + max(d, 0.0) * (hi[j] - lo[j]) - best <= tol:
            continue
        k = seg[j]
        val = _kernels.interval_sup(ys, zs, prefix, n, lo[j], hi[j], slopes[j],
                                    m.knots[k], m.values[k], gaps[j], d, gaps[j + 1],
                                    tol, SUP_GAP_MAX_ITER)
        best = max(best, val)
    return float(best)


class LocalizationError(RuntimeError):
    """A restricted majorant could not be certified to match the global one."""


def _outward_grid(edge: float, far: float, first: float, steps: int) -> np.ndarray:
    """Points from ``edge`` to ``far`` with geometrically growing gaps, the first ``first``."""
    span = abs(far - edge)
    d = np.geomspace(min(first, span), span, steps)
    return np.unique(np.concatenate(([edge, far], edge + np.sign(far - edge) * d)))


def _outside_values(curve: NaiveCurve, lo: float, hi: float, steps: int):
    """``u_naive`` on grids left of ``lo`` and right of ``hi``, finest next to the
    window, where the margin is smallest. ``None`` for an empty side."""
    first = 1e-3 * (hi - lo)
    left = right = None
    if lo > 0:
        g = _outward_grid(lo, 0.0, first, steps)
        left = (g, curve.u(g))
    if hi < curve.y_max:
        g = _outward_grid(hi, curve.y_max, first, steps)
        right = (g, curve.u(g))
    return left, right


def _certified_slope_range(p: float, up: float, left, right, s_left: float,
                           s_right: float) -> bool:
    """Is some line through (p, u_naive(p)) with slope in [s_right, s_left]
    above ``u_naive`` outside the window? Uses monotone bounds on each grid cell."""
    upper, lower = s_left, s_right
    if left is not None:
        g, ug = left
        # t in [g_j, g_{j+1}]: (u(p) - u(t)) / (p - t) >= (u(p) - u(g_{j+1})) / (p - g_j)
        upper = min(upper, float(np.min((up - ug[1:]) / (p - g[:-1]))))
    if right is not None:
        g, ug = right
        num = ug[1:] - up
        den = np.where(num >= 0, g[:-1] - p, g[1:] - p)
        lower = max(lower, float(np.max(num / den)))
    return lower <= upper


def localized_majorant(curve: NaiveCurve, a: float, b: float, pad: float = 0.1,
                       steps: int = 300, max_doublings: int = 12) -> ConcaveMajorant:
    """Majorant that agrees with the global least concave majorant on [a, b].

    Builds the majorant of ``u_naive`` restricted to a window around
    ``[a, b]``, then certifies that hull knots ``x0 <= a`` and ``x1 >= b``
    are contact points of the global majorant, which makes the two agree on
    ``[x0, x1]``. The window doubles until certification succeeds; once it
    covers every observation the global majorant is returned.
    """
    a, b = max(float(a), 0.0), float(b)
    for _ in range(max_doublings):
        lo, hi = max(a - pad, 0.0), b + pad
        if lo == 0.0 and hi >= curve.y_max:
            return least_concave_majorant(curve)
        m = least_concave_majorant(curve, lo, hi)
        k, v = m.knots, m.values
        s = m.slopes
        left = np.flatnonzero(k <= a)
        right = np.flatnonzero(k >= b)
        ok = left.size > 0 and right.size > 0
        if ok:
            i0, i1 = int(left[-1]), int(right[0])
            # window ends are genuine contacts only at 0 or at max(y)
            if i0 == 0 and lo > 0:
                ok = False
            if i1 == k.size - 1 and hi < curve.y_max:
                ok = False
        if ok:
            outside = None
            for i in {i0, i1}:
                if k[i] == 0.0 or k[i] >= curve.y_max:
                    continue
                if outside is None:
                    outside = _outside_values(curve, lo, min(hi, curve.y_max), steps)
                s_left = s[i - 1] if i > 0 else np.inf
                s_right = s[i] if i < s.size else 0.0
                if not _certified_slope_range(k[i], v[i], *outside, s_left, s_right):
                    ok = False
                    break
        if ok:
            sl = slice(i0, i1 + 1)
            terminal = curve.terminal if k[i1] >= curve.y_max else float(v[i1])
            return ConcaveMajorant(k[sl], v[sl], terminal)
        pad *= 2.0
    raise LocalizationError(f"could not certify a local majorant on [{a}, {b}]")


def majorant_for(curve: NaiveCurve, a: float, b: float, global_below: int = 6000) -> ConcaveMajorant:
    """Majorant exact on [a, b]: global for small samples, localized otherwise."""
    if curve.n <= global_below:
        return least_concave_majorant(curve)
    return localized_majorant(curve, a, b)

