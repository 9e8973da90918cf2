"""Compiled inner loops for the naive sums.

Every routine takes the observation arrays ``ys`` (sorted ascending) and
``zs``. Sums are unnormalized; callers divide by ``n``.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def _first_above(ys, x):
    # index of the first y strictly greater than x
    lo, hi = 0, ys.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if ys[mid] > x:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, fastmath=True)
def prefix_root_sums(ys, zs):
    """Cumulative sums of 2 z sqrt(y), length n + 1."""
    n = ys.shape[0]
    out = np.zeros(n + 1)
    acc = 0.0
    for i in range(n):
        acc += 2.0 * zs[i] * np.sqrt(ys[i])
        out[i + 1] = acc
    return out


@njit(cache=True, fastmath=True)
def u_sum(ys, zs, prefix, x):
    """sum_i 2 z_i (sqrt(y_i) - sqrt((y_i - x)_+)) for x >= 0."""
    k = _first_above(ys, x)
    acc = prefix[k]
    for i in range(k, ys.shape[0]):
        # stable form of sqrt(y) - sqrt(y - x)
        acc += 2.0 * zs[i] * x / (np.sqrt(ys[i]) + np.sqrt(ys[i] - x))
    return acc


@njit(cache=True, fastmath=True)
def psi_sum(ys, zs, x):
    """sum over y_i > x of z_i / sqrt(y_i - x)."""
    k = _first_above(ys, x)
    acc = 0.0
    for i in range(k, ys.shape[0]):
        acc += zs[i] / np.sqrt(ys[i] - x)
    return acc


@njit(cache=True, fastmath=True)
def u_sum_many(ys, zs, prefix, xs):
    out = np.empty(xs.shape[0])
    for j in range(xs.shape[0]):
        out[j] = u_sum(ys, zs, prefix, xs[j])
    return out


@njit(cache=True, fastmath=True)
def psi_sum_many(ys, zs, xs):
    out = np.empty(xs.shape[0])
    for j in range(xs.shape[0]):
        out[j] = psi_sum(ys, zs, xs[j])
    return out


@njit(cache=True, fastmath=True)
def upper_hull(ts, vs, rtol):
    """Indices of the upper concave hull of points sorted by t (monotone chain).

    A middle point is dropped when it lies on or below the chord of its
    neighbours, up to a relative tolerance on the slopes.
    """
    m = ts.shape[0]
    idx = np.empty(m, dtype=np.int64)
    top = 0
    for j in range(m):
        while top >= 2:
            a = idx[top - 2]
            b = idx[top - 1]
            s1 = (vs[b] - vs[a]) / (ts[b] - ts[a])
            s2 = (vs[j] - vs[b]) / (ts[j] - ts[b])
            if s2 >= s1 - rtol * max(abs(s1), abs(s2)):
                top -= 1
            else:
                break
        idx[top] = j
        top += 1
    return idx[:top].copy()


@njit(cache=True, fastmath=True)
def _gap_and_slope(ys, zs, prefix, n, x, level, t_left, v_left):
    # gap = majorant - u_naive at x, and its right derivative
    maj = v_left + level * (x - t_left)
    g = maj - u_sum(ys, zs, prefix, x) / n
    d = level - psi_sum(ys, zs, x) / n
    return g, d


@njit(cache=True, fastmath=True)
def interval_sup(ys, zs, prefix, n, lo, hi, level, t_left, v_left, g_lo, d_lo,
                 g_hi, tol, max_iter):
    """Maximum over [lo, hi] of the concave gap majorant - u_naive.

    The gap is concave on an interval free of observations, so its right
    derivative is decreasing; bisect on the sign of the derivative and stop
    once the tangent bound at the left end of the bracket certifies ``tol``.
    """
    best = max(g_lo, g_hi)
    if d_lo <= 0.0:
        return g_lo
    a, ga, da = lo, g_lo, d_lo
    b = hi
    for _ in range(max_iter):
        bound = ga + da * (b - a)
        if bound - best <= tol:
            return best
        c = 0.5 * (a + b)
        if c <= a or c >= b:
            return best
        gc, dc = _gap_and_slope(ys, zs, prefix, n, c, level, t_left, v_left)
        if gc > best:
            best = gc
        if dc > 0.0:
            a, ga, da = c, gc, dc
        else:
            b = c
    return best
