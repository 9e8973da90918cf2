"""Kernel smoothing of the naive and isotonic estimates of Psi and Psi'.

Both sources are extended to t < 0 by their value at 0 before smoothing.

For a step-function source the integrals are exact sums over jumps using the
kernel's antiderivative. For the naive source each observation contributes
``int K(u) (v - u)^(-1/2) du`` with ``v = (Y_i - x)/b``; substituting
``u = v - s^2`` removes the singularity and leaves a polynomial in ``s`` for
polynomial kernels, which Gauss-Legendre integrates exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import lcm
from .lcm import StepFunction
from .naive import NaiveCurve
from .plummer import quad
from .samples import DataError, NumericError, ObservationSet

Source = Union[NaiveCurve, StepFunction]


class DegenerateDenominatorError(NumericError):
    """The unit-response estimate in a ratio fell to or below the floor."""


def _poly(coefs):
    p = np.polynomial.Polynomial(coefs)
    return p, p.deriv(), p.deriv(2), p.integ(lbnd=-1)


# coefficients in u on [-1, 1]
_KERNELS = {
    # (35/32)(1 - u^2)^3
    "triweight": np.array([1, 0, -3, 0, 3, 0, -1]) * 35.0 / 32.0,
    # (15/16)(1 - u^2)^2
    "biweight": np.array([1, 0, -2, 0, 1]) * 15.0 / 16.0,
}


@dataclass(frozen=True)
class KernelSpec:
    """Polynomial kernel supported on [-1, 1] with bandwidth ``bandwidth``."""

    bandwidth: float
    name: str = "triweight"

    def __post_init__(self):
        b = float(self.bandwidth)
        if not (math.isfinite(b) and b > 0):
            raise DataError(f"bandwidth must be positive, got {self.bandwidth!r}")
        if self.name not in _KERNELS:
            raise DataError(f"unknown kernel {self.name!r}; choose from {sorted(_KERNELS)}")
        object.__setattr__(self, "bandwidth", b)
        k, dk, d2k, cum = _poly(_KERNELS[self.name])
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_dk", dk)
        object.__setattr__(self, "_d2k", d2k)
        object.__setattr__(self, "_cum", cum)

    @property
    def degree(self) -> int:
        return len(_KERNELS[self.name]) - 1

    def _inside(self, u, p):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1.0, p(np.clip(u, -1.0, 1.0)), 0.0)

    def K(self, u):
        return self._inside(u, self._k)

    def dK(self, u):
        return self._inside(u, self._dk)

    def d2K(self, u):
        return self._inside(u, self._d2k)

    def cdf(self, u):
        """``int_{-1}^u K``, clipped to 0 and 1 outside the support."""
        u = np.asarray(u, dtype=float)
        return np.where(u <= -1.0, 0.0, np.where(u >= 1.0, 1.0, self._cum(np.clip(u, -1.0, 1.0))))

    def with_bandwidth(self, b: float) -> "KernelSpec":
        return KernelSpec(b, self.name)


def _check_order(order: int) -> int:
    if order not in (0, 1):
        raise DataError(f"derivative order must be 0 or 1, got {order!r}")
    return order


def _step_smooth(step: StepFunction, k: KernelSpec, x: np.ndarray, order: int) -> np.ndarray:
    b = k.bandwidth
    u = (step.breakpoints[None, 1:] - x[:, None]) / b
    jumps = step.jumps[None, :]
    if order == 0:
        return step.levels[0] + np.sum(jumps * (1.0 - k.cdf(u)), axis=1)
    return np.sum(jumps * k.K(u), axis=1) / b


def _naive_smooth(curve: NaiveCurve, k: KernelSpec, x: np.ndarray, order: int) -> np.ndarray:
    b = k.bandwidth
    nodes, weights = np.polynomial.legendre.leggauss(k.degree + 2)
    kern = k.K if order == 0 else k.dK
    out = np.empty(x.size)
    for j, xj in enumerate(x):
        u_lo = max(-1.0, -xj / b)
        acc = 0.0
        if u_lo > -1.0:
            # t < 0, where the naive estimate is held at its value at 0
            acc += curve.psi0 * (float(k.cdf(u_lo)) if order == 0 else -float(k.K(u_lo)) / b)
        v = (curve.y - xj) / b
        live = v > u_lo
        if u_lo < 1.0 and live.any():
            vv = v[live]
            s_lo = np.sqrt(np.maximum(vv - 1.0, 0.0))
            s_hi = np.sqrt(vv - u_lo)
            mid, half = 0.5 * (s_hi + s_lo), 0.5 * (s_hi - s_lo)
            s = mid[:, None] + half[:, None] * nodes[None, :]
            integ = 2.0 * (kern(vv[:, None] - s * s) @ weights) * half
            total = float(np.dot(curve.z[live], integ)) / curve.n
            acc += total / math.sqrt(b) if order == 0 else -total / math.sqrt(b) / b
        out[j] = acc
    return out


def _by_parts(curve: NaiveCurve, k: KernelSpec, xj: float, order: int) -> float:
    # order 0: -(1/b^2) int K'((t-x)/b) U(t) dt;  order 1: (1/b^3) int K''((t-x)/b) U(t) dt
    b = k.bandwidth
    lo, hi = xj - b, xj + b
    pts = [p for p in curve.y if lo < p < hi]
    if lo < 0.0 < hi:
        pts.append(0.0)
    kern = k.dK if order == 0 else k.d2K

    def f(t):
        return float(kern((t - xj) / b)) * float(curve.u(t))

    edges = np.concatenate(([lo], np.sort(pts), [hi]))
    total = sum(quad(f, a, c, epsabs=1e-13, epsrel=1e-11, what="by-parts integral")
                for a, c in zip(edges[:-1], edges[1:]))
    return -total / b ** 2 if order == 0 else total / b ** 3


def _smooth(source: Source, k: KernelSpec, x, order: int, method: str):
    _check_order(order)
    if isinstance(source, ObservationSet):
        source = NaiveCurve(source)
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    if isinstance(source, StepFunction):
        vals = _step_smooth(source, k, flat, order)
    elif method == "exact":
        vals = _naive_smooth(source, k, flat, order)
    elif method == "by_parts":
        vals = np.array([_by_parts(source, k, xj, order) for xj in flat])
    else:
        raise ValueError(f"unknown method {method!r}")
    vals = vals.reshape(x.shape)
    return vals[()] if x.ndim == 0 else vals


def smooth_psi(source: Source, k: KernelSpec, x, method: str = "exact"):
    """Kernel estimate of Psi at x from a naive curve or an isotonic step function."""
    return _smooth(source, k, x, 0, method)


def smooth_psi_prime(source: Source, k: KernelSpec, x, method: str = "exact"):
    """Kernel estimate of Psi' at x: ``-(1/b^2) int K'((t-x)/b) source(t) dt``."""
    return _smooth(source, k, x, 1, method)


def phi_hat(source: Source, k: KernelSpec, x, method: str = "exact"):
    return -smooth_psi_prime(source, k, x, method) / math.pi ** 2


@dataclass(frozen=True)
class SmoothCurve:
    source: str
    order: int
    grid: np.ndarray
    values: np.ndarray


def smooth_curve(source: Source, k: KernelSpec, grid, order: int = 0) -> SmoothCurve:
    tag = "isotonic" if isinstance(source, StepFunction) else "naive"
    grid = np.asarray(grid, dtype=float)
    return SmoothCurve(tag, order, grid, np.asarray(_smooth(source, k, grid, order, "exact")))


def isotonic_step_near(obs: ObservationSet | NaiveCurve, a: float, b: float) -> StepFunction:
    """Isotonic estimate that is exact on [a, b] (localized for large samples)."""
    curve = obs if isinstance(obs, NaiveCurve) else NaiveCurve(obs)
    return lcm.isotonic_psi(lcm.majorant_for(curve, a, b))


def conditional_mean_z(sample_with_z: ObservationSet, sample_unit_z: ObservationSet,
                       k: KernelSpec, x: float, source: str = "isotonic",
                       floor: float = 1e-12) -> float:
    """``E(Z | X = x)`` as a ratio of two estimates of phi.

    The denominator uses the unit-response sample, whose phi is the position
    density at radius ``sqrt(x)``.
    """
    x = float(x)
    if not x > 0:
        raise DataError(f"x must be positive, got {x!r}")
    b = k.bandwidth

    def estimate(obs):
        if source == "isotonic":
            src = isotonic_step_near(obs, max(x - b, 0.0), x + b)
        elif source == "naive":
            src = NaiveCurve(obs)
        else:
            raise DataError(f"unknown source {source!r}")
        return float(phi_hat(src, k, x))

    den = estimate(sample_unit_z)
    if not den > floor:
        raise DegenerateDenominatorError(
            f"unit-response estimate {den!r} at x={x!r} is not above the floor {floor!r}")
    return estimate(sample_with_z) / den


def velocity_dispersion(sample_with_z: ObservationSet, sample_unit_z: ObservationSet,
                        k: KernelSpec, r: float, **kw) -> float:
    """``sqrt(3 E(V_3^2 | R = r))`` under isotropy."""
    return math.sqrt(3.0 * conditional_mean_z(sample_with_z, sample_unit_z, k, float(r) ** 2, **kw))
