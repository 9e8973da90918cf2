"""Plummer sphere with squared line-of-sight velocity as the response.

Joint density of position ``x`` (radius ``r``) and ``z = V_3^2``::

    c0 / (beta^5 sqrt(z)) * [a(r) - z/2]_+^(9/2),   a(r) = beta / sqrt(1 + r^2/3)

so that ``z | r`` is ``2 a(r) Beta(1/2, 11/2)`` and the radius has CDF
``r^3 / (r^2 + 3)^(3/2)``. Closed forms are used where they exist; the
remaining ground truth comes from adaptive quadrature with ``s^2``
substitutions at square-root endpoint singularities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .samples import DataError, NumericError, ObservationSet

DENSITY_EXPONENT = 4.5
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10


class QuadratureError(NumericError):
    """Adaptive quadrature did not converge; ``residual`` is its error estimate."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (error estimate {residual:.3g})")
        self.residual = residual


def quad(f: Callable[[float], float], a: float, b: float, *, epsabs: float = QUAD_EPSABS,
         epsrel: float = QUAD_EPSREL, limit: int = 200, what: str = "integral") -> float:
    """scipy ``quad`` that raises :class:`QuadratureError` instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
        except integrate.IntegrationWarning:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit)
            if err > max(epsabs, epsrel * abs(val)) * 100:
                raise QuadratureError(f"{what} did not converge", err) from None
    return val


def abel_transform(f: Callable[[float], float], y: float, upper: float = math.inf,
                   scale: float = 10.0) -> float:
    """``pi * int_y^upper f(x) / sqrt(x - y) dx``, via ``x = y + s^2``.

    The s-range is split at ``scale`` and then at decades beyond it, so
    long power-law tails do not starve the core.
    """
    top = math.sqrt(upper - y) if math.isfinite(upper) else math.inf
    h = lambda s: f(y + s * s)  # noqa: E731
    if top <= scale:
        return 2.0 * math.pi * quad(h, 0.0, top, what="Abel transform")
    total = quad(h, 0.0, scale, what="Abel transform")
    lo = scale
    while lo < top:
        # an infinite range ends with one mapped piece after a few decades
        last = top <= 10.0 * lo or (math.isinf(top) and lo >= 1e3 * scale)
        hi = top if last else 10.0 * lo
        total += quad(h, lo, hi, what="Abel tail")
        lo = hi
    return 2.0 * math.pi * total


def _nonneg(value: float, name: str) -> float:
    value = float(value)
    if not value >= 0:
        raise DataError(f"{name} must be nonnegative, got {value!r}")
    return value


@dataclass(frozen=True)
class PlummerModel:
    beta: float = 200.0
    c0: float = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise DataError(f"beta must be positive, got {self.beta!r}")
        object.__setattr__(self, "c0", 1.0 / self._mass(1.0))

    def _mass(self, c0: float) -> float:
        # radial shell 4 pi r^2 times the z-marginal, z = s^2
        def shell(r):
            a = self.a(r)
            inner = quad(lambda s: 2.0 * (a - 0.5 * s * s) ** DENSITY_EXPONENT,
                         0.0, math.sqrt(2.0 * a), what="z marginal")
            return 4.0 * math.pi * r * r * c0 * inner / self.beta ** 5
        return quad(shell, 0.0, math.inf, what="normalization")

    def a(self, r):
        """Upper half-range of z at radius r: ``beta / sqrt(1 + r^2/3)``."""
        return self.beta / np.sqrt(1.0 + np.square(r) / 3.0)

    def density(self, x: float, z: float) -> float:
        """Joint density of (position, z) at squared radius ``x``."""
        if z <= 0:
            return 0.0
        a = self.beta / math.sqrt(1.0 + x / 3.0)
        gap = a - 0.5 * z
        if gap <= 0:
            return 0.0
        return self.c0 / (self.beta ** 5 * math.sqrt(z)) * gap ** DENSITY_EXPONENT

    def z_moment(self, x: float, power: float) -> float:
        """``int z^power density(x, z) dz`` by quadrature (``z = w^2``)."""
        a = self.beta / math.sqrt(1.0 + x / 3.0)
        const = self.c0 / self.beta ** 5

        def f(w):
            return 2.0 * w ** (2.0 * power) * const * max(a - 0.5 * w * w, 0.0) ** DENSITY_EXPONENT
        return quad(f, 0.0, math.sqrt(2.0 * a), what="z moment")

    def g_density(self, y: float, z: float) -> float:
        """Density of (Y, Z): ``pi int_y^inf density(x, z) / sqrt(x - y) dx``."""
        if z <= 0 or z >= 2.0 * self.a(math.sqrt(y)):
            return 0.0
        x_top = 3.0 * ((2.0 * self.beta / z) ** 2 - 1.0)
        return abel_transform(lambda x: self.density(x, z), y, upper=x_top,
                              scale=3.0 * math.sqrt(3.0 + y))

    def abel_moment(self, y: float, power: float) -> float:
        """``int z^power g(y, z) dz`` as a double quadrature."""
        z_top = 2.0 * float(self.a(math.sqrt(y)))

        def f(w):
            z = w * w
            if z <= 0:
                return 0.0
            return 2.0 * w ** (2.0 * power + 1.0) * self.g_density(y, z)
        return quad(f, 0.0, math.sqrt(z_top), epsrel=1e-9, what="outer z integral")


def psi_true(model: PlummerModel, y):
    """``sqrt(3) pi beta / 48 * (1 + y/3)^-2``."""
    y = _check_array(y, "y")
    return math.sqrt(3.0) * math.pi * model.beta / 48.0 / (1.0 + y / 3.0) ** 2


def u_true(model: PlummerModel, y):
    """Integral of :func:`psi_true` from 0 to y."""
    y = _check_array(y, "y")
    return math.sqrt(3.0) * math.pi * model.beta / 48.0 * 3.0 * y / (3.0 + y)


def psi_prime_true(model: PlummerModel, y):
    y = _check_array(y, "y")
    return -math.sqrt(3.0) * math.pi * model.beta / 72.0 / (1.0 + y / 3.0) ** 3


def phi_true(model: PlummerModel, x):
    """``int z density(x, z) dz`` in closed form, equal to ``-psi'(x) / pi^2``."""
    return -psi_prime_true(model, x) / math.pi ** 2


def rho_marginal(model: PlummerModel, r: float) -> float:
    """Marginal density of position at radius r, by quadrature over z."""
    r = _nonneg(r, "r")
    return model.z_moment(r * r, 0.0)


def ez_given_r(model: PlummerModel, r):
    """``beta / (6 sqrt(1 + r^2/3))``."""
    r = _check_array(r, "r")
    return model.beta / (6.0 * np.sqrt(1.0 + r * r / 3.0))


def sigma2_true(model: PlummerModel, x: float) -> float:
    """``int z^2 g(x, z) dz`` by double quadrature."""
    return model.abel_moment(_nonneg(x, "x"), 2.0)


def psi_lower_true(model: PlummerModel, y: float) -> float:
    """``int z g(y, z) dz`` by double quadrature."""
    return model.abel_moment(_nonneg(y, "y"), 1.0)


def radial_cdf(r):
    r = np.asarray(r, dtype=float)
    return r ** 3 / (r * r + 3.0) ** 1.5


def _check_array(v, name):
    arr = np.asarray(v, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DataError(f"{name} must be nonnegative")
    return arr[()] if arr.ndim == 0 else arr


@dataclass(frozen=True)
class GroundTruth:
    tag: str
    grid: np.ndarray
    values: np.ndarray


_TRUTH = {
    "psi": psi_true,
    "u": u_true,
    "psi_prime": psi_prime_true,
    "phi": phi_true,
    "ez_given_r": ez_given_r,
    "sigma2": lambda m, g: np.array([sigma2_true(m, x) for x in np.atleast_1d(g)]),
}


def ground_truth(model: PlummerModel, tag: str, grid) -> GroundTruth:
    if tag not in _TRUTH:
        raise KeyError(f"unknown ground-truth tag {tag!r}; choose from {sorted(_TRUTH)}")
    grid = np.asarray(grid, dtype=float)
    return GroundTruth(tag, grid, np.asarray(_TRUTH[tag](model, grid), dtype=float))


@dataclass(frozen=True)
class RawDraws:
    r: np.ndarray
    z: np.ndarray
    sign: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    @property
    def v3(self) -> np.ndarray:
        return self.sign * np.sqrt(self.z)


def sample(model: PlummerModel, n: int, rng: np.random.Generator) -> tuple[ObservationSet, RawDraws]:
    """Draw n stars; returns the (y, z) sample and the raw draws.

    The stream is consumed in a fixed order independent of ``beta``, so two
    models sharing a seed produce the same radii and projections.
    """
    n = int(n)
    if n < 1:
        raise DataError(f"n must be positive, got {n}")
    p = rng.random(n)
    w = rng.uniform(-1.0, 1.0, n)
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    g1 = rng.standard_gamma(0.5, n)
    g2 = rng.standard_gamma(5.5, n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)

    with np.errstate(divide="ignore"):
        r = math.sqrt(3.0) / np.sqrt(p ** (-2.0 / 3.0) - 1.0)
    b = g1 / (g1 + g2)
    z = 2.0 * model.a(r) * b
    y = r * r * (1.0 - w * w)
    rad = np.sqrt(y)
    x1, x2 = rad * np.cos(theta), rad * np.sin(theta)
    obs = ObservationSet(y, z, z_bound=2.0 * model.beta)
    return obs, RawDraws(r, z, sign, x1, x2)


def replication_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for (master_seed, *keys), e.g. (seed, n, replication)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))
