import math

import numpy as np
import pytest
from scipy import integrate

from wicksell import from_pairs, lcm, plummer
from wicksell.lcm import (ConcaveMajorant, StepFunction, grid_lcm_oracle, isotonic_psi,
                          least_concave_majorant, localized_majorant, majorant_value, sup_gap)
from wicksell.naive import NaiveCurve

from conftest import random_sample

ONE = NaiveCurve(from_pairs([(1, 1)]))
TWO = NaiveCurve(from_pairs([(1, 1), (4, 2)]))


def test_single_observation_majorant():
    m = least_concave_majorant(ONE)
    assert m.knots.tolist() == [0.0, 1.0]
    assert m.values == pytest.approx([0.0, 2.0])
    assert m.terminal == pytest.approx(2.0)
    assert majorant_value(m, 0.5) == pytest.approx(1.0)
    assert majorant_value(m, 1.0) == m.values[1]
    assert majorant_value(m, 9.0) == m.terminal
    assert majorant_value(m, -1.0) == pytest.approx(-2.0)


def test_two_observation_majorant():
    m = least_concave_majorant(TWO)
    s1, s2 = 1 + 2 * (2 - math.sqrt(3)), (5 - (1 + 2 * (2 - math.sqrt(3)))) / 3
    assert m.knots.tolist() == [0.0, 1.0, 4.0]
    assert m.values == pytest.approx([0.0, s1, 5.0])
    assert m.slopes == pytest.approx([s1, s2])
    assert s1 == pytest.approx(1.53590, abs=5e-6) and s2 == pytest.approx(1.15470, abs=5e-6)
    step = isotonic_psi(m)
    assert step(0.0) == pytest.approx(s1) and step(0.99) == pytest.approx(s1)
    assert step(1.0) == pytest.approx(s2) and step(3.9) == pytest.approx(s2)
    assert step(4.0) == 0.0 and step(100.0) == 0.0


def test_single_observation_step():
    step = isotonic_psi(least_concave_majorant(ONE))
    assert step(0.0) == pytest.approx(2.0) and step(1.0) == 0.0


def test_levels_are_chord_slopes(rng):
    m = least_concave_majorant(NaiveCurve(random_sample(rng, 60)))
    step = isotonic_psi(m)
    want = np.diff(m.values) / np.diff(m.knots)
    assert np.allclose(step.levels[:-1], want)
    assert step.levels[-1] == 0.0
    assert np.all(np.diff(step.levels) < 0)


def test_concave_chain_is_its_own_hull():
    ts = np.linspace(0, 5, 11)
    vs = np.sqrt(ts)
    assert np.allclose(grid_lcm_oracle(ts, vs), vs)
    idx = lcm._kernels.upper_hull(ts, vs, lcm.SLOPE_RTOL)
    assert idx.tolist() == list(range(11))


def test_oracle_v_shape():
    assert grid_lcm_oracle([0, 1, 2], [1, 0, 1]).tolist() == [1.0, 1.0, 1.0]


def test_oracle_rejects_bad_grid():
    with pytest.raises(ValueError):
        grid_lcm_oracle([0, 0], [1, 2])
    with pytest.raises(ValueError):
        grid_lcm_oracle([0], [1])


def test_collinear_slopes_pooled():
    ts = np.array([0.0, 1.0, 2.0, 3.0])
    vs = ts * 0.1 * 3  # exactly collinear in exact arithmetic, not in floats
    idx = lcm._kernels.upper_hull(ts, vs, lcm.SLOPE_RTOL)
    assert idx.tolist() == [0, 3]


def test_matches_oracle_on_dense_grid(rng):
    for _ in range(5):
        c = NaiveCurve(random_sample(rng, 50))
        m = least_concave_majorant(c)
        ts = np.union1d(np.linspace(0, c.y_max, 4001), c.knots)
        oracle = grid_lcm_oracle(ts, c.u(ts))
        # the oracle sees a finer polyline, so it can only sit below the exact majorant
        assert np.max(np.abs(m(ts) - oracle)) < 1e-9


def test_dominance_and_knot_equality(rng):
    c = NaiveCurve(random_sample(rng, 80, ties=True))
    m = least_concave_majorant(c)
    # dominance on t >= 0; below 0 both sides are extrapolations by convention
    ts = rng.uniform(0, c.y_max + 1, 10_000)
    assert np.all(m(ts) >= c.u(ts) - 1e-12)
    assert np.allclose(m.values, c.u(m.knots), rtol=0, atol=1e-12)
    assert m.values[0] == 0.0 and m.knots[0] == 0.0
    assert m.terminal == pytest.approx(c.terminal)
    assert np.all(np.diff(m.slopes) < 0) and m.slopes[-1] >= 0


def test_sup_gap_single_observation():
    m = least_concave_majorant(ONE)
    assert sup_gap(ONE, m, 0.0, 1.0) == pytest.approx(0.5, abs=1e-9)


def test_sup_gap_beyond_data(rng):
    c = NaiveCurve(random_sample(rng, 30))
    m = least_concave_majorant(c)
    assert sup_gap(c, m, c.y_max + 1, c.y_max + 3) == 0.0


def test_sup_gap_at_touch_point(rng):
    c = NaiveCurve(random_sample(rng, 30))
    m = least_concave_majorant(c)
    k = m.knots[2]
    assert sup_gap(c, m, k, k + 1e-12) <= 1e-9


def test_sup_gap_rejects_empty_interval():
    with pytest.raises(ValueError):
        sup_gap(ONE, least_concave_majorant(ONE), 1.0, 1.0)


def test_sup_gap_against_dense_grid(rng):
    for _ in range(5):
        c = NaiveCurve(random_sample(rng, 100))
        m = least_concave_majorant(c)
        t0, t1 = 1.0, 9.0
        got = sup_gap(c, m, t0, t1)
        ts = np.linspace(t0, t1, 200_001)
        dense = float(np.max(m(ts) - c.u(ts)))
        assert dense <= got + 1e-9
        # the grid misses the peak by at most slope * spacing
        assert got - dense <= 2 * float(np.max(c.psi(ts))) * (ts[1] - ts[0]) + 1e-9


def test_sup_gap_matches_scalar_search(rng):
    c = NaiveCurve(random_sample(rng, 40))
    m = least_concave_majorant(c)
    best = 0.0
    pts = np.concatenate(([0.5], c.knots[(c.knots > 0.5) & (c.knots < 7.5)], [7.5]))
    for lo, hi in zip(pts[:-1], pts[1:]):
        from scipy.optimize import minimize_scalar
        r = minimize_scalar(lambda t: -(m(t) - c.u(t)), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-12})
        best = max(best, -r.fun, float(m(lo) - c.u(lo)), float(m(hi) - c.u(hi)))
    assert sup_gap(c, m, 0.5, 7.5) == pytest.approx(best, abs=1e-8)


def test_restricted_majorant_covers_window(rng):
    c = NaiveCurve(random_sample(rng, 60))
    m = least_concave_majorant(c, 2.0, 6.0)
    ts = np.linspace(2.0, 6.0, 2001)
    assert m.knots[0] == 2.0 and m.knots[-1] <= 6.0
    assert np.all(m(ts) >= c.u(ts) - 1e-12)


def test_localized_equals_global(model):
    obs, _ = plummer.sample(model, 3000, plummer.replication_rng(5, 3000, 0))
    c = NaiveCurve(obs)
    g = least_concave_majorant(c)
    for a, b in [(4.0, 4.2), (1.0, 9.0), (0.0, 0.5), (20.0, 30.0)]:
        loc = localized_majorant(c, a, b)
        ts = np.linspace(a, b, 5001)
        assert np.max(np.abs(loc(ts) - g(ts))) < 1e-10
        assert sup_gap(c, loc, a, b) == pytest.approx(sup_gap(c, g, a, b), abs=1e-9)


def test_localization_fails_loudly(rng):
    c = NaiveCurve(random_sample(rng, 50))
    with pytest.raises(lcm.LocalizationError):
        localized_majorant(c, 4.0, 4.1, pad=1e-6, max_doublings=1)


def test_marshall_contraction(model):
    for rep in range(5):
        obs, _ = plummer.sample(model, 500, plummer.replication_rng(1, 500, rep))
        c = NaiveCurve(obs)
        m = least_concave_majorant(c)
        ts = np.union1d(np.linspace(0, c.y_max * 1.1, 20001), c.knots)
        truth = plummer.u_true(model, ts)
        assert np.max(np.abs(m(ts) - truth)) <= np.max(np.abs(c.u(ts) - truth)) + 1e-12


def test_step_function_basics():
    s = StepFunction([0.0, 1.0, 3.0], [5.0, 2.0, 0.0])
    assert s(-1.0) == 5.0 and s(1.0) == 2.0 and s(2.999) == 2.0 and s(3.0) == 0.0
    assert s.jumps.tolist() == [-3.0, -2.0]
    assert s.is_nonincreasing()
    with pytest.raises(ValueError):
        StepFunction([0.0, 0.0], [1.0, 1.0])


def test_concave_majorant_validation():
    with pytest.raises(ValueError):
        ConcaveMajorant([0.0, 1.0], [0.0], 0.0)


def _psi_integrals(c, edges):
    """Integrals of psi_naive over consecutive edges, by quadrature (x = hi - s^2)."""
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        f = lambda s: 2 * s * c.psi(hi - s * s)  # noqa: E731
        out.append(integrate.quad(f, 0, math.sqrt(hi - lo), epsabs=1e-11, epsrel=1e-11, limit=200)[0])
    return np.array(out)


def test_isotonization_minimizes_objective(rng):
    for _ in range(3):
        c = NaiveCurve(random_sample(rng, int(rng.integers(3, 21))))
        edges = c.knots
        widths = np.diff(edges)
        mass = _psi_integrals(c, edges)

        def objective(levels):
            return float(np.sum(levels ** 2 * widths) - 2 * np.sum(levels * mass))

        iso = isotonic_psi(least_concave_majorant(c))(edges[:-1])
        best = objective(iso)
        top = 2 * float(iso[0])
        for _ in range(1000):
            if rng.random() < 0.5:
                cand = np.sort(rng.uniform(0, top, widths.size))[::-1]
            else:
                cand = np.minimum.accumulate(np.maximum(iso + rng.normal(0, 0.05, iso.size), 0))
            assert objective(cand) >= best - 1e-9
