import math

import numpy as np
import pytest

from wicksell import experiments as E
from wicksell import plummer

SMALL = dict(n_grid=(200, 400), replications=3)


def test_eps_n():
    assert E.eps_n(math.e) == pytest.approx(1 / math.sqrt(math.e), rel=1e-15)
    assert E.eps_n(1000) == pytest.approx(math.sqrt(math.log(1000) / 1000))


@pytest.mark.parametrize("bad, field", [
    (dict(n_grid=[]), "n_grid"),
    (dict(n_grid=[100, 50]), "n_grid"),
    (dict(n_grid=[0, 5]), "n_grid"),
    (dict(replications=1), "replications"),
    (dict(beta=0), "beta"),
    (dict(interval=[3, 1]), "interval"),
    (dict(interval=[1]), "interval"),
    (dict(eval_x=0), "eval_x"),
    (dict(bandwidth_schedule="auto"), "bandwidth_schedule"),
    (dict(replications=2.5), "replications"),
    (dict(replications="10"), "replications"),
    (dict(n_grid="100"), "n_grid"),
    (dict(colour="red"), "colour"),
])
def test_config_validation_names_field(bad, field):
    with pytest.raises(E.ConfigError) as info:
        E.ExperimentConfig.from_dict(bad)
    assert info.value.field == field
    assert field in str(info.value)


def test_config_round_trip():
    cfg = E.ExperimentConfig(n_grid=(10, 20), replications=4, t0=0.5, t1=2.0, output="x.json")
    again = E.ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert cfg.to_dict()["interval"] == [0.5, 2.0]


def test_bandwidth_schedule():
    cfg = E.ExperimentConfig(bandwidth=2.0)
    assert cfg.bandwidth_for(64) == pytest.approx(2.0 / 2.0)
    assert E.ExperimentConfig(bandwidth_schedule="fixed", bandwidth=0.7).bandwidth_for(99) == 0.7


def test_kw_rate_report_shape_and_determinism():
    cfg = E.ExperimentConfig(**SMALL)
    a = E.kw_rate(cfg)
    b = E.kw_rate(cfg)
    assert a.to_dict() == b.to_dict()
    assert a.raw_count() == cfg.replications * len(cfg.n_grid)
    assert [p["n"] for p in a.per_n] == list(cfg.n_grid)
    for p in a.per_n:
        assert p["q10"] <= p["median"] <= p["q90"]
    assert a.slope is not None and "companion_slope" in a.extra
    assert a.config == cfg.to_dict() and a.seed == cfg.master_seed


def test_kw_rate_degenerate_beyond_data():
    cfg = E.ExperimentConfig(n_grid=(50, 100), replications=2, t0=1e6, t1=2e6)
    rep = E.kw_rate(cfg)
    assert all(v == 0.0 for vals in rep.raw.values() for v in vals)
    assert rep.extra["degenerate"] and rep.slope is None


def test_seed_changes_results():
    a = E.kw_rate(E.ExperimentConfig(**SMALL))
    b = E.kw_rate(E.ExperimentConfig(master_seed=1, **SMALL))
    assert a.raw != b.raw


def test_replication_independence():
    # a replication's value does not depend on which other replications ran
    cfg3 = E.ExperimentConfig(n_grid=(300,), replications=3)
    cfg5 = E.ExperimentConfig(n_grid=(300,), replications=5)
    assert E.kw_rate(cfg5).raw["300"][:3] == E.kw_rate(cfg3).raw["300"]


def test_parallel_equals_serial():
    cfg = E.ExperimentConfig(**SMALL)
    par = E.ExperimentConfig(workers=2, **SMALL)
    a, b = E.kw_rate(cfg).to_dict(), E.kw_rate(par).to_dict()
    a["config"].pop("workers"), b["config"].pop("workers")
    assert a == b


def test_local_gap_report():
    rep = E.local_gap(E.ExperimentConfig(**SMALL))
    assert [p["eps"] for p in rep.per_n] == [E.eps_n(n) for n in SMALL["n_grid"]]
    assert len(rep.extra["normalized_medians"]) == 2
    assert all(v >= 0 for vals in rep.raw.values() for v in vals)


def test_clt_report(model):
    rep = E.clt(E.ExperimentConfig(n_grid=(300,), replications=6))
    row = rep.per_n[0]
    assert rep.extra["sigma2_true"] == pytest.approx(plummer.sigma2_true(model, 4.0))
    assert row["isotonic_to_naive_var"] == pytest.approx(row["isotonic_var"] / row["naive_var"])
    assert len(rep.raw["300/naive"]) == len(rep.raw["300/isotonic"]) == 6
    assert E.clt_naive is E.clt and E.clt_isotonic is E.clt


def test_smooth_gap_report():
    rep = E.smooth_gap(E.ExperimentConfig(n_grid=(300, 600), replications=3))
    assert rep.extra["median_spread"] >= 1.0
    assert rep.per_n[0]["bandwidth"] == pytest.approx(300 ** (-1 / 6))


def test_replication_error_carries_index(monkeypatch):
    def boom(cfg, n, rep):
        if rep == 1:
            raise ValueError("bad draw")
        return 0.0
    with pytest.raises(E.ReplicationError) as info:
        E._run_grid(E.ExperimentConfig(n_grid=(10,), replications=3), boom)
    assert info.value.rep == 1 and info.value.n == 10


def test_fit_slope_and_inversions():
    x = np.log([1, 2, 4, 8.0])
    s, se = E.fit_slope(x, -1.0 * x + 3)
    assert s == pytest.approx(-1.0) and se == pytest.approx(0.0, abs=1e-12)
    assert E.fit_slope([0.0], [1.0]) == (None, None)
    assert E.count_inversions([5, 4, 4.5, 3, 3.5]) == 2


def test_figure_files(tmp_path, model):
    cfg = E.ExperimentConfig(grid_resolution=41)
    paths = E.figure_reproduction(cfg, str(tmp_path / "fig"))
    assert sorted(paths) == sorted(E.FIGURE_FILES)
    assert len(list((tmp_path / "fig").iterdir())) == 6
    from wicksell import formats
    t, v = formats.read_curve(paths["true_psi"])
    assert np.allclose(v, plummer.psi_true(model, t), rtol=1e-12, atol=0)
    t, v = formats.read_curve(paths["true_psi_prime"])
    assert np.allclose(v, plummer.psi_prime_true(model, t), rtol=1e-12, atol=0)
    assert formats.read_step(paths["isotonic"]).is_nonincreasing()


def test_figure_data_uses_paper_setting():
    fd = E.figure_data(E.ExperimentConfig(grid_resolution=11))
    assert fd.grid[0] == 0.0 and fd.grid[-1] == 9.0
    assert fd.isotonic.is_nonincreasing()
    assert np.all(np.diff(fd.smooth) <= 1e-12)


def test_kinds():
    assert set(E.KINDS) == {"kw-rate", "local-gap", "clt", "smooth-gap", "figures"}
