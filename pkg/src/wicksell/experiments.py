"""Seeded Monte Carlo experiments on the Plummer model.

Every replication draws from its own stream keyed by
``(master_seed, n, replication)``, so a report is a pure function of the
config no matter how replications are scheduled.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Any, Callable, Optional

import numpy as np
from scipy import stats

from . import __version__, lcm, plummer, smooth
from .naive import NaiveCurve
from .samples import DataError

SCHEDULES = ("fixed", "n^-1/6")


class ConfigError(DataError):
    """Experiment config failed validation; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 0
    beta: float = 200.0
    n_grid: tuple[int, ...] = (500, 1000, 2000, 4000, 8000, 16000)
    replications: int = 200
    t0: float = 1.0
    t1: float = 9.0
    eval_x: float = 4.0
    bandwidth_schedule: str = "n^-1/6"
    bandwidth: float = 1.0
    grid_resolution: int = 401
    output: Optional[str] = None
    smooth_bandwidth: float = 1.5
    derivative_bandwidth: float = 3.7
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        checks = [
            ("n_grid", len(self.n_grid) > 0, "must be nonempty"),
            ("n_grid", all(n >= 1 for n in self.n_grid), "entries must be positive"),
            ("n_grid", all(a < b for a, b in zip(self.n_grid, self.n_grid[1:])),
             "must be strictly increasing"),
            ("replications", int(self.replications) >= 2, "must be at least 2"),
            ("beta", float(self.beta) > 0, "must be positive"),
            ("interval", 0 <= float(self.t0) < float(self.t1), "need 0 <= t0 < t1"),
            ("eval_x", float(self.eval_x) > 0, "must be positive"),
            ("bandwidth_schedule", self.bandwidth_schedule in SCHEDULES,
             f"must be one of {SCHEDULES}"),
            ("bandwidth", float(self.bandwidth) > 0, "must be positive"),
            ("grid_resolution", int(self.grid_resolution) >= 1, "must be positive"),
            ("smooth_bandwidth", float(self.smooth_bandwidth) > 0, "must be positive"),
            ("derivative_bandwidth", float(self.derivative_bandwidth) > 0, "must be positive"),
            ("workers", int(self.workers) >= 1, "must be positive"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigError(name, msg)

    def bandwidth_for(self, n: int) -> float:
        """Fixed bandwidth, or ``bandwidth * n^(-1/6)``."""
        if self.bandwidth_schedule == "fixed":
            return float(self.bandwidth)
        return float(self.bandwidth) * n ** (-1.0 / 6.0)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        d["interval"] = [d.pop("t0"), d.pop("t1")]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        d = dict(d)
        if "interval" in d:
            iv = d.pop("interval")
            if not (isinstance(iv, (list, tuple)) and len(iv) == 2):
                raise ConfigError("interval", "must be a pair [t0, t1]")
            d["t0"], d["t1"] = iv
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        types = {"master_seed": int, "replications": int, "grid_resolution": int, "workers": int,
                 "beta": float, "t0": float, "t1": float, "eval_x": float, "bandwidth": float,
                 "smooth_bandwidth": float, "derivative_bandwidth": float}
        for key, typ in types.items():
            if key in d:
                v = d[key]
                if isinstance(v, bool) or not isinstance(v, (int, float)) or (
                        typ is int and not float(v).is_integer()):
                    raise ConfigError(key, f"expected {typ.__name__}, got {v!r}")
                d[key] = typ(v)
        if "n_grid" in d and not (isinstance(d["n_grid"], list)
                                  and all(isinstance(n, int) and not isinstance(n, bool)
                                          for n in d["n_grid"])):
            raise ConfigError("n_grid", "must be a list of integers")
        if "bandwidth_schedule" in d and not isinstance(d["bandwidth_schedule"], str):
            raise ConfigError("bandwidth_schedule", "must be a string")
        if "output" in d and d["output"] is not None and not isinstance(d["output"], str):
            raise ConfigError("output", "must be a string path")
        return cls(**d)


def eps_n(n: float) -> float:
    """``sqrt(log(n) / n)``."""
    return math.sqrt(math.log(n) / n)


@dataclass
class ExperimentReport:
    kind: str
    config: dict[str, Any]
    seed: int
    per_n: list[dict[str, Any]]
    raw: dict[str, list[float]]
    slope: Optional[float] = None
    slope_stderr: Optional[float] = None
    extra: dict[str, Any] = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def raw_count(self) -> int:
        return sum(len(v) for v in self.raw.values())


class ReplicationError(RuntimeError):
    def __init__(self, n: int, rep: int, exc: BaseException):
        super().__init__(f"replication {rep} at n={n} failed: {exc!r}")
        self.n, self.rep = n, rep


@lru_cache(maxsize=8)
def _model(beta: float) -> plummer.PlummerModel:
    return plummer.PlummerModel(beta)


def _draw(cfg: ExperimentConfig, n: int, rep: int):
    model = _model(cfg.beta)
    obs, _ = plummer.sample(model, n, plummer.replication_rng(cfg.master_seed, n, rep))
    return model, obs


def _kw_one(cfg, n, rep):
    _, obs = _draw(cfg, n, rep)
    curve = NaiveCurve(obs)
    m = lcm.majorant_for(curve, cfg.t0, cfg.t1)
    return lcm.sup_gap(curve, m, cfg.t0, cfg.t1)


def _local_one(cfg, n, rep):
    _, obs = _draw(cfg, n, rep)
    curve = NaiveCurve(obs)
    e = eps_n(n)
    a, b = max(cfg.eval_x - e, 0.0), cfg.eval_x + e
    m = lcm.majorant_for(curve, a, b)
    return lcm.sup_gap(curve, m, a, b) / e ** 2


def _clt_one(cfg, n, rep):
    model, obs = _draw(cfg, n, rep)
    curve = NaiveCurve(obs)
    x = cfg.eval_x
    m = lcm.majorant_for(curve, x, x + 1e-6)
    iso = float(lcm.isotonic_psi(m)(x))
    truth = float(plummer.psi_true(model, x))
    scale = math.sqrt(n / math.log(n))
    return [scale * (float(curve.psi(x)) - truth), scale * (iso - truth)]


def _smooth_gap_one(cfg, n, rep):
    _, obs = _draw(cfg, n, rep)
    curve = NaiveCurve(obs)
    x = cfg.eval_x
    b = cfg.bandwidth_for(n)
    k = smooth.KernelSpec(b)
    step = smooth.isotonic_step_near(curve, max(x - b, 0.0), x + b)
    iso = float(smooth.smooth_psi_prime(step, k, x))
    naive = float(smooth.smooth_psi_prime(curve, k, x))
    return abs(iso - naive) * n * b * b / math.log(n)


def _run_grid(cfg: ExperimentConfig, one: Callable, n_grid=None) -> dict[int, list]:
    jobs = [(one, cfg, n, r) for n in (n_grid or cfg.n_grid) for r in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            values = list(pool.map(_call_job, jobs, chunksize=8))
    else:
        values = [_call_job(job) for job in jobs]
    # fold in replication order regardless of completion order
    out: dict[int, list] = {}
    for (_, _, n, _), v in zip(jobs, values):
        out.setdefault(n, []).append(v)
    return out


def _call_job(args):
    one, cfg, n, r = args
    try:
        return one(cfg, n, r)
    except Exception as exc:  # replication index travels with the error
        raise ReplicationError(n, r, exc) from exc


def _summary(n: int, vals) -> dict[str, Any]:
    v = np.asarray(vals, dtype=float)
    return {"n": n, "median": float(np.median(v)), "q10": float(np.quantile(v, 0.1)),
            "q90": float(np.quantile(v, 0.9)), "mean": float(v.mean())}


def fit_slope(x, y) -> tuple[Optional[float], Optional[float]]:
    """OLS slope of y on x with its standard error; None when degenerate."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or not np.all(np.isfinite(y)):
        return None, None
    if x.size == 2:
        return float((y[1] - y[0]) / (x[1] - x[0])), None
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


def count_inversions(seq) -> int:
    """Adjacent increases in a sequence expected to be nonincreasing."""
    s = np.asarray(seq, dtype=float)
    return int(np.sum(np.diff(s) > 0))


def kw_rate(cfg: ExperimentConfig) -> ExperimentReport:
    """Median sup-gap between the majorant and u_naive on [t0, t1] versus n."""
    raw = _run_grid(cfg, _kw_one)
    per_n = [_summary(n, raw[n]) for n in cfg.n_grid]
    med = np.array([p["median"] for p in per_n])
    ns = np.array(cfg.n_grid, dtype=float)
    extra: dict[str, Any] = {"degenerate": bool(np.any(med <= 0))}
    slope = stderr = None
    if not extra["degenerate"]:
        slope, stderr = fit_slope(np.log(ns), np.log(med))
        c_slope, c_err = fit_slope(np.log(np.log(ns) / ns), np.log(med))
        extra.update(companion_slope=c_slope, companion_slope_stderr=c_err)
    inv = count_inversions(med)
    extra.update(inversions=inv, ordering_ok=inv <= 1)
    return ExperimentReport("kw-rate", cfg.to_dict(), cfg.master_seed, per_n,
                            {str(n): raw[n] for n in cfg.n_grid}, slope, stderr, extra)


def local_gap(cfg: ExperimentConfig) -> ExperimentReport:
    """Median of ``sup_{|t-x|<=eps_n} gap / eps_n^2`` versus n."""
    raw = _run_grid(cfg, _local_one)
    per_n = [_summary(n, raw[n]) | {"eps": eps_n(n)} for n in cfg.n_grid]
    med = [p["median"] for p in per_n]
    extra = {"normalized_medians": med,
             "strictly_decreasing": bool(np.all(np.diff(med) < 0)),
             "decreasing_at_upper_end": bool(len(med) < 2 or med[-1] < med[-2])}
    return ExperimentReport("local-gap", cfg.to_dict(), cfg.master_seed, per_n,
                            {str(n): raw[n] for n in cfg.n_grid}, extra=extra)


def _normality(v: np.ndarray) -> float:
    sd = v.std(ddof=1)
    if sd <= 0:
        return float("nan")
    return float(stats.kstest((v - v.mean()) / sd, "norm").statistic)


def clt(cfg: ExperimentConfig) -> ExperimentReport:
    """Standardized naive and isotonic errors at eval_x, ``sqrt(n/log n)`` scaling."""
    model = _model(cfg.beta)
    s2 = plummer.sigma2_true(model, cfg.eval_x)
    raw = _run_grid(cfg, _clt_one)
    per_n, raw_out = [], {}
    for n in cfg.n_grid:
        arr = np.asarray(raw[n], dtype=float)
        nv, iv = arr[:, 0], arr[:, 1]
        var_n, var_i = float(nv.var(ddof=1)), float(iv.var(ddof=1))
        per_n.append({
            "n": n,
            "median": float(np.median(nv)), "q10": float(np.quantile(nv, 0.1)),
            "q90": float(np.quantile(nv, 0.9)),
            "naive_mean": float(nv.mean()),
            "naive_mean_stderr": float(nv.std(ddof=1) / math.sqrt(nv.size)),
            "naive_var": var_n, "naive_var_ratio": var_n / s2,
            "isotonic_mean": float(iv.mean()), "isotonic_var": var_i,
            "isotonic_var_ratio": var_i / s2,
            "isotonic_to_naive_var": var_i / var_n,
            "naive_ks": _normality(nv), "isotonic_ks": _normality(iv),
        })
        raw_out[f"{n}/naive"] = nv.tolist()
        raw_out[f"{n}/isotonic"] = iv.tolist()
    extra = {"sigma2_true": s2, "normality_threshold_advisory": 0.1}
    return ExperimentReport("clt", cfg.to_dict(), cfg.master_seed, per_n, raw_out, extra=extra)


clt_naive = clt
clt_isotonic = clt


def smooth_gap(cfg: ExperimentConfig) -> ExperimentReport:
    """``|iso' - naive'| * n b^2 / log n`` at eval_x, smoothed derivative estimates."""
    raw = _run_grid(cfg, _smooth_gap_one)
    per_n = [_summary(n, raw[n]) | {"bandwidth": cfg.bandwidth_for(n)} for n in cfg.n_grid]
    med = np.array([p["median"] for p in per_n])
    spread = float(med.max() / med.min()) if med.min() > 0 else math.inf
    return ExperimentReport("smooth-gap", cfg.to_dict(), cfg.master_seed, per_n,
                            {str(n): raw[n] for n in cfg.n_grid}, extra={"median_spread": spread})


@dataclass
class FigureData:
    grid: np.ndarray
    naive: np.ndarray
    isotonic: lcm.StepFunction
    smooth: np.ndarray
    smooth_derivative: np.ndarray
    true_psi: np.ndarray
    true_psi_prime: np.ndarray


FIGURE_FILES = {
    "naive": "naive_psi.csv",
    "isotonic": "isotonic_psi_steps.csv",
    "smooth": "smooth_psi.csv",
    "smooth_derivative": "smooth_psi_prime.csv",
    "true_psi": "true_psi.csv",
    "true_psi_prime": "true_psi_prime.csv",
}

FIGURE_N = 1500


def figure_data(cfg: ExperimentConfig, seed: Optional[int] = None, n: int = FIGURE_N,
                grid=None) -> FigureData:
    model = _model(cfg.beta)
    seed = cfg.master_seed if seed is None else seed
    obs, _ = plummer.sample(model, n, plummer.replication_rng(seed, n, 0))
    curve = NaiveCurve(obs)
    step = lcm.isotonic_psi(lcm.least_concave_majorant(curve))
    if grid is None:
        grid = np.linspace(0.0, cfg.t1, cfg.grid_resolution)
    grid = np.asarray(grid, dtype=float)
    return FigureData(
        grid=grid,
        naive=np.asarray(curve.psi(grid)),
        isotonic=step,
        smooth=np.asarray(smooth.smooth_psi(step, smooth.KernelSpec(cfg.smooth_bandwidth), grid)),
        smooth_derivative=np.asarray(smooth.smooth_psi_prime(
            step, smooth.KernelSpec(cfg.derivative_bandwidth), grid)),
        true_psi=np.asarray(plummer.psi_true(model, grid)),
        true_psi_prime=np.asarray(plummer.psi_prime_true(model, grid)),
    )


def figure_reproduction(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> dict[str, str]:
    """Write the six curve files behind the naive/isotonic/smooth figures."""
    from . import formats

    out_dir = out_dir or cfg.output or "figures"
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir!r}: {exc}") from exc
    data = figure_data(cfg)
    paths = {key: os.path.join(out_dir, name) for key, name in FIGURE_FILES.items()}
    formats.write_step(paths["isotonic"], data.isotonic)
    for key in ("naive", "smooth", "smooth_derivative", "true_psi", "true_psi_prime"):
        formats.write_curve(paths[key], data.grid, getattr(data, key))
    return paths


def figure_fit_study(cfg: ExperimentConfig, seeds: int = 100, window=(1.0, 9.0),
                     points: int = 401) -> dict[str, Any]:
    """Across seeds: does the smooth isotonic curve beat the naive one in MSE on
    ``window``, and how does the derivative at eval_x scatter around the truth?"""
    model = _model(cfg.beta)
    grid = np.linspace(window[0], window[1], points)
    truth = plummer.psi_true(model, grid)
    wins, mse_s, mse_n, deriv = 0, [], [], []
    for s in range(seeds):
        fd = figure_data(cfg, seed=cfg.master_seed + s, grid=grid)
        a = float(np.mean((fd.smooth - truth) ** 2))
        b = float(np.mean((fd.naive - truth) ** 2))
        mse_s.append(a)
        mse_n.append(b)
        wins += a < b
        step = fd.isotonic
        deriv.append(float(smooth.smooth_psi_prime(
            step, smooth.KernelSpec(cfg.derivative_bandwidth), cfg.eval_x)))
    d = np.asarray(deriv)
    return {"seeds": seeds, "smooth_wins": wins, "win_fraction": wins / seeds,
            "mse_smooth": mse_s, "mse_naive": mse_n, "derivative_at_x": deriv,
            "derivative_mean": float(d.mean()), "derivative_sd": float(d.std(ddof=1)),
            "derivative_true": float(plummer.psi_prime_true(model, cfg.eval_x))}


KINDS: dict[str, Callable[[ExperimentConfig], Any]] = {
    "kw-rate": kw_rate,
    "local-gap": local_gap,
    "clt": clt,
    "smooth-gap": smooth_gap,
    "figures": figure_reproduction,
}
