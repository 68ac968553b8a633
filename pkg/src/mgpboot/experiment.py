"""Replication harness for the synthetic study: outer source samples, inner bootstraps,
relative errors against the Monte Carlo oracle, and support-count tables.

Streams: outer replicate ``r`` uses stream ``r``; inner replicate ``(r, s)`` uses
stream ``n_outer + r * n_inner + s``; the oracle uses the next free stream
``n_outer * (n_inner + 1)``. Any single replicate can therefore be rerun alone.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, EmptyExceedanceError, EmptyRequestError
from .margins import (
    MarginalModel,
    extract_exceedances,
    from_exponential_scale,
    select_threshold,
    to_exponential_scale,
)
from .rand_core import RngState, _sub, as_generator
from .spectral import compute_deltas, spectral_bootstrap
from .synthetic import JointModel, sample_joint_model
from .trm import METRICS, estimate, trm_oracle_table, var_theoretical

log = logging.getLogger(__name__)

KINDS = ("D", "D*", "D+D*")
POOLINGS = ("all", "mean")
DEFAULT_THETAS = (1.3, 2.6, 7.3)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 1500
    m: int = 10_000
    nu: tuple[float, ...] = (2.0, 3.0, 2.5)
    theta: float = 1.3
    alphas: tuple[float, ...] = (0.0025, 0.001, 0.0003)
    n_outer: int = 50
    n_inner: int = 50
    threshold_level: float = 0.85
    seed: int = 20240917
    oracle_size: int = 10_000_000
    target: int = 0
    metrics: tuple[str, ...] = METRICS

    def __post_init__(self):
        object.__setattr__(self, "nu", tuple(float(v) for v in self.nu))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        for key in ("n", "m", "n_outer", "n_inner", "oracle_size"):
            if int(getattr(self, key)) < 1:
                raise ConfigError("must be at least 1", key=key)
        if len(self.nu) < 2:
            raise ConfigError("need at least two margins", key="nu")
        if any(not v > 1.0 for v in self.nu):
            raise ConfigError("degrees of freedom must exceed 1", key="nu")
        if not self.theta >= 1.0:
            raise ConfigError("Gumbel parameter must be >= 1", key="theta")
        if not self.alphas or any(not 0.0 < a < 0.5 for a in self.alphas):
            raise ConfigError("levels must lie in (0, 0.5)", key="alphas")
        if not 0.5 <= self.threshold_level < 1.0:
            raise ConfigError("must lie in [0.5, 1)", key="threshold_level")
        if not 0 <= self.target < len(self.nu):
            raise ConfigError("target component out of range", key="target")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key="seed")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}", key="metrics")

    @property
    def d(self) -> int:
        return len(self.nu)

    def model(self) -> JointModel:
        return JointModel.student(self.nu, self.theta)

    def outer_stream(self, r: int) -> RngState:
        return RngState(self.seed, r)

    def inner_stream(self, r: int, s: int) -> RngState:
        return RngState(self.seed, self.n_outer + r * self.n_inner + s)

    def oracle_stream(self) -> RngState:
        return RngState(self.seed, self.n_outer * (self.n_inner + 1))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ErrorTable:
    """Relative errors keyed by ``(metric, alpha, theta, kind, pooling)``.

    Kind ``D`` has the single pooling ``"all"``. For ``D*`` and ``D+D*``,
    ``"all"`` keeps every inner replicate and ``"mean"`` averages the inner
    estimates of each outer replicate first.
    """

    errors: dict = field(default_factory=dict)
    excluded: dict = field(default_factory=dict)

    def rows(self):
        for key in sorted(self.errors, key=_sort_key):
            for i, err in enumerate(self.errors[key]):
                yield (*key, i, err)

    def iqr(self, key) -> float:
        vals = np.asarray(self.errors.get(key, ()), dtype=float)
        if vals.size == 0:
            return math.nan
        q75, q25 = np.percentile(vals, [75, 25])
        return float(q75 - q25)

    def merge(self, other: "ErrorTable"):
        self.errors.update(other.errors)
        self.excluded.update(other.excluded)


@dataclass
class CountTable:
    """Mean and sd of support counts keyed by ``(metric, alpha, theta, kind, pooling)``."""

    stats: dict = field(default_factory=dict)

    def mean(self, metric, alpha, theta, kind, pooling="all") -> float:
        return self.stats[(metric, float(alpha), float(theta), kind, pooling)]["mean"]

    def rows(self):
        for key in sorted(self.stats, key=_sort_key):
            s = self.stats[key]
            yield (*key, s["mean"], s["sd"], s["n"])

    def merge(self, other: "CountTable"):
        self.stats.update(other.stats)


def _sort_key(key):
    metric, alpha, theta, kind, pooling = key
    return (METRICS.index(metric), -alpha, theta, KINDS.index(kind), POOLINGS.index(pooling))


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    errors: ErrorTable
    counts: CountTable
    oracle: dict
    skipped: list
    floored: int
    exceedance_counts: list
    estimates: dict = field(repr=False, default_factory=dict)
    support: dict = field(repr=False, default_factory=dict)


def _outer_replicate(cfg: ScenarioConfig, r: int):
    """Everything for outer replicate ``r``; returns raw estimates and counts."""
    model = cfg.model()
    margins = MarginalModel.known(model.margins)
    vars_ = {a: var_theoretical(margins, a) for a in cfg.alphas}
    j = cfg.target

    data = sample_joint_model(cfg.outer_stream(r), model, cfg.n)
    x_exp = to_exponential_scale(data, margins)
    threshold = select_threshold(x_exp, cfg.threshold_level)
    try:
        exceed = extract_exceedances(x_exp, threshold)
    except EmptyExceedanceError:
        return None

    cells = [(metric, a) for metric in cfg.metrics for a in cfg.alphas]
    est = {kind: np.full((len(cells), cfg.n_inner if kind != "D" else 1), np.nan) for kind in KINDS}
    cnt = {kind: np.zeros_like(est[kind]) for kind in KINDS}

    def record(kind, sample, col):
        for c, (metric, a) in enumerate(cells):
            rep = estimate(metric, sample, j, vars_[a])
            cnt[kind][c, col] = rep.support_count
            if rep.available:
                est[kind][c, col] = rep.estimate

    record("D", data, 0)
    deltas = compute_deltas(exceed.excesses)
    floored = 0
    for s in range(cfg.n_inner):
        boot = spectral_bootstrap(cfg.inner_stream(r, s), deltas, cfg.m)
        back = from_exponential_scale(boot.z_star + threshold.u_exp, margins)
        floored += back.floored
        record("D*", back.values, s)
        record("D+D*", np.vstack((data, back.values)), s)
    return est, cnt, floored, exceed.k


def run_scenario(cfg: ScenarioConfig, oracle: dict | None = None, workers: int = 1) -> ScenarioResult:
    """Run the outer/inner replication design for one theta.

    ``oracle`` may be passed in (from :func:`scenario_oracle`) to share it
    across calls; otherwise it is computed on the oracle stream.
    """
    if oracle is None:
        oracle = scenario_oracle(cfg)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_outer_replicate, [cfg] * cfg.n_outer, range(cfg.n_outer)))
    else:
        outs = [_outer_replicate(cfg, r) for r in range(cfg.n_outer)]

    cells = [(metric, a) for metric in cfg.metrics for a in cfg.alphas]
    skipped = [r for r, out in enumerate(outs) if out is None]
    kept = [out for out in outs if out is not None]
    if skipped:
        log.warning("theta=%g: %d outer replicate(s) skipped (no exceedances)", cfg.theta, len(skipped))
    if not kept:
        raise EmptyExceedanceError("every outer replicate had an empty exceedance set")

    est = {kind: np.stack([o[0][kind] for o in kept]) for kind in KINDS}  # (outer, cell, inner)
    cnt = {kind: np.stack([o[1][kind] for o in kept]) for kind in KINDS}
    floored = int(sum(o[2] for o in kept))
    k_counts = [int(o[3]) for o in kept]

    errors = ErrorTable()
    counts = CountTable()
    theta = float(cfg.theta)
    for c, (metric, a) in enumerate(cells):
        truth = oracle[(metric, a)].value
        for kind in KINDS:
            e = est[kind][:, c, :]
            n_ = cnt[kind][:, c, :]
            poolings = ("all",) if kind == "D" else POOLINGS
            for pooling in poolings:
                if pooling == "all":
                    vals = e.ravel()
                    support = n_.ravel()
                else:
                    with warnings.catch_warnings():
                        # all-NA rows are counted as excluded below
                        warnings.simplefilter("ignore", RuntimeWarning)
                        vals = np.nanmean(e, axis=1)
                    support = n_.mean(axis=1)
                key = (metric, a, theta, kind, pooling)
                ok = ~np.isnan(vals)
                errors.errors[key] = list((vals[ok] - truth) / abs(truth)) if math.isfinite(truth) else []
                errors.excluded[key] = int(np.count_nonzero(~ok))
                counts.stats[key] = {
                    "mean": float(np.mean(support)),
                    "sd": float(np.std(support, ddof=1)) if support.size > 1 else 0.0,
                    "n": int(support.size),
                }
    return ScenarioResult(
        cfg,
        errors,
        counts,
        oracle,
        skipped,
        floored,
        k_counts,
        estimates={(kind, cells[c]): est[kind][:, c, :] for kind in KINDS for c in range(len(cells))},
        support={(kind, cells[c]): cnt[kind][:, c, :] for kind in KINDS for c in range(len(cells))},
    )


def scenario_oracle(cfg: ScenarioConfig) -> dict:
    return trm_oracle_table(cfg.model(), cfg.target, cfg.alphas, cfg.oracle_size, cfg.oracle_stream(), cfg.metrics)


def run_grid(cfg: ScenarioConfig, thetas=DEFAULT_THETAS, workers: int = 1):
    """Run :func:`run_scenario` for each theta with otherwise identical settings."""
    errors, counts, results = ErrorTable(), CountTable(), []
    for theta in thetas:
        sub = ScenarioConfig(**{**cfg.to_dict(), "theta": float(theta)})
        res = run_scenario(sub, workers=workers)
        errors.merge(res.errors)
        counts.merge(res.counts)
        results.append(res)
    return errors, counts, results


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

QQ_GRID = np.round(np.arange(1, 100) / 100.0, 2)


@dataclass(frozen=True)
class QQTable:
    probs: np.ndarray
    qa: np.ndarray
    qb: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def covers_diagonal(self) -> np.ndarray:
        return (self.lower <= self.qa) & (self.qa <= self.upper)


def qq_data(a, b, n_boot: int, rng, probs=QQ_GRID) -> QQTable:
    """Matched quantiles of ``a`` and ``b`` with 95% pointwise percentile-bootstrap bands.

    Both samples are resampled in each replicate and the band is placed on the
    b-quantile axis as ``qa + percentile(qb* - qa*)``, so the diagonal lies
    inside a band exactly when the two-sample bootstrap interval for the
    quantile difference contains zero.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyRequestError("QQ data needs two nonempty samples")
    if n_boot < 100:
        raise ConfigError("need at least 100 bootstrap replications", key="n_boot")
    probs = np.asarray(probs, dtype=np.float64)
    qa = np.quantile(a, probs)
    qb = np.quantile(b, probs)
    gen_a = as_generator(_sub(rng, 0))
    gen_b = as_generator(_sub(rng, 1))
    diffs = np.empty((n_boot, probs.size))
    for i in range(n_boot):
        ra = a[gen_a.integers(0, a.size, a.size)]
        rb = b[gen_b.integers(0, b.size, b.size)]
        diffs[i] = np.quantile(rb, probs) - np.quantile(ra, probs)
    lo, hi = np.percentile(diffs, [2.5, 97.5], axis=0)
    return QQTable(probs, qa, qb, qa + lo, qa + hi)


def _pseudo_uniform(col):
    order = np.argsort(col, kind="stable")
    ranks = np.empty(col.size)
    ranks[order] = np.arange(1, col.size + 1)
    return ranks / (col.size + 1)


def chi_coefficient(x, pair, level: float) -> float | None:
    """Empirical P(F_j(X_j) > level | F_k(X_k) > level) from rank transforms; None when undefined."""
    if not 0.5 < level < 1.0:
        raise ConfigError("chi level must lie in (0.5, 1)", key="level")
    x = np.asarray(x, dtype=np.float64)
    j, k = pair
    uj = _pseudo_uniform(x[:, j])
    uk = _pseudo_uniform(x[:, k])
    cond = uk > level
    if not cond.any():
        return None
    return float(np.count_nonzero(cond & (uj > level)) / np.count_nonzero(cond))
