"""Tail risk metrics: VaR, ES, MMES and DCTE, plus a Monte Carlo oracle for the exact model.

Conditioning conventions are fixed: ES uses ``x_j > VaR_j``; MMES and DCTE use
componentwise ``>=``. An empty conditioning set is a value (``estimate=None``,
printed as NA), never an exception.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyRequestError, ShapeError, UnsupportedMethodError
from .margins import MarginalModel
from .rand_core import _sub, student_t_isf
from .synthetic import JointModel, gumbel_upper_tail_sample

METRICS = ("ES", "MMES", "DCTE")
THEORETICAL = "theoretical-student-t"
EMPIRICAL = "empirical"


@dataclass(frozen=True)
class VarVector:
    alpha: float
    values: np.ndarray
    method: str
    small_sample: bool = False

    def __post_init__(self):
        _check_alpha(self.alpha)
        values = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(values)):
            raise DomainError("VaR values must be finite")
        object.__setattr__(self, "values", values)

    def shifted(self, j: int, c: float) -> "VarVector":
        values = self.values.copy()
        values[j] += c
        return VarVector(self.alpha, values, self.method, self.small_sample)


@dataclass(frozen=True)
class TrmReport:
    metric: str
    component: int
    alpha: float
    estimate: float | None
    support_count: int

    @property
    def available(self) -> bool:
        return self.estimate is not None


def _check_alpha(alpha):
    if not (0.0 < alpha < 0.5):
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha}")


def var_theoretical(model: MarginalModel, alpha: float) -> VarVector:
    """VaR_j = Student-t quantile at 1 - alpha of each margin."""
    _check_alpha(alpha)
    if not model.is_student:
        raise UnsupportedMethodError("theoretical VaR needs Student-t margins")
    values = [float(student_t_isf(alpha, p)) for p in model.params]
    return VarVector(alpha, np.array(values), THEORETICAL)


def var_empirical(x, alpha: float) -> VarVector:
    """Order statistic of rank ceil((1 - alpha) n) per column."""
    _check_alpha(alpha)
    x = _matrix(x)
    n = x.shape[0]
    if n == 0:
        raise EmptyRequestError("empirical VaR of an empty sample")
    # guard against (1 - alpha) * n landing a hair above an integer
    rank = max(1, math.ceil((1.0 - alpha) * n - 1e-9))
    small = n * alpha < 1.0
    if small:
        warnings.warn(f"n*alpha = {n * alpha:.3g} < 1: empirical VaR is the sample maximum", stacklevel=2)
    values = np.sort(x, axis=0)[rank - 1]
    return VarVector(alpha, values, EMPIRICAL, small)


def _matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"expected an n x d sample, got shape {x.shape}")
    return x


def _report(metric, j, v, values):
    count = int(values.size)
    estimate = float(np.mean(values)) if count else None
    return TrmReport(metric, j, v.alpha, estimate, count)


def _prepare(x, j, v, need_pairs):
    x = _matrix(x)
    d = x.shape[1]
    if v.values.size != d:
        raise ShapeError(f"VaR has {v.values.size} components, sample has {d}")
    if not 0 <= j < d:
        raise ShapeError(f"component {j} out of range for d={d}")
    if need_pairs and d < 2:
        raise ShapeError("MMES and DCTE need at least two components")
    return x


def estimate_es(x, j: int, v: VarVector) -> TrmReport:
    x = _prepare(x, j, v, False)
    col = x[:, j]
    return _report("ES", j, v, col[col > v.values[j]])


def estimate_mmes(x, j: int, v: VarVector) -> TrmReport:
    x = _prepare(x, j, v, True)
    others = np.delete(np.arange(x.shape[1]), j)
    mask = np.all(x[:, others] >= v.values[others], axis=1)
    return _report("MMES", j, v, x[mask, j])


def estimate_dcte(x, j: int, v: VarVector) -> TrmReport:
    x = _prepare(x, j, v, True)
    mask = np.all(x >= v.values, axis=1)
    return _report("DCTE", j, v, x[mask, j])


ESTIMATORS = {"ES": estimate_es, "MMES": estimate_mmes, "DCTE": estimate_dcte}


def estimate(metric: str, x, j: int, v: VarVector) -> TrmReport:
    try:
        fn = ESTIMATORS[metric]
    except KeyError:
        raise UnsupportedMethodError(f"unknown metric {metric!r}") from None
    return fn(x, j, v)


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleResult:
    metric: str
    component: int
    alpha: float
    value: float
    se: float
    count: int
    mc_size: int
    precision_warning: bool


class _Moments:
    __slots__ = ("n", "total", "total_sq")

    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values):
        self.n += values.size
        self.total += float(np.sum(values))
        self.total_sq += float(np.sum(values * values))


def trm_oracle_table(
    model: JointModel,
    j: int,
    alphas,
    mc_size: int,
    rng,
    metrics=METRICS,
    chunk: int = 1_000_000,
) -> dict:
    """Brute-force Monte Carlo values of every (metric, alpha) from one shared sample.

    Rows come from the exact model in chunks (chunk ``c`` on ``rng.derive(c)``
    for an RngState) and are reduced in chunk order. Conditioning uses the
    copula tail probabilities: ``x_k > VaR_k`` exactly when ``1 - U_k < alpha``,
    so only the target column is pushed through the Student-t quantile.
    """
    alphas = [float(a) for a in alphas]
    for a in alphas:
        _check_alpha(a)
    if model.d < 2 and any(m != "ES" for m in metrics):
        raise ShapeError("MMES and DCTE need at least two components")
    others = np.delete(np.arange(model.d), j)
    acc = {(m, a): _Moments() for m in metrics for a in alphas}
    done = 0
    c = 0
    while done < mc_size:
        size = min(chunk, mc_size - done)
        tail = gumbel_upper_tail_sample(_sub(rng, c), model.copula, size)
        for a in alphas:
            masks = {
                "ES": tail[:, j] < a,
                "MMES": np.all(tail[:, others] <= a, axis=1),
                "DCTE": np.all(tail <= a, axis=1),
            }
            for m in metrics:
                sel = tail[masks[m], j]
                acc[(m, a)].add(student_t_isf(sel, model.margins[j]) if sel.size else sel)
        done += size
        c += 1
    out = {}
    for (m, a), mom in acc.items():
        if mom.n:
            mean = mom.total / mom.n
            var = max(mom.total_sq / mom.n - mean * mean, 0.0)
            se = math.sqrt(var / mom.n)
        else:
            mean, se = math.nan, math.inf
        out[(m, a)] = OracleResult(m, j, a, mean, se, mom.n, mc_size, mom.n < 100)
    return out


def trm_oracle(model: JointModel, metric: str, j: int, alpha: float, mc_size: int, rng) -> OracleResult:
    if metric not in METRICS:
        raise UnsupportedMethodError(f"unknown metric {metric!r}")
    return trm_oracle_table(model, j, [alpha], mc_size, rng, metrics=(metric,))[(metric, float(alpha))]
