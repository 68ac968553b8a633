"""Marginal models and the move between original and unit-exponential scales.

Forward: X^E_j = -log(1 - F_j(X_j)), computed from the survival function so the
upper tail keeps full precision. Backward: X_j = F_j^{-1}(1 - exp(-e_j)), i.e.
the upper-tail quantile at exp(-e_j). The two are exact inverses, which is what
makes the standardized margins unit exponential.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, DomainError, EmptyExceedanceError, FitError, ShapeError
from .rand_core import StudentTParams, student_t_isf, student_t_logpdf, student_t_sf

log = logging.getLogger(__name__)

KNOWN = "known-student-t"
FITTED = "fitted-student-t"
EMPIRICAL = "empirical"
KINDS = (KNOWN, FITTED, EMPIRICAL)

PROB_CLAMP = 1e-12
DEFAULT_FLOOR = 1e-6
DEFAULT_THRESHOLD_LEVEL = 0.95

NU_MAX = 200.0
NU_MIN = 1.0 + 1e-6
_NU_GRID = np.geomspace(1.05, NU_MAX, 32)
_EM_TOL = 1e-8
_EM_MAXIT = 2000
_GOLDEN_TOL = 1e-6


# ---------------------------------------------------------------------------
# Student-t maximum likelihood
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StudentTFit:
    params: StudentTParams
    loglik: float
    init_loglik: float
    near_gaussian: bool
    evaluations: int


def _t_loglik(x, nu, loc, scale):
    return float(np.sum(student_t_logpdf(x, StudentTParams(nu, loc, scale))))


def _profile(x, nu, loc, scale):
    """Maximize over (loc, scale) at fixed nu by EM (iteratively reweighted means)."""
    n = x.size
    ll = _t_loglik(x, nu, loc, scale)
    for _ in range(_EM_MAXIT):
        z = (x - loc) / scale
        w = (nu + 1.0) / (nu + z * z)
        loc = float(np.sum(w * x) / np.sum(w))
        scale = math.sqrt(float(np.sum(w * (x - loc) ** 2)) / n)
        ll_new = _t_loglik(x, nu, loc, scale)
        if abs(ll_new - ll) <= _EM_TOL * n:
            return ll_new, loc, scale
        ll = ll_new
    raise ConvergenceError(
        f"location/scale iterations did not converge at nu={nu:.6g}",
        last_iterate=(nu, loc, scale),
    )


def _moment_start(x):
    mean = float(np.mean(x))
    sd = float(np.std(x))
    excess = float(np.mean((x - mean) ** 4)) / sd**4 - 3.0
    nu = 4.0 + 6.0 / excess if excess > 0 else NU_MAX
    nu = min(max(nu, 2.1), NU_MAX)
    return nu, mean, sd * math.sqrt((nu - 2.0) / nu)


def fit_student_t(sample) -> StudentTFit:
    """Maximum-likelihood Student-t fit with nu constrained to (1, 200].

    The likelihood is profiled over nu: a log-spaced grid locates the basin and
    a golden-section search on log(nu) refines it. Each profile evaluation runs
    EM for location and scale, warm-started from the nearest grid point, until
    the log-likelihood moves by less than 1e-8 per observation.
    """
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < 30:
        raise FitError(f"need at least 30 observations to fit, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FitError("sample contains non-finite values")
    if not np.var(x) > 0.0:
        raise FitError("sample is degenerate (zero variance)")

    nu0, loc0, scale0 = _moment_start(x)
    init_ll = _t_loglik(x, nu0, loc0, scale0)
    evals = 0
    cache = {}

    def profile(nu, start):
        nonlocal evals
        if nu not in cache:
            evals += 1
            cache[nu] = _profile(x, nu, *start)
        return cache[nu]

    start = (loc0, scale0)
    grid = []
    for nu in _NU_GRID[::-1]:
        res = profile(float(nu), start)
        start = res[1:]
        grid.append((float(nu), res))
    grid.reverse()
    best = max(range(len(grid)), key=lambda i: grid[i][1][0])
    lo = grid[best - 1][0] if best > 0 else NU_MIN
    hi = grid[best + 1][0] if best + 1 < len(grid) else NU_MAX
    seed_start = grid[best][1][1:]

    # golden-section on log(nu)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = math.log(lo), math.log(hi)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc = profile(math.exp(c), seed_start)
    fd = profile(math.exp(d), seed_start)
    while b - a > _GOLDEN_TOL:
        if fc[0] >= fd[0]:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = profile(math.exp(c), fd[1:])
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = profile(math.exp(d), fc[1:])

    candidates = [(math.exp(c), fc), (math.exp(d), fd), grid[best]]
    if hi == NU_MAX:
        candidates.append((NU_MAX, profile(NU_MAX, seed_start)))
    nu_hat, (ll, loc, scale) = max(candidates, key=lambda item: item[1][0])
    near_gaussian = nu_hat >= NU_MAX * (1.0 - 1e-4)
    if near_gaussian:
        nu_hat = NU_MAX
        ll, loc, scale = profile(NU_MAX, (loc, scale))
    if ll < init_ll:
        raise FitError(f"optimum log-likelihood {ll} below the moment start {init_ll}")
    return StudentTFit(StudentTParams(nu_hat, loc, scale), ll, init_ll, near_gaussian, evals)


# ---------------------------------------------------------------------------
# marginal models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalModel:
    """Per-component marginal laws: Student-t (known or fitted) or empirical."""

    kind: str
    params: tuple[StudentTParams, ...] | None = None
    sorted_samples: tuple[np.ndarray, ...] | None = None
    fits: tuple[StudentTFit, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown marginal kind {self.kind!r}")
        if self.kind == EMPIRICAL:
            if not self.sorted_samples:
                raise DomainError("empirical margins need samples")
        elif not self.params:
            raise DomainError("Student-t margins need parameters")

    @classmethod
    def known(cls, params) -> "MarginalModel":
        return cls(KNOWN, params=tuple(params))

    @classmethod
    def fitted(cls, x) -> "MarginalModel":
        x = _as_matrix(x)
        fits = tuple(fit_student_t(x[:, j]) for j in range(x.shape[1]))
        for j, fit in enumerate(fits):
            log.info("column %d: nu=%.4g loc=%.4g scale=%.4g", j, *_triple(fit.params))
        return cls(FITTED, params=tuple(f.params for f in fits), fits=fits)

    @classmethod
    def empirical(cls, x) -> "MarginalModel":
        x = _as_matrix(x)
        return cls(EMPIRICAL, sorted_samples=tuple(np.sort(x[:, j]) for j in range(x.shape[1])))

    @property
    def d(self) -> int:
        return len(self.params) if self.params is not None else len(self.sorted_samples)

    @property
    def is_student(self) -> bool:
        return self.kind in (KNOWN, FITTED)

    def sf(self, x) -> np.ndarray:
        x = self._check(x)
        out = np.empty_like(x)
        for j in range(self.d):
            if self.is_student:
                out[:, j] = student_t_sf(x[:, j], self.params[j])
            else:
                s = self.sorted_samples[j]
                out[:, j] = (s.size + 1 - np.searchsorted(s, x[:, j], side="right")) / (s.size + 1)
        return out

    def isf(self, q) -> np.ndarray:
        q = self._check(q)
        out = np.empty_like(q)
        for j in range(self.d):
            if self.is_student:
                out[:, j] = student_t_isf(q[:, j], self.params[j])
            else:
                s = self.sorted_samples[j]
                positions = np.arange(1, s.size + 1) / (s.size + 1)
                out[:, j] = np.interp(1.0 - q[:, j], positions, s)
        return out

    def _check(self, x):
        x = _as_matrix(x)
        if x.shape[1] != self.d:
            raise ShapeError(f"expected {self.d} columns, got {x.shape[1]}")
        return x


def _triple(p):
    return p.nu, p.location, p.scale


def _as_matrix(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-d sample matrix, got {x.ndim} dimensions")
    return x


# ---------------------------------------------------------------------------
# scale changes and exceedances
# ---------------------------------------------------------------------------


class BackTransformed(NamedTuple):
    values: np.ndarray
    floored: int


@dataclass(frozen=True)
class ThresholdVector:
    u_exp: np.ndarray
    marginal_quantile_level: float
    degenerate: tuple[bool, ...] = ()

    def __post_init__(self):
        u = np.asarray(self.u_exp, dtype=np.float64)
        if u.ndim != 1 or not np.all(np.isfinite(u)) or np.any(u < 0.0):
            raise DomainError("threshold must be a finite, nonnegative vector")
        object.__setattr__(self, "u_exp", u)


@dataclass(frozen=True)
class ExceedanceSet:
    excesses: np.ndarray
    threshold: ThresholdVector
    source_count: int
    rows: np.ndarray

    @property
    def k(self) -> int:
        return self.excesses.shape[0]


def to_exponential_scale(x, model: MarginalModel) -> np.ndarray:
    s = np.clip(model.sf(x), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -np.log(s)


def from_exponential_scale(e, model: MarginalModel, floor: float = DEFAULT_FLOOR) -> BackTransformed:
    """Map exponential-scale values back through the marginal quantiles.

    Values at or below ``floor`` (reachable after bootstrapping, since a delta
    can be very negative) are raised to ``floor`` and counted.
    """
    e = model._check(e)
    low = e < floor
    q = np.exp(-np.where(low, floor, e))
    return BackTransformed(model.isf(q), int(np.count_nonzero(low)))


def select_threshold(x_exp, marginal_level: float = DEFAULT_THRESHOLD_LEVEL) -> ThresholdVector:
    """u_j = empirical ``marginal_level`` quantile of column j."""
    if not (0.5 <= marginal_level < 1.0):
        raise DomainError(f"threshold level must lie in [0.5, 1), got {marginal_level}")
    x = _as_matrix(x_exp)
    u = np.quantile(x, marginal_level, axis=0)
    degenerate = tuple(bool(np.ptp(x[:, j]) == 0.0) for j in range(x.shape[1]))
    if any(degenerate):
        log.warning("constant column(s) %s: threshold is degenerate", [j for j, dg in enumerate(degenerate) if dg])
    return ThresholdVector(u, float(marginal_level), degenerate)


def extract_exceedances(x_exp, u: ThresholdVector) -> ExceedanceSet:
    """Rows exceeding the threshold in at least one component, as Z = X^E - u."""
    x = _as_matrix(x_exp)
    if x.shape[1] != u.u_exp.size:
        raise ShapeError(f"threshold has {u.u_exp.size} components, data has {x.shape[1]}")
    z = x - u.u_exp
    rows = np.flatnonzero(z.max(axis=1) > 0.0)
    if rows.size == 0:
        raise EmptyExceedanceError(
            f"no observation exceeds the level-{u.marginal_quantile_level} threshold; lower the threshold level"
        )
    return ExceedanceSet(z[rows], u, x.shape[0], rows)
