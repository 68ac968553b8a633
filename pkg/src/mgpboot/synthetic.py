"""Ground-truth generators: Gumbel copula with Student-t margins, and exact standard MGP vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .rand_core import (
    CorrelationMatrix,
    StudentTParams,
    _check_count,
    _sub,
    as_generator,
    sample_exponential,
    sample_mvn,
    sample_positive_stable,
    student_t_isf,
)

# theta this close to 1 is treated as exact independence
THETA_INDEPENDENCE_TOL = 1e-8


@dataclass(frozen=True)
class GumbelCopula:
    theta: float
    d: int = 3

    def __post_init__(self):
        if not self.theta >= 1.0:
            raise DomainError(f"Gumbel parameter must be >= 1, got {self.theta}")
        if int(self.d) < 2:
            raise DomainError(f"copula dimension must be >= 2, got {self.d}")

    @property
    def independent(self) -> bool:
        return self.theta - 1.0 < THETA_INDEPENDENCE_TOL


@dataclass(frozen=True)
class JointModel:
    copula: GumbelCopula
    margins: tuple[StudentTParams, ...]

    def __post_init__(self):
        object.__setattr__(self, "margins", tuple(self.margins))
        if len(self.margins) != self.copula.d:
            raise ShapeError(
                f"{len(self.margins)} margins given for a {self.copula.d}-dimensional copula"
            )

    @classmethod
    def student(cls, nu, theta, location=0.0, scale=1.0) -> "JointModel":
        margins = tuple(StudentTParams(float(v), location, scale) for v in nu)
        return cls(GumbelCopula(theta, len(margins)), margins)

    @property
    def d(self) -> int:
        return self.copula.d


@dataclass(frozen=True)
class SpectralModel:
    """Law of the spectral vector T: centred Gaussian with correlation ``corr``."""

    corr: CorrelationMatrix

    @property
    def d(self) -> int:
        return self.corr.d


def gumbel_copula_cdf(c: GumbelCopula, y) -> np.ndarray:
    """C(y) = exp(-(sum_i (-log y_i)^theta)^(1/theta)); rows of ``y`` are evaluated independently."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != c.d:
        raise ShapeError(f"expected last dimension {c.d}, got {y.shape[-1]}")
    if np.any(~(y > 0.0)) or np.any(y > 1.0):
        raise DomainError("copula arguments must lie in (0, 1]")
    s = (-np.log(y)) ** c.theta
    return np.exp(-np.sum(s, axis=-1) ** (1.0 / c.theta))


def _gumbel_latent(rng, c: GumbelCopula, count: int) -> np.ndarray:
    # w = (E/S)^(1/theta); the copula sample is U = exp(-w), and 1 - U = -expm1(-w)
    # keeps the upper tail precise.
    count = _check_count(count)
    e = as_generator(_sub(rng, 1)).standard_exponential((count, c.d))
    if c.independent:
        return e
    s = sample_positive_stable(_sub(rng, 0), 1.0 / c.theta, count)
    return (e / s[:, None]) ** (1.0 / c.theta)


def gumbel_copula_sample(rng, c: GumbelCopula, count: int) -> np.ndarray:
    """Marshall-Olkin sampler: S positive stable(1/theta), U_j = exp(-(E_j/S)^(1/theta))."""
    return np.exp(-_gumbel_latent(rng, c, count))


def gumbel_upper_tail_sample(rng, c: GumbelCopula, count: int) -> np.ndarray:
    """Same draw as :func:`gumbel_copula_sample` but returns ``1 - U`` at full precision."""
    return -np.expm1(-_gumbel_latent(rng, c, count))


def sample_joint_model(rng, model: JointModel, count: int) -> np.ndarray:
    """Original-scale rows: copula draws pushed through the Student-t quantile per column."""
    tail = gumbel_upper_tail_sample(rng, model.copula, count)
    x = np.empty_like(tail)
    for j, margin in enumerate(model.margins):
        x[:, j] = student_t_isf(tail[:, j], margin)
    return x


def sample_standard_mgp(rng, model: SpectralModel, count: int) -> np.ndarray:
    """Z = E + T - max_k T_k with E unit exponential independent of T ~ N(0, corr)."""
    count = _check_count(count)
    t = sample_mvn(_sub(rng, 0), model.corr, count)
    e = sample_exponential(_sub(rng, 1), count)
    # argmax picks the first index on ties, so the centring is deterministic
    tmax = t[np.arange(count), np.argmax(t, axis=1)]
    return e[:, None] + (t - tmax[:, None])
