"""Seedable random streams and the few distributions the pipeline needs.

Streams are Philox generators keyed by ``SeedSequence(seed, spawn_key=...)``;
distinct stream numbers (or derived sub-keys) never share a key, so replicate
streams are independent by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DomainError, EmptyRequestError, FactorizationError, ShapeError

_U64 = 2**64


@dataclass(frozen=True)
class RngState:
    """Identifies a random stream: ``(seed, stream)`` plus an optional sub-key path.

    The state itself is immutable; :meth:`generator` builds a fresh generator
    positioned at the start of the stream every time it is called.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not (0 <= int(value) < _U64):
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def derive(self, *keys: int) -> "RngState":
        """Child stream, disjoint from ``self`` and from children with other keys."""
        return RngState(self.seed, self.stream, self.path + tuple(int(k) for k in keys))

    def with_stream(self, stream: int) -> "RngState":
        return RngState(self.seed, stream)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *self.path))
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngState` or an existing ``numpy`` generator."""
    if isinstance(rng, RngState):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngState or numpy Generator, got {type(rng).__name__}")


def _sub(rng, key):
    # RngState children are disjoint streams; a live Generator is consumed in order.
    return rng.derive(key) if isinstance(rng, RngState) else rng


def _check_count(count):
    count = int(count)
    if count < 1:
        raise EmptyRequestError(f"count must be at least 1, got {count}")
    return count


@dataclass(frozen=True)
class StudentTParams:
    nu: float
    location: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.nu > 1.0) or not math.isfinite(self.nu):
            raise DomainError(f"degrees of freedom must be finite and > 1, got {self.nu}")
        if not (self.scale > 0.0) or not math.isfinite(self.scale):
            raise DomainError(f"scale must be finite and > 0, got {self.scale}")
        if not math.isfinite(self.location):
            raise DomainError(f"location must be finite, got {self.location}")


class CorrelationMatrix:
    """Symmetric positive-definite matrix with unit diagonal, factorized on construction."""

    def __init__(self, matrix, atol: float = 1e-12):
        m = np.array(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"correlation matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.T, atol=atol, rtol=0.0):
            raise DomainError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=atol, rtol=0.0):
            raise DomainError("correlation matrix must have a unit diagonal")
        self.matrix = m
        self.chol = cholesky(m)

    @classmethod
    def from_pairs(cls, d: int, pairs: dict) -> "CorrelationMatrix":
        """Build from ``{(i, j): rho}`` with 0-based indices."""
        m = np.eye(d)
        for (i, j), rho in pairs.items():
            m[i, j] = m[j, i] = rho
        return cls(m)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]


def cholesky(a) -> np.ndarray:
    """Lower-triangular Cholesky factor; reports the first non-positive leading minor."""
    a = np.asarray(a, dtype=np.float64)
    d = a.shape[0]
    L = np.zeros_like(a)
    for j in range(d):
        pivot = a[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0.0:
            raise FactorizationError(j + 1)
        L[j, j] = math.sqrt(pivot)
        if j + 1 < d:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def sample_exponential(rng, count: int) -> np.ndarray:
    count = _check_count(count)
    return as_generator(rng).standard_exponential(count)


def sample_mvn(rng, corr: CorrelationMatrix, count: int) -> np.ndarray:
    """``count`` rows of a centred Gaussian vector with correlation ``corr``."""
    count = _check_count(count)
    if not isinstance(corr, CorrelationMatrix):
        corr = CorrelationMatrix(corr)
    g = as_generator(rng).standard_normal((count, corr.d))
    return g @ corr.chol.T


def sample_positive_stable(rng, index: float, count: int) -> np.ndarray:
    """Positive stable draws with Laplace transform ``E[exp(-tS)] = exp(-t**index)``.

    Chambers-Mallows-Stuck construction in Kanter's form with ``U`` uniform on
    ``(0, pi)`` and ``W`` unit exponential::

        S = sin(a U) / sin(U)**(1/a) * (sin((1-a) U) / W)**((1-a)/a)

    This is the normalization the Marshall-Olkin Gumbel sampler needs; at
    ``index = 1/2`` it is the Levy law with scale 1/2.
    """
    count = _check_count(count)
    a = float(index)
    if not (0.0 < a <= 1.0):
        raise DomainError(f"stable index must lie in (0, 1], got {index}")
    if a == 1.0:
        return np.ones(count)
    gen = as_generator(rng)
    u = math.pi * gen.random(count)
    w = gen.standard_exponential(count)
    # guard the open interval; random() can return exactly 0
    u = np.where(u == 0.0, math.pi * 2.0**-54, u)
    with np.errstate(over="ignore", under="ignore"):
        s = np.sin(a * u) / np.sin(u) ** (1.0 / a) * (np.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a)
    return np.maximum(s, np.finfo(float).tiny)


def student_t_cdf(x, p: StudentTParams):
    z = (np.asarray(x, dtype=np.float64) - p.location) / p.scale
    return kernels.t_sf(-z, p.nu)


def student_t_sf(x, p: StudentTParams):
    z = (np.asarray(x, dtype=np.float64) - p.location) / p.scale
    return kernels.t_sf(z, p.nu)


def student_t_quantile(u, p: StudentTParams):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    # F^{-1}(u) = -isf(u) by symmetry of the standard law
    return p.location - p.scale * kernels.t_isf(u, p.nu)


def student_t_isf(q, p: StudentTParams):
    """Upper-tail quantile: the x with P(X > x) = q, accurate for tiny ``q``."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(~((q > 0.0) & (q < 1.0))):
        raise DomainError("tail probability must lie strictly inside (0, 1)")
    return p.location + p.scale * kernels.t_isf(q, p.nu)


def student_t_logpdf(x, p: StudentTParams):
    z = (np.asarray(x, dtype=np.float64) - p.location) / p.scale
    return kernels.t_logpdf(z, p.nu) - math.log(p.scale)
