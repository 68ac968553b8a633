"""Spectral bootstrap of standard MGP samples, and the standard <-> general MGP maps.

A standard MGP vector decomposes as Z = E + Delta with E unit exponential and
Delta_j = Z_j - max_k Z_k independent of E. The bootstrap keeps the observed
Delta rows (the joint tail shape), resamples them with replacement, and pairs
each with a fresh exponential draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyRequestError, ShapeError, SupportError
from .rand_core import _check_count, _sub, as_generator

GAMMA_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class MgpParams:
    sigma: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=np.float64))
        if sigma.shape != gamma.shape:
            raise ShapeError("sigma and gamma must have the same length")
        if np.any(~(sigma > 0.0)):
            raise DomainError("MGP scales must be positive")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)


@dataclass(frozen=True)
class BootstrapSample:
    z_star: np.ndarray
    e_draws: np.ndarray
    source_indices: np.ndarray


def compute_deltas(z) -> np.ndarray:
    """Delta_{i,j} = Z_{i,j} - max_k Z_{i,k}; each row maximum is exactly 0."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2:
        raise ShapeError(f"expected an n x d matrix, got shape {z.shape}")
    if z.shape[0] == 0:
        raise EmptyRequestError("no rows to compute deltas from")
    if z.shape[1] < 2:
        raise ShapeError("deltas need at least two components")
    if not np.all(np.isfinite(z)):
        raise DomainError("deltas of non-finite samples are not supported")
    delta = z - z.max(axis=1, keepdims=True)
    # x - x is +0.0 in IEEE arithmetic, so the arg-max entries are exact zeros
    return delta


def spectral_bootstrap(rng, deltas, m: int) -> BootstrapSample:
    """Draw ``m`` standard MGP vectors Z*_l = E_l + Delta*_l.

    E_l are i.i.d. unit exponential; Delta*_l are rows of ``deltas`` resampled
    uniformly with replacement, from a stream independent of the E draws.
    """
    deltas = np.asarray(deltas, dtype=np.float64)
    if deltas.ndim != 2 or deltas.shape[0] == 0:
        raise EmptyRequestError("need a nonempty delta matrix")
    m = _check_count(m)
    e = as_generator(_sub(rng, 0)).standard_exponential(m)
    idx = as_generator(_sub(rng, 1)).integers(0, deltas.shape[0], size=m)
    z_star = e[:, None] + deltas[idx]
    return BootstrapSample(z_star, e, idx)


def _check_params(x, p: MgpParams):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.sigma.size:
        raise ShapeError(f"parameters have {p.sigma.size} components, data has {x.shape[-1]}")
    return x


def standard_to_general(z, p: MgpParams) -> np.ndarray:
    """Y = sigma (exp(gamma Z) - 1) / gamma, with the limit sigma Z at gamma ~ 0."""
    z = _check_params(z, p)
    small = np.abs(p.gamma) < GAMMA_ZERO_TOL
    g = np.where(small, 1.0, p.gamma)
    return np.where(small, p.sigma * z, p.sigma * np.expm1(g * z) / g)


def general_to_standard(y, p: MgpParams) -> np.ndarray:
    """Z = log(1 + gamma Y / sigma) / gamma, with the limit Y / sigma at gamma ~ 0."""
    y = _check_params(y, p)
    small = np.abs(p.gamma) < GAMMA_ZERO_TOL
    g = np.where(small, 1.0, p.gamma)
    arg = g * y / p.sigma
    bad = ~small & ~(1.0 + arg > 0.0)
    if np.any(bad):
        j = int(np.flatnonzero(bad.reshape(-1, p.sigma.size).any(axis=0))[0])
        raise SupportError(f"1 + gamma*y/sigma <= 0 in component {j}", component=j)
    return np.where(small, y / p.sigma, np.log1p(np.where(small, 0.0, arg)) / g)
