"""Epsilon-smoothed KL disturbance between extended and pre-trained angle distributions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distribution import DEFAULT_BINS, AngleHistogram, base_distribution, estimate_histogram
from .errors import DimensionError, DomainError
from .rope import RopeConfig, ThetaLike, as_theta_vector, base_theta

__all__ = [
    "DEFAULT_EPSILON",
    "kl_disturbance",
    "aggregate",
    "ThetaDisturbance",
    "DimDisturbance",
    "DisturbanceReport",
    "disturbance_of_thetas",
    "extension_margins",
    "ood_bins",
]

DEFAULT_EPSILON = 1e-8


def _check_epsilon(epsilon) -> float:
    eps = float(epsilon)
    if not math.isfinite(eps) or eps <= 0:
        raise DomainError(f"epsilon must be finite and > 0, got {epsilon}")
    return eps


def _freqs(p) -> np.ndarray:
    return p.freqs if isinstance(p, AngleHistogram) else np.asarray(p, dtype=np.float64)


def kl_disturbance(p_new, p_old, epsilon: float = DEFAULT_EPSILON) -> float:
    """``sum_k F'_k log((F'_k + eps) / (F_k + eps))`` with the natural log.

    ``p_new`` and ``p_old`` are :class:`AngleHistogram` objects or plain
    frequency arrays. Bins with ``F'_k = 0`` contribute exactly zero.
    """
    eps = _check_epsilon(epsilon)
    new = _freqs(p_new)
    old = _freqs(p_old)
    if new.shape != old.shape:
        raise DimensionError(f"bin counts differ: {new.shape} vs {old.shape}")
    mask = new > 0
    fn = new[mask]
    return math.fsum(fn * np.log((fn + eps) / (old[mask] + eps)))


def aggregate(per_dim) -> float:
    """``2 * sum_i D_i / d``, i.e. the mean over dimension pairs (exactly rounded sum)."""
    vals = np.asarray(per_dim, dtype=np.float64)
    return 2.0 * math.fsum(vals) / (2 * vals.size)


def ood_bins(p_new: AngleHistogram, p_old: AngleHistogram) -> np.ndarray:
    """Mask of intervals empty before extension but populated after it."""
    return (p_old.counts == 0) & (p_new.counts > 0)


@dataclass(frozen=True, eq=False)
class ThetaDisturbance:
    """Per-pair disturbance of one frequency vector and its aggregate."""

    per_dim: np.ndarray
    aggregate: float
    target_len: int
    bins: int
    epsilon: float


def _check_target(config: RopeConfig, target_len) -> int:
    if isinstance(target_len, bool) or not isinstance(target_len, (int, np.integer)):
        raise DomainError(f"target_len must be an integer, got {target_len!r}")
    return int(target_len)


def _per_dim(config, thetas, target_len, b, eps) -> np.ndarray:
    ref = base_distribution(config, b)
    out = np.empty(config.n_pairs)
    for i, t in enumerate(thetas):
        out[i] = kl_disturbance(estimate_histogram(t, target_len, b, i), ref[i], eps)
    return out


def disturbance_of_thetas(
    thetas_hat: ThetaLike,
    config: RopeConfig,
    target_len: int,
    b: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
) -> ThetaDisturbance:
    """Score any frequency vector against the pre-trained distribution.

    Positions ``[0, target_len)`` under ``thetas_hat`` are compared with
    positions ``[0, L)`` under the unmodified frequencies.
    """
    tv = as_theta_vector(thetas_hat)
    tv.check_config(config)
    target_len = _check_target(config, target_len)
    if target_len < config.pretrain_len:
        raise DomainError(
            f"target_len ({target_len}) must be >= pretrain_len ({config.pretrain_len})"
        )
    eps = _check_epsilon(epsilon)
    per_dim = _per_dim(config, tv.values, target_len, b, eps)
    per_dim.setflags(write=False)
    return ThetaDisturbance(per_dim, aggregate(per_dim), target_len, b, eps)


@dataclass(frozen=True)
class DimDisturbance:
    dim_pair: int
    d_ext: float
    d_int: float

    @property
    def margin(self) -> float:
        return self.d_ext - self.d_int


@dataclass(frozen=True, eq=False)
class DisturbanceReport:
    """Extrapolation vs. interpolation disturbance for every dimension pair."""

    per_dim: tuple
    pretrain_len: int
    target_len: int
    bins: int
    epsilon: float

    @property
    def d_ext(self) -> np.ndarray:
        return np.array([r.d_ext for r in self.per_dim])

    @property
    def d_int(self) -> np.ndarray:
        return np.array([r.d_int for r in self.per_dim])

    @property
    def margins(self) -> np.ndarray:
        return np.array([r.margin for r in self.per_dim])

    @property
    def aggregate_ext(self) -> float:
        return aggregate(self.d_ext)

    @property
    def aggregate_int(self) -> float:
        return aggregate(self.d_int)

    @property
    def scale(self) -> float:
        return self.target_len / self.pretrain_len


def extension_margins(
    config: RopeConfig,
    target_len: int,
    b: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
) -> DisturbanceReport:
    """Disturbance of pure extrapolation and of interpolation by ``s = L'/L``, pair by pair."""
    target_len = _check_target(config, target_len)
    if target_len <= config.pretrain_len:
        raise DomainError(
            f"target_len ({target_len}) must exceed pretrain_len ({config.pretrain_len})"
        )
    eps = _check_epsilon(epsilon)
    s = target_len / config.pretrain_len
    th = base_theta(config).values
    d_ext = _per_dim(config, th, target_len, b, eps)
    d_int = _per_dim(config, th / s, target_len, b, eps)
    rows = tuple(DimDisturbance(i, float(e), float(n)) for i, (e, n) in enumerate(zip(d_ext, d_int)))
    return DisturbanceReport(rows, config.pretrain_len, target_len, b, eps)
