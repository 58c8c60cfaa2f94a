"""Empirical rotary-angle distributions by exact enumeration of positions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError
from .rope import TAU, RopeConfig, ThetaLike, ThetaVector, as_theta_vector, phase_bins

__all__ = [
    "DEFAULT_BINS",
    "MAX_BINS",
    "AngleHistogram",
    "DistributionSet",
    "bucket_index",
    "bin_counts",
    "estimate_histogram",
    "estimate_set",
    "base_distribution",
]

DEFAULT_BINS = 360
MAX_BINS = 1_000_000


def _check_bins(b) -> int:
    if isinstance(b, bool) or not isinstance(b, (int, np.integer)) or not 1 <= b <= MAX_BINS:
        raise DomainError(f"bins must be an integer in [1, {MAX_BINS}], got {b!r}")
    return int(b)


def _check_length(length) -> int:
    if isinstance(length, bool) or not isinstance(length, (int, np.integer)) or length < 1:
        raise DomainError(f"length must be a positive integer, got {length!r}")
    return int(length)


@dataclass(frozen=True, eq=False)
class AngleHistogram:
    """Frequencies of reduced rotary angles over ``b`` equal intervals of ``[0, 2 pi)``.

    ``freqs[k] = counts[k] / sample_count``; the integer counts are kept so
    they can be recovered exactly.
    """

    dim_pair: int
    theta: float
    counts: np.ndarray
    sample_count: int
    freqs: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise DimensionError("counts must be a non-empty 1-D array")
        if counts.sum() != self.sample_count:
            raise DimensionError(
                f"counts sum to {counts.sum()}, expected sample_count={self.sample_count}"
            )
        counts.setflags(write=False)
        freqs = counts / float(self.sample_count)
        freqs.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "freqs", freqs)

    @property
    def bins(self) -> int:
        return self.counts.size

    def bin_left(self) -> np.ndarray:
        """Left edge (radians) of every interval."""
        return np.arange(self.bins) * (TAU / self.bins)

    def support(self) -> np.ndarray:
        """Boolean mask of non-empty intervals."""
        return self.counts > 0


@dataclass(frozen=True, eq=False)
class DistributionSet:
    config: RopeConfig
    thetas: ThetaVector
    length: int
    bins: int
    histograms: tuple

    def __post_init__(self):
        if len(self.histograms) != self.config.n_pairs:
            raise DimensionError(
                f"expected {self.config.n_pairs} histograms, got {len(self.histograms)}"
            )
        for i, h in enumerate(self.histograms):
            if h.dim_pair != i or h.bins != self.bins or h.sample_count != self.length:
                raise DimensionError(f"histogram {i} is inconsistent with the set")

    def __len__(self):
        return len(self.histograms)

    def __getitem__(self, i) -> AngleHistogram:
        return self.histograms[i]

    def freq_matrix(self) -> np.ndarray:
        """``(d/2, b)`` array of frequencies."""
        return np.stack([h.freqs for h in self.histograms])


def bucket_index(angle: float, b: int) -> int:
    """Interval index ``floor(angle * b / 2 pi)`` of an angle in ``[0, 2 pi)``."""
    b = _check_bins(b)
    a = float(angle)
    if not (0.0 <= a < TAU):
        raise DomainError(f"angle must lie in [0, 2*pi), got {angle}")
    return min(int(math.floor(a * b / TAU)), b - 1)


@lru_cache(maxsize=16)
def _arange(n: int) -> np.ndarray:
    a = np.arange(n, dtype=np.int64)
    a.setflags(write=False)
    return a


def bin_counts(theta_i: float, length: int, b: int) -> np.ndarray:
    """Integer counts of angles ``m * theta`` for ``m = 0 .. length - 1`` per interval."""
    length = _check_length(length)
    b = _check_bins(b)
    return np.bincount(phase_bins(_arange(length), theta_i, b), minlength=b)


def estimate_histogram(theta_i: float, length: int, b: int = DEFAULT_BINS, dim_pair: int = 0) -> AngleHistogram:
    """Histogram of the rotary angles of one dimension pair over positions ``[0, length)``."""
    length = _check_length(length)
    return AngleHistogram(dim_pair, float(theta_i), bin_counts(theta_i, length, b), length)


def estimate_set(config: RopeConfig, thetas: ThetaLike, length: int, b: int = DEFAULT_BINS) -> DistributionSet:
    """One histogram per dimension pair, generated by ``thetas`` over ``length`` positions."""
    tv = as_theta_vector(thetas)
    tv.check_config(config)
    length = _check_length(length)
    b = _check_bins(b)
    hists = tuple(estimate_histogram(t, length, b, dim_pair=i) for i, t in enumerate(tv.values))
    return DistributionSet(config, tv, length, b, hists)


@lru_cache(maxsize=32)
def _base_distribution(config: RopeConfig, b: int) -> DistributionSet:
    from .rope import base_theta

    return estimate_set(config, base_theta(config), config.pretrain_len, b)


def base_distribution(config: RopeConfig, b: int = DEFAULT_BINS) -> DistributionSet:
    """Pre-training distribution set: unmodified frequencies over ``[0, L)``. Cached."""
    return _base_distribution(config, _check_bins(b))


def select_dims(dset: DistributionSet, dims: Sequence[int] | None) -> list[AngleHistogram]:
    if dims is None:
        return list(dset.histograms)
    out = []
    for i in dims:
        if not 0 <= i < len(dset):
            raise DimensionError(f"dimension pair {i} out of range [0, {len(dset) - 1}]")
        out.append(dset[i])
    return out
