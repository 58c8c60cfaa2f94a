"""RoPE fundamentals: frequencies, wavelengths, reduced rotary angles and rotations.

Angles ``m * theta mod 2*pi`` are reduced in double-double arithmetic: the
product of an integer position and a float frequency is formed exactly
(Dekker's two-product) and divided by a two-word representation of 2*pi. This
keeps the reduced angle, and therefore its histogram bin, correct to well
below one ulp for positions up to ~1e6 and beyond, where a naive
``np.mod(m * theta, 2 * np.pi)`` loses ~1e-10 rad and can move samples across
bin edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigurationError, DimensionError, DomainError

__all__ = [
    "RopeConfig",
    "ThetaVector",
    "LLAMA2",
    "base_theta",
    "wavelength",
    "wavelength_ratio",
    "rotary_angle",
    "phase_bins",
    "apply_rotation",
    "verify_relative_property",
]

TAU = math.tau
# 2*pi - fl(2*pi)
TAU_LO = 2.4492935982947064e-16

_SPLITTER = 134217729.0  # 2**27 + 1


@dataclass(frozen=True)
class RopeConfig:
    """Shape of a RoPE attention head.

    Parameters
    ----------
    head_dim : int
        Number of scalar dimensions per head, ``d``. Must be even.
    base : float
        RoPE base; frequencies are ``base ** (-2 i / d)``.
    pretrain_len : int
        Pre-training context length ``L``.
    """

    head_dim: int
    base: float = 10000.0
    pretrain_len: int = 4096

    def __post_init__(self):
        d = self.head_dim
        if isinstance(d, bool) or not isinstance(d, (int, np.integer)):
            raise ConfigurationError(f"head_dim must be an integer, got {d!r}")
        if d < 2 or d % 2:
            raise ConfigurationError(f"head_dim must be even and >= 2, got {d}")
        try:
            base = float(self.base)
        except (TypeError, ValueError):
            raise ConfigurationError(f"base must be a real number, got {self.base!r}") from None
        if not math.isfinite(base) or base <= 1.0:
            raise ConfigurationError(f"base must be finite and > 1, got {self.base}")
        L = self.pretrain_len
        if isinstance(L, bool) or not isinstance(L, (int, np.integer)) or L < 1:
            raise ConfigurationError(f"pretrain_len must be a positive integer, got {L!r}")
        object.__setattr__(self, "head_dim", int(d))
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "pretrain_len", int(L))

    @property
    def n_pairs(self) -> int:
        return self.head_dim // 2


LLAMA2 = RopeConfig(head_dim=128, base=10000.0, pretrain_len=4096)


@dataclass(frozen=True, eq=False)
class ThetaVector:
    """Per-pair angular frequencies (radians per token), one entry per dimension pair."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError(f"theta vector must be a non-empty 1-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise DomainError("theta values must be finite and > 0")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, ThetaVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    def check_config(self, config: RopeConfig) -> None:
        if len(self) != config.n_pairs:
            raise DimensionError(
                f"theta vector has {len(self)} entries, config expects {config.n_pairs}"
            )


ThetaLike = Union[ThetaVector, np.ndarray, list, tuple]


def as_theta_vector(thetas: ThetaLike) -> ThetaVector:
    return thetas if isinstance(thetas, ThetaVector) else ThetaVector(thetas)


def base_theta(config: RopeConfig) -> ThetaVector:
    """Unmodified RoPE frequencies ``base ** (-2 i / d)`` for ``i = 0 .. d/2 - 1``."""
    i = np.arange(config.n_pairs, dtype=np.float64)
    return ThetaVector(np.exp(-(2.0 * i / config.head_dim) * math.log(config.base)))


def wavelength(theta_i):
    """Token period ``2 pi / theta`` of a dimension pair. Accepts scalars or arrays."""
    th = np.asarray(theta_i, dtype=np.float64)
    if np.any(~np.isfinite(th)) or np.any(th <= 0):
        raise DomainError("theta must be finite and > 0")
    lam = TAU / th
    return float(lam) if lam.ndim == 0 else lam


def wavelength_ratio(config: RopeConfig, theta_i):
    """Number of full rotations seen during pre-training, ``L / wavelength``."""
    return config.pretrain_len / wavelength(theta_i)


# --- double-double helpers -------------------------------------------------

def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _dd_mul(a_hi, a_lo, b_hi, b_lo):
    p, e = _two_prod(a_hi, b_hi)
    e = e + (a_hi * b_lo + a_lo * b_hi)
    return _quick_two_sum(p, e)


def _dd_floor(hi, lo):
    f = np.floor(hi)
    return np.where(hi == f, f + np.floor(lo), f)


def _inv_tau():
    hi = 1.0 / TAU
    p, e = _two_prod(hi, TAU)
    resid = ((1.0 - p) - e) - hi * TAU_LO
    return _quick_two_sum(hi, resid / TAU)


_INV_TAU_HI, _INV_TAU_LO = _inv_tau()


def _positions(m) -> np.ndarray:
    arr = np.asarray(m)
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind == "f" and np.all(arr == np.floor(arr)):
            arr = arr.astype(np.int64)
        else:
            raise DomainError("positions must be integers")
    if np.any(arr < 0):
        raise DomainError("positions must be non-negative")
    if np.any(arr >= 2**52):
        raise DomainError("positions must be < 2**52")
    return arr


def _turn_fraction(m: np.ndarray, theta: float):
    """Fractional part of ``m * theta / (2 pi)`` as a (hi, lo) pair in [0, 1)."""
    q_hi, q_lo = _two_prod(m.astype(np.float64), np.float64(theta))
    u_hi, u_lo = _dd_mul(q_hi, q_lo, _INV_TAU_HI, _INV_TAU_LO)
    f = _dd_floor(u_hi, u_lo)
    return _two_sum(u_hi - f, u_lo)


def _check_theta_scalar(theta_i) -> float:
    th = float(theta_i)
    if not math.isfinite(th) or th <= 0:
        raise DomainError(f"theta must be finite and > 0, got {theta_i}")
    return th


_ANGLE_MAX = math.nextafter(TAU, 0.0)


def rotary_angle(m, theta_i):
    """Reduced rotary angle ``(m * theta) mod 2 pi`` in ``[0, 2 pi)``.

    ``m`` may be an integer or an integer array; the result has the same shape.
    """
    th = _check_theta_scalar(theta_i)
    pos = _positions(m)
    f_hi, f_lo = _turn_fraction(pos, th)
    a_hi, _ = _dd_mul(f_hi, f_lo, TAU, TAU_LO)
    ang = np.clip(a_hi, 0.0, _ANGLE_MAX)
    return float(ang) if ang.ndim == 0 else ang


def phase_bins(m, theta_i, bins: int) -> np.ndarray:
    """Index of the half-open interval ``[2k pi/b, 2(k+1) pi/b)`` holding each reduced angle.

    The bin is taken directly from the double-double turn fraction, so it is
    the bin of the exact real number ``m * theta mod 2 pi`` except for
    products lying within ~1e-25 rad of an interval edge.
    """
    th = _check_theta_scalar(theta_i)
    if bins < 1:
        raise DomainError(f"bins must be >= 1, got {bins}")
    pos = _positions(m)
    f_hi, f_lo = _turn_fraction(pos, th)
    b = np.float64(bins)
    p, e = _two_prod(f_hi, b)
    k = _dd_floor(*_quick_two_sum(p, e + f_lo * b))
    return np.clip(k, 0, bins - 1).astype(np.int64)


def _signed_angles(offset: int, thetas: np.ndarray) -> np.ndarray:
    ang = np.array([rotary_angle(abs(offset), t) for t in thetas])
    return -ang if offset < 0 else ang


def _rotate_pairs(vec: np.ndarray, angles: np.ndarray) -> np.ndarray:
    x = vec[0::2]
    y = vec[1::2]
    c = np.cos(angles)
    s = np.sin(angles)
    out = np.empty_like(vec)
    out[0::2] = c * x - s * y
    out[1::2] = s * x + c * y
    return out


def _as_vec(vec, n_pairs: int, name: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1 or arr.size != 2 * n_pairs:
        raise DimensionError(f"{name} must have length {2 * n_pairs}, got shape {arr.shape}")
    return arr


def apply_rotation(vec, m: int, thetas: ThetaLike) -> np.ndarray:
    """Rotate each pair ``(vec[2i], vec[2i+1])`` by ``m * theta_i``."""
    th = as_theta_vector(thetas).values
    v = _as_vec(vec, th.size, "vec")
    _positions(m)
    return _rotate_pairs(v, _signed_angles(int(m), th))


def verify_relative_property(q, k, m: int, n: int, thetas: ThetaLike) -> float:
    """Absolute gap between ``<R_m q, R_n k>`` and ``<q, R_{n-m} k>``.

    Offsets ``n - m < 0`` rotate by the negated angle.
    """
    th = as_theta_vector(thetas).values
    qv = _as_vec(q, th.size, "q")
    kv = _as_vec(k, th.size, "k")
    _positions(m)
    _positions(n)
    m, n = int(m), int(n)
    lhs = float(np.dot(_rotate_pairs(qv, _signed_angles(m, th)),
                       _rotate_pairs(kv, _signed_angles(n, th))))
    rhs = float(np.dot(qv, _rotate_pairs(kv, _signed_angles(n - m, th))))
    return abs(lhs - rhs)
