"""Frequency-scaling plans for context-window extension.

Every planner returns a :class:`ScalingPlan`: a per-pair strategy tag plus the
modified frequency ``theta_hat``. ``plan_dprope`` picks, pair by pair, whichever
of interpolation (``theta / s``) or extrapolation (``theta``) disturbs the
pre-trained angle distribution less.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .distribution import DEFAULT_BINS
from .disturbance import DEFAULT_EPSILON, DisturbanceReport, disturbance_of_thetas, extension_margins
from .errors import ConfigurationError, DomainError, RopeDistError
from .rope import RopeConfig, ThetaVector, base_theta, wavelength_ratio

__all__ = [
    "INTERPOLATE",
    "EXTRAPOLATE",
    "BLEND",
    "PairChoice",
    "ScalingPlan",
    "default_n_hat",
    "plan_pi",
    "plan_extrapolate",
    "plan_yarn",
    "plan_dprope",
    "score_plan",
    "SweepRow",
    "sweep",
]

INTERPOLATE = "interpolate"
EXTRAPOLATE = "extrapolate"
BLEND = "blend"

METHODS = ("PI", "EXTRAPOLATE", "YARN", "DPROPE")

# interpolated scalar dimensions used for LLaMA2 at s=2 and s=4
_DEFAULT_N_HAT = {2.0: 80, 4.0: 64}


@dataclass(frozen=True)
class PairChoice:
    i: int
    strategy: str
    theta_hat: float
    gamma: Optional[float] = None


@dataclass(frozen=True, eq=False)
class ScalingPlan:
    config: RopeConfig
    target_len: int
    method: str
    per_pair: tuple
    selection_params: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return self.target_len / self.config.pretrain_len

    @property
    def theta_hat(self) -> ThetaVector:
        return ThetaVector([p.theta_hat for p in self.per_pair])

    @property
    def strategies(self) -> list[str]:
        return [p.strategy for p in self.per_pair]

    @property
    def n_interpolated(self) -> int:
        return sum(p.strategy == INTERPOLATE for p in self.per_pair)

    def validate(self) -> None:
        """Check that tags and frequencies agree with the unmodified RoPE frequencies."""
        th = base_theta(self.config).values
        s = self.scale
        if len(self.per_pair) != self.config.n_pairs:
            raise ConfigurationError(
                f"plan has {len(self.per_pair)} pairs, config expects {self.config.n_pairs}"
            )
        for k, p in enumerate(self.per_pair):
            if p.i != k:
                raise ConfigurationError(f"pair {k} has index {p.i}")
            base, interp = th[k], th[k] / s
            if p.strategy == INTERPOLATE:
                ok = abs(p.theta_hat - interp) <= 1e-15 * interp
            elif p.strategy == EXTRAPOLATE:
                ok = p.theta_hat == base
            elif p.strategy == BLEND:
                g = p.gamma
                ok = (
                    g is not None
                    and 0.0 <= g <= 1.0
                    and math.isclose(p.theta_hat, (1 - g) * interp + g * base, rel_tol=1e-14)
                )
            else:
                raise ConfigurationError(f"pair {k}: unknown strategy {p.strategy!r}")
            if not ok:
                raise ConfigurationError(f"pair {k}: theta_hat inconsistent with {p.strategy}")


def _scale(config: RopeConfig, target_len) -> float:
    if isinstance(target_len, bool) or not isinstance(target_len, (int, np.integer)):
        raise DomainError(f"target_len must be an integer, got {target_len!r}")
    if target_len < config.pretrain_len:
        raise DomainError(
            f"target_len ({target_len}) must be >= pretrain_len ({config.pretrain_len})"
        )
    return target_len / config.pretrain_len


def _provenance(**extra) -> dict:
    return {"tool_version": __version__, **extra}


def _binary_plan(config, target_len, method, interpolate_mask, selection_params, provenance):
    s = _scale(config, target_len)
    th = base_theta(config).values
    interp = th / s
    per_pair = tuple(
        PairChoice(i, INTERPOLATE, float(interp[i])) if interpolate_mask[i]
        else PairChoice(i, EXTRAPOLATE, float(th[i]))
        for i in range(config.n_pairs)
    )
    return ScalingPlan(config, int(target_len), method, per_pair, selection_params, provenance)


def plan_pi(config: RopeConfig, target_len: int) -> ScalingPlan:
    """Linear position interpolation: every pair uses ``theta / s``."""
    return _binary_plan(config, target_len, "PI", np.ones(config.n_pairs, bool), {}, _provenance())


def plan_extrapolate(config: RopeConfig, target_len: int) -> ScalingPlan:
    """Keep every frequency unchanged."""
    return _binary_plan(
        config, target_len, "EXTRAPOLATE", np.zeros(config.n_pairs, bool), {}, _provenance()
    )


def plan_yarn(
    config: RopeConfig,
    target_len: int,
    alpha: float = 1.0,
    beta: float = 32.0,
    orientation: str = "formula",
) -> ScalingPlan:
    """Ramp between interpolation and extrapolation on the rotation count ``r = L / wavelength``.

    With ``orientation="formula"`` pairs with ``r < alpha`` interpolate,
    ``r > beta`` extrapolate, and the rest blend with
    ``gamma = (r - alpha) / (beta - alpha)``. ``"swapped"`` mirrors the two
    outer branches and uses ``1 - gamma``.
    """
    s = _scale(config, target_len)
    alpha, beta = float(alpha), float(beta)
    if not alpha < beta:
        raise ConfigurationError(f"alpha must be < beta, got alpha={alpha}, beta={beta}")
    if orientation not in ("formula", "swapped"):
        raise ConfigurationError(f"unknown orientation {orientation!r}")
    th = base_theta(config).values
    r = wavelength_ratio(config, th)
    per_pair = []
    for i, (t, ri) in enumerate(zip(th, r)):
        low, high = ri < alpha, ri > beta
        if orientation == "swapped":
            low, high = high, low
        if low:
            per_pair.append(PairChoice(i, INTERPOLATE, float(t / s)))
        elif high:
            per_pair.append(PairChoice(i, EXTRAPOLATE, float(t)))
        else:
            g = (ri - alpha) / (beta - alpha)
            if orientation == "swapped":
                g = 1.0 - g
            g = min(max(float(g), 0.0), 1.0)
            per_pair.append(PairChoice(i, BLEND, float((1 - g) * (t / s) + g * t), g))
    prov = _provenance(alpha=alpha, beta=beta, orientation=orientation)
    return ScalingPlan(config, int(target_len), "YARN", tuple(per_pair),
                       {"alpha": alpha, "beta": beta}, prov)


def default_n_hat(scale: float) -> Optional[int]:
    """Default interpolated-dimension count for a scale factor, if one is known."""
    return _DEFAULT_N_HAT.get(float(scale))


def _select(margins: np.ndarray, t: Optional[float], n_hat: Optional[int], d: int) -> tuple[np.ndarray, dict]:
    if (t is None) == (n_hat is None):
        raise ConfigurationError("exactly one of t and n_hat must be given")
    if t is not None:
        t = float(t)
        if math.isnan(t):
            raise ConfigurationError("t must not be NaN")
        return margins > t, {"t": t}
    if isinstance(n_hat, bool) or not isinstance(n_hat, (int, np.integer)):
        raise ConfigurationError(f"n_hat must be an integer, got {n_hat!r}")
    if n_hat % 2 or not 0 <= n_hat <= d:
        raise ConfigurationError(f"n_hat must be even and in [0, {d}], got {n_hat}")
    order = np.argsort(-margins, kind="stable")
    mask = np.zeros(margins.size, bool)
    mask[order[: n_hat // 2]] = True
    return mask, {"n_hat": int(n_hat)}


def plan_dprope(
    config: RopeConfig,
    target_len: int,
    b: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
    t: Optional[float] = None,
    n_hat: Optional[int] = None,
    report: Optional[DisturbanceReport] = None,
) -> ScalingPlan:
    """Per-pair choice minimising the angle-distribution disturbance.

    Threshold mode (``t``): pair ``i`` interpolates iff
    ``D_ext_i > D_int_i + t``. Count mode (``n_hat``): the ``n_hat / 2`` pairs
    with the largest margin ``D_ext - D_int`` interpolate, ties going to the
    lower index. ``n_hat`` counts scalar dimensions. If neither is given,
    :func:`default_n_hat` is used when it fits the head dim, else ``t = 0``.

    A precomputed ``report`` from :func:`extension_margins` with matching
    parameters may be passed to skip recomputation.
    """
    _scale(config, target_len)
    if t is None and n_hat is None:
        n_hat = default_n_hat(target_len / config.pretrain_len)
        if n_hat is None or n_hat > config.head_dim:
            n_hat, t = None, 0.0
    if report is None:
        report = extension_margins(config, target_len, b, epsilon)
    elif (report.target_len, report.bins, report.epsilon, report.pretrain_len) != (
        target_len, b, float(epsilon), config.pretrain_len
    ):
        raise ConfigurationError("precomputed report does not match the requested parameters")
    mask, params = _select(report.margins, t, n_hat, config.head_dim)
    prov = _provenance(b=int(b), epsilon=float(epsilon))
    return _binary_plan(config, target_len, "DPROPE", mask, params, prov)


def score_plan(plan: ScalingPlan, b: int = DEFAULT_BINS, epsilon: float = DEFAULT_EPSILON) -> ScalingPlan:
    """Return a copy of ``plan`` with its aggregate disturbance recorded in the provenance."""
    res = disturbance_of_thetas(plan.theta_hat, plan.config, plan.target_len, b, epsilon)
    prov = dict(plan.provenance)
    prov.update(b=int(b), epsilon=float(epsilon), aggregate_disturbance=res.aggregate)
    return replace(plan, provenance=prov)


@dataclass(frozen=True)
class SweepRow:
    value: float
    aggregate: float
    n_interpolated: int


def sweep(
    config: RopeConfig,
    target_len: int,
    axis: str,
    values: Iterable,
    b: int = DEFAULT_BINS,
    epsilon: float = DEFAULT_EPSILON,
    t: Optional[float] = None,
    n_hat: Optional[int] = None,
) -> list[SweepRow]:
    """Aggregate disturbance of the disturbance-minimising plan along one parameter axis.

    ``axis`` is ``"t"``, ``"n_hat"`` or ``"b"``. Fixed ``t``/``n_hat`` only
    apply to the ``"b"`` axis. Each row re-scores the plan's ``theta_hat``
    from scratch; rows follow the input order.
    """
    values = list(values)
    if not values:
        raise RopeDistError("sweep needs at least one parameter value")
    if axis not in ("t", "n_hat", "b"):
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    rows = []
    if axis == "b":
        for v in values:
            plan = plan_dprope(config, target_len, int(v), epsilon, t=t, n_hat=n_hat)
            res = disturbance_of_thetas(plan.theta_hat, config, target_len, int(v), epsilon)
            rows.append(SweepRow(int(v), res.aggregate, plan.n_interpolated))
        return rows
    report = extension_margins(config, target_len, b, epsilon)
    for v in values:
        kw = {"t": float(v)} if axis == "t" else {"n_hat": int(v)}
        plan = plan_dprope(config, target_len, b, epsilon, report=report, **kw)
        res = disturbance_of_thetas(plan.theta_hat, config, target_len, b, epsilon)
        rows.append(SweepRow(v, res.aggregate, plan.n_interpolated))
    return rows
