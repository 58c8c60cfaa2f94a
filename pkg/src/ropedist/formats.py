"""File formats: histogram and disturbance exports, scaling-plan JSON, flat theta files.

All numbers are formatted with explicit ``%g``-style precision, so output is
locale independent and byte-identical across runs.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .distribution import DistributionSet, select_dims
from .disturbance import DisturbanceReport, ThetaDisturbance
from .errors import PlanFormatError, RopeDistError
from .rope import RopeConfig
from .strategies import BLEND, EXTRAPOLATE, INTERPOLATE, METHODS, PairChoice, ScalingPlan, SweepRow

SCHEMA_VERSION = "1"


class Num:
    """A float with a fixed number of significant digits in JSON/CSV output."""

    __slots__ = ("value", "digits")

    def __init__(self, value, digits=17):
        self.value = float(value)
        self.digits = digits

    def __str__(self):
        return fmt(self.value, self.digits)


def fmt(x: float, digits: int = 17) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{digits}g}"


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, Num):
        if not math.isfinite(obj.value):
            return json.dumps(str(obj))
        return str(obj)
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _encode(Num(obj), indent, level)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, Num, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_files(files: Mapping[Path, str]) -> None:
    """Write all files or none: contents go to temp files first, then are renamed."""
    staged = []
    try:
        for path, text in files.items():
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def model_dict(config: RopeConfig) -> dict:
    return {"head_dim": config.head_dim, "base": Num(config.base), "pretrain_len": config.pretrain_len}


# --- histograms --------------------------------------------------------------

def histograms_csv(dset: DistributionSet, dims: Optional[Sequence[int]] = None) -> str:
    lines = ["dim_pair,bin_index,bin_left_radians,frequency"]
    for h in select_dims(dset, dims):
        left = h.bin_left()
        for k in range(h.bins):
            lines.append(f"{h.dim_pair},{k},{fmt(left[k], 9)},{fmt(h.freqs[k])}")
    return "\n".join(lines) + "\n"


def histograms_json(dset: DistributionSet, dims: Optional[Sequence[int]] = None) -> str:
    hists = []
    for h in select_dims(dset, dims):
        hists.append({
            "dim_pair": h.dim_pair,
            "theta": Num(h.theta),
            "sample_count": h.sample_count,
            "bin_left_radians": [Num(x, 9) for x in h.bin_left()],
            "frequency": [Num(x) for x in h.freqs],
        })
    doc = {
        "schema_version": SCHEMA_VERSION,
        "model": model_dict(dset.config),
        "length": dset.length,
        "bins": dset.bins,
        "histograms": hists,
    }
    return dumps(doc)


# --- disturbance ---------------------------------------------------------------

def margins_csv(report: DisturbanceReport) -> str:
    lines = ["dim_pair,d_ext,d_int,margin"]
    for r in report.per_dim:
        lines.append(f"{r.dim_pair},{fmt(r.d_ext)},{fmt(r.d_int)},{fmt(r.margin)}")
    return "\n".join(lines) + "\n"


def report_dict(report: DisturbanceReport) -> dict:
    return {
        "pretrain_len": report.pretrain_len,
        "target_len": report.target_len,
        "bins": report.bins,
        "epsilon": Num(report.epsilon),
        "aggregate_ext": Num(report.aggregate_ext),
        "aggregate_int": Num(report.aggregate_int),
        "per_dim": [
            {"dim_pair": r.dim_pair, "d_ext": Num(r.d_ext), "d_int": Num(r.d_int), "margin": Num(r.margin)}
            for r in report.per_dim
        ],
    }


def plan_disturbance_csv(plan: ScalingPlan, res: ThetaDisturbance) -> str:
    lines = ["dim_pair,strategy,theta_hat,disturbance"]
    for p, v in zip(plan.per_pair, res.per_dim):
        lines.append(f"{p.i},{p.strategy},{fmt(p.theta_hat)},{fmt(v)}")
    return "\n".join(lines) + "\n"


def plan_disturbance_dict(plan: ScalingPlan, res: ThetaDisturbance) -> dict:
    return {
        "method": plan.method,
        "target_len": plan.target_len,
        "bins": res.bins,
        "epsilon": Num(res.epsilon),
        "aggregate_disturbance": Num(res.aggregate),
        "per_dim": [
            {"dim_pair": p.i, "strategy": p.strategy, "disturbance": Num(v)}
            for p, v in zip(plan.per_pair, res.per_dim)
        ],
    }


def sweep_csv(axis: str, rows: Sequence[SweepRow]) -> str:
    lines = [f"{axis},aggregate_disturbance,n_interpolated_pairs"]
    for r in rows:
        v = str(int(r.value)) if axis in ("b", "n_hat") else fmt(r.value)
        lines.append(f"{v},{fmt(r.aggregate)},{r.n_interpolated}")
    return "\n".join(lines) + "\n"


# --- scaling plans -------------------------------------------------------------

def _json_value(v):
    if isinstance(v, float):
        return Num(v)
    return v


def plan_to_dict(plan: ScalingPlan) -> dict:
    per_pair = []
    for p in plan.per_pair:
        rec = {"i": p.i, "strategy": p.strategy}
        if p.strategy == BLEND:
            rec["gamma"] = Num(p.gamma)
        rec["theta_hat"] = Num(p.theta_hat)
        per_pair.append(rec)
    return {
        "schema_version": SCHEMA_VERSION,
        "model": model_dict(plan.config),
        "target_len": plan.target_len,
        "scale": Num(plan.scale),
        "method": plan.method,
        "selection_params": {k: _json_value(v) for k, v in plan.selection_params.items()},
        "per_pair": per_pair,
        "provenance": {k: _json_value(v) for k, v in plan.provenance.items()},
    }


def plan_to_json(plan: ScalingPlan) -> str:
    return dumps(plan_to_dict(plan))


def theta_flat(plan: ScalingPlan) -> str:
    return "".join(fmt(p.theta_hat) + "\n" for p in plan.per_pair)


def _num(value, where: str) -> float:
    if isinstance(value, str) and value in ("inf", "-inf"):
        return float(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise PlanFormatError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise PlanFormatError(f"{where}: expected an integer, got {value!r}")
    return value


def _get(obj, key, where):
    if not isinstance(obj, dict):
        raise PlanFormatError(f"{where}: expected an object")
    if key not in obj:
        raise PlanFormatError(f"{where}: missing field {key!r}")
    return obj[key]


def plan_from_json(text: str) -> ScalingPlan:
    """Parse a scaling-plan document; errors name the offending line or field."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlanFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    version = _get(doc, "schema_version", "plan")
    if version != SCHEMA_VERSION:
        raise PlanFormatError(f"schema_version: unsupported value {version!r}")
    model = _get(doc, "model", "plan")
    try:
        config = RopeConfig(
            head_dim=_int(_get(model, "head_dim", "model"), "model.head_dim"),
            base=_num(_get(model, "base", "model"), "model.base"),
            pretrain_len=_int(_get(model, "pretrain_len", "model"), "model.pretrain_len"),
        )
    except PlanFormatError:
        raise
    except RopeDistError as exc:
        raise PlanFormatError(f"model: {exc}") from None
    target_len = _int(_get(doc, "target_len", "plan"), "target_len")
    method = _get(doc, "method", "plan")
    if method not in METHODS:
        raise PlanFormatError(f"method: unknown value {method!r}")
    raw_pairs = _get(doc, "per_pair", "plan")
    if not isinstance(raw_pairs, list):
        raise PlanFormatError("per_pair: expected an array")
    pairs = []
    for k, rec in enumerate(raw_pairs):
        where = f"per_pair[{k}]"
        i = _int(_get(rec, "i", where), f"{where}.i")
        strategy = _get(rec, "strategy", where)
        if strategy not in (INTERPOLATE, EXTRAPOLATE, BLEND):
            raise PlanFormatError(f"{where}.strategy: unknown value {strategy!r}")
        theta_hat = _num(_get(rec, "theta_hat", where), f"{where}.theta_hat")
        gamma = _num(_get(rec, "gamma", where), f"{where}.gamma") if strategy == BLEND else None
        pairs.append(PairChoice(i, strategy, theta_hat, gamma))
    params = doc.get("selection_params", {})
    prov = doc.get("provenance", {})
    if not isinstance(params, dict) or not isinstance(prov, dict):
        raise PlanFormatError("selection_params/provenance: expected objects")
    params = {k: (float(v) if v in ("inf", "-inf") else v) for k, v in params.items()}
    plan = ScalingPlan(config, target_len, method, tuple(pairs), params, dict(prov))
    try:
        plan.validate()
    except RopeDistError as exc:
        raise PlanFormatError(f"per_pair: {exc}") from None
    return plan
