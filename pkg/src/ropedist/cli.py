"""Command-line front end.

Subcommands: ``estimate``, ``disturbance``, ``plan``, ``sweep``, ``verify``.
Exit codes: 0 success, 1 usage/configuration error, 2 I/O error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import formats
from .distribution import DEFAULT_BINS, estimate_set
from .disturbance import DEFAULT_EPSILON, disturbance_of_thetas, extension_margins
from .errors import DimensionError, RopeDistError
from .rope import LLAMA2, RopeConfig, base_theta, verify_relative_property
from .strategies import (
    ScalingPlan,
    plan_dprope,
    plan_extrapolate,
    plan_pi,
    plan_yarn,
    score_plan,
    sweep,
)

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VERIFY = 0, 1, 2, 3

PRESETS = {"llama2": LLAMA2}

HEADLINE_LENGTHS = (8192, 16384)
HEADLINE_N_HAT = {8192: 80, 16384: 64}
VERIFY_TOL = 1e-9


class UsageError(RopeDistError):
    pass


@dataclass
class RunConfig:
    """Resolved invocation settings. Explicit model fields override the preset."""

    model: str = "llama2"
    head_dim: Optional[int] = None
    base: Optional[float] = None
    pretrain_len: Optional[int] = None
    target_len: Optional[int] = None
    method: Optional[str] = None
    t: Optional[float] = None
    n_hat: Optional[int] = None
    alpha: float = 1.0
    beta: float = 32.0
    yarn_orientation: str = "formula"
    bins: Optional[int] = None
    epsilon: Optional[float] = None
    out: str = "."
    format: str = "json"
    explicit_model: bool = field(default=False, repr=False)

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> "RunConfig":
        values = {}
        if getattr(args, "config", None):
            try:
                doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except OSError as exc:
                raise IOError(f"cannot read config {args.config}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise UsageError(f"{args.config}: line {exc.lineno}: {exc.msg}") from None
            known = {f.name for f in fields(cls)} - {"explicit_model"}
            unknown = set(doc) - known
            if unknown:
                raise UsageError(f"{args.config}: unknown keys {sorted(unknown)}")
            values.update(doc)
        for f in fields(cls):
            v = getattr(args, f.name, None)
            if v is not None and f.name != "explicit_model":
                values[f.name] = v
        run = cls(**values)
        run.explicit_model = any(values.get(k) is not None for k in ("head_dim", "base", "pretrain_len")) \
            or "model" in values
        return run

    def rope_config(self) -> RopeConfig:
        if self.model not in PRESETS:
            raise UsageError(f"unknown model preset {self.model!r}; known: {sorted(PRESETS)}")
        p = PRESETS[self.model]
        return RopeConfig(
            head_dim=p.head_dim if self.head_dim is None else self.head_dim,
            base=p.base if self.base is None else self.base,
            pretrain_len=p.pretrain_len if self.pretrain_len is None else self.pretrain_len,
        )

    @property
    def b(self) -> int:
        return DEFAULT_BINS if self.bins is None else self.bins

    @property
    def eps(self) -> float:
        return DEFAULT_EPSILON if self.epsilon is None else self.epsilon


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def load_plan(path: str) -> ScalingPlan:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOError(f"cannot read plan {path}: {exc}") from exc
    try:
        return formats.plan_from_json(text)
    except RopeDistError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def build_plan(run: RunConfig, config: RopeConfig) -> ScalingPlan:
    if run.t is not None and run.n_hat is not None:
        raise UsageError("--t and --n-hat are mutually exclusive")
    if run.target_len is None:
        raise UsageError("--target-len is required")
    method = (run.method or "").lower()
    if method != "dprope" and (run.t is not None or run.n_hat is not None):
        raise UsageError("--t/--n-hat only apply to --method dprope")
    if method == "pi":
        plan = plan_pi(config, run.target_len)
    elif method == "extrapolate":
        plan = plan_extrapolate(config, run.target_len)
    elif method == "yarn":
        plan = plan_yarn(config, run.target_len, run.alpha, run.beta, run.yarn_orientation)
    elif method == "dprope":
        plan = plan_dprope(config, run.target_len, run.b, run.eps, t=run.t, n_hat=run.n_hat)
    else:
        raise UsageError(f"--method must be one of pi, extrapolate, yarn, dprope; got {run.method!r}")
    return plan


def _plan_for(run: RunConfig, args) -> tuple[RopeConfig, Optional[ScalingPlan]]:
    """Model config plus the plan given by ``--plan`` or ``--method`` (if any)."""
    config = run.rope_config()
    if getattr(args, "plan", None):
        plan = load_plan(args.plan)
        if run.explicit_model and plan.config != config:
            raise DimensionError(
                f"plan model {plan.config} does not match requested model {config}"
            )
        return plan.config, plan
    if run.method:
        return config, build_plan(run, config)
    return config, None


def _out(run: RunConfig, name: str) -> Path:
    return Path(run.out) / name


def cmd_estimate(run: RunConfig, args) -> int:
    config, plan = _plan_for(run, args)
    if plan is None:
        thetas, length = base_theta(config), run.target_len or config.pretrain_len
    else:
        thetas, length = plan.theta_hat, run.target_len or plan.target_len
    dset = estimate_set(config, thetas, length, run.b)
    dims = args.dims
    if run.format == "csv":
        text = formats.histograms_csv(dset, dims)
    else:
        text = formats.histograms_json(dset, dims)
    path = _out(run, f"histograms.{run.format}")
    formats.write_files({path: text})
    print(f"wrote {len(dims) if dims else len(dset)} histograms ({dset.bins} bins, length {length}) to {path}")
    return EXIT_OK


def _headline(run: RunConfig) -> int:
    config = LLAMA2
    rows = []
    results = {}
    for L2 in HEADLINE_LENGTHS:
        report = extension_margins(config, L2, run.b, run.eps)
        plans = [
            ("PI", plan_pi(config, L2)),
            ("YaRN", plan_yarn(config, L2, run.alpha, run.beta, run.yarn_orientation)),
            ("Ours", plan_dprope(config, L2, run.b, run.eps, n_hat=HEADLINE_N_HAT[L2], report=report)),
        ]
        for name, plan in plans:
            agg = disturbance_of_thetas(plan.theta_hat, config, L2, run.b, run.eps).aggregate
            results[(name, L2)] = agg
            rows.append({"method": name, "target_len": L2, "aggregate_disturbance": formats.Num(agg)})
    header = f"{'method':<8}" + "".join(f"{L2:>12}" for L2 in HEADLINE_LENGTHS)
    lines = [f"disturbance x1e-3 (b={run.b}, epsilon={formats.fmt(run.eps)})", header]
    for name in ("PI", "YaRN", "Ours"):
        lines.append(f"{name:<8}" + "".join(f"{results[(name, L2)] * 1e3:>12.2f}" for L2 in HEADLINE_LENGTHS))
    if run.format == "csv":
        body = ["method,target_len,aggregate_disturbance"]
        body += [f"{r['method']},{r['target_len']},{r['aggregate_disturbance']}" for r in rows]
        text = "\n".join(body) + "\n"
    else:
        text = formats.dumps({"bins": run.b, "epsilon": formats.Num(run.eps), "rows": rows})
    formats.write_files({_out(run, f"table3.{run.format}"): text})
    print("\n".join(lines))
    return EXIT_OK


def cmd_disturbance(run: RunConfig, args) -> int:
    if args.table3:
        return _headline(run)
    config, plan = _plan_for(run, args)
    if plan is None:
        raise UsageError("disturbance needs --plan, --method or --table3")
    b, eps = run.b, run.eps
    if getattr(args, "plan", None):
        b = plan.provenance.get("b", b) if run.bins is None else b
        eps = plan.provenance.get("epsilon", eps) if run.epsilon is None else eps
    report = extension_margins(config, plan.target_len, b, eps)
    res = disturbance_of_thetas(plan.theta_hat, config, plan.target_len, b, eps)
    if run.format == "csv":
        files = {
            _out(run, "margins.csv"): formats.margins_csv(report),
            _out(run, "plan_disturbance.csv"): formats.plan_disturbance_csv(plan, res),
        }
    else:
        doc = {"margins": formats.report_dict(report), "plan": formats.plan_disturbance_dict(plan, res)}
        files = {_out(run, "disturbance.json"): formats.dumps(doc)}
    formats.write_files(files)
    print(
        f"method={plan.method} target_len={plan.target_len} "
        f"aggregate_disturbance={formats.fmt(res.aggregate)} "
        f"extrapolate={formats.fmt(report.aggregate_ext)} interpolate={formats.fmt(report.aggregate_int)}"
    )
    return EXIT_OK


def cmd_plan(run: RunConfig, args) -> int:
    config = run.rope_config()
    if not run.method:
        raise UsageError("--method is required")
    plan = score_plan(build_plan(run, config), run.b, run.eps)
    formats.write_files({
        _out(run, "plan.json"): formats.plan_to_json(plan),
        _out(run, "theta_hat.txt"): formats.theta_flat(plan),
    })
    print(
        f"method={plan.method} interpolated_pairs={plan.n_interpolated} "
        f"aggregate_disturbance={formats.fmt(plan.provenance['aggregate_disturbance'])}"
    )
    return EXIT_OK


def cmd_sweep(run: RunConfig, args) -> int:
    axis = args.axis
    if not args.values:
        raise UsageError("--values must list at least one value")
    if axis in ("t", "n_hat") and (run.t is not None or run.n_hat is not None):
        raise UsageError(f"cannot fix --t/--n-hat while sweeping axis {axis!r}")
    if axis == "b" and run.bins is not None:
        raise UsageError("cannot fix --bins while sweeping axis 'b'")
    if run.t is not None and run.n_hat is not None:
        raise UsageError("--t and --n-hat are mutually exclusive")
    if run.target_len is None:
        raise UsageError("--target-len is required")
    config = run.rope_config()
    if axis == "t":
        values = _float_list(args.values)
    else:
        values = _int_list(args.values)
    rows = sweep(config, run.target_len, axis, values, run.b, run.eps, t=run.t, n_hat=run.n_hat)
    path = _out(run, f"sweep_{axis}.csv")
    text = formats.sweep_csv(axis, rows)
    formats.write_files({path: text})
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(run: RunConfig, args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    config, plan = _plan_for(run, args)
    vectors = [("base", base_theta(config))]
    if plan is not None:
        vectors.append((plan.method.lower(), plan.theta_hat))
    rng = np.random.default_rng(args.seed)
    d = config.head_dim
    worst = {name: 0.0 for name, _ in vectors}
    for _ in range(args.trials):
        q = rng.standard_normal(d)
        k = rng.standard_normal(d)
        m, n = (int(x) for x in rng.integers(0, args.max_position + 1, size=2))
        for name, th in vectors:
            worst[name] = max(worst[name], verify_relative_property(q, k, m, n, th))
    ok = all(v <= VERIFY_TOL for v in worst.values())
    for name, v in worst.items():
        status = "PASS" if v <= VERIFY_TOL else "FAIL"
        print(f"{status} {name}: max discrepancy {v:.3e} over {args.trials} trials (tol {VERIFY_TOL:g})")
    return EXIT_OK if ok else EXIT_VERIFY


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=sorted(PRESETS), default=None, help="model preset (default llama2)")
    g.add_argument("--head-dim", type=int, default=None)
    g.add_argument("--base", type=float, default=None)
    g.add_argument("--pretrain-len", type=int, default=None)
    g.add_argument("--config", default=None, help="JSON file with RunConfig fields")
    p.add_argument("--bins", type=int, default=None, help=f"angle intervals (default {DEFAULT_BINS})")
    p.add_argument("--epsilon", type=float, default=None, help=f"KL smoothing (default {DEFAULT_EPSILON:g})")
    p.add_argument("--out", default=None, help="output directory (default .)")
    p.add_argument("--format", choices=("json", "csv"), default=None)


def _add_method(p: argparse.ArgumentParser) -> None:
    p.add_argument("--target-len", type=int, default=None)
    p.add_argument("--method", default=None, help="pi, extrapolate, yarn or dprope")
    p.add_argument("--t", type=float, default=None, help="dprope threshold")
    p.add_argument("--n-hat", type=int, default=None, help="dprope interpolated scalar dims")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--yarn-orientation", choices=("formula", "swapped"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ropedist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="export rotary-angle histograms")
    _add_common(p)
    _add_method(p)
    p.add_argument("--plan", default=None, help="scaling-plan JSON supplying theta_hat")
    p.add_argument("--dims", type=_int_list, default=None, help="comma-separated dimension pairs")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("disturbance", help="score a plan or method against the pre-trained distribution")
    _add_common(p)
    _add_method(p)
    p.add_argument("--plan", default=None)
    p.add_argument("--table3", action="store_true", help="PI / YaRN / ours at 8k and 16k on llama2")
    p.set_defaults(func=cmd_disturbance)

    p = sub.add_parser("plan", help="write a scaling plan and flat theta_hat file")
    _add_common(p)
    _add_method(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("sweep", help="aggregate disturbance along t, n_hat or b")
    _add_common(p)
    _add_method(p)
    p.add_argument("--axis", choices=("t", "n_hat", "b"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check the relative-position identity numerically")
    _add_common(p)
    p.add_argument("--plan", default=None)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-position", type=int, default=10**6)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        run = RunConfig.from_sources(args)
        return args.func(run, args)
    except (IOError, OSError) as exc:
        print(f"ropedist: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RopeDistError as exc:
        print(f"ropedist: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
