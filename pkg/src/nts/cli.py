"""Command-line pipeline: train, simulate, abstract, check, export-dot.

Every subcommand reads defaults from an optional TOML config file (one
section per subcommand, keys matching the long flag names with underscores)
and lets command-line flags override them. All outputs are deterministic
for a fixed config and seed, byte for byte.

Exit codes: 0 success, 1 assertion failure (--assert-all-true), 2 usage or
I/O error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .ctl import check_suite, load_formulas
from .network import (
    ElmTrainConfig,
    NetworkFormatError,
    load_network,
    save_network,
    train_elm,
)
from .partition import CannotPartitionError, MePartitionConfig
from .reach import HyperRectangle, no_input
from .traces import (
    TraceFormatError,
    UniformInputPolicy,
    load_traces_csv,
    save_traces_csv,
    simulate,
)
from .transition import (
    SelfLoopConfig,
    build_abstraction,
    export_dot,
    load_transition_system,
    save_transition_system,
)

__all__ = ["main"]


class UsageError(Exception):
    """Bad arguments or unusable input files; exits with code 2."""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _nonnegative_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {value}")
    return value


def _vector(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad vector {text!r}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nts",
        description="Abstract a feed-forward dynamics model into a finite transition system and check CTL properties on it.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fit a two-layer network to trace data")
    train.add_argument("--traces", help="input trace CSV")
    train.add_argument("--hidden", type=_positive_int, help="hidden layer width")
    train.add_argument("--ridge", type=_nonnegative_float, help="ridge regularization (default 1e-6)")
    train.add_argument("--scale", type=_positive_float, help="hidden weight scale (default 1.0)")
    train.add_argument("--seed", type=int, help="random seed (default 0)")
    train.add_argument("--config", help="TOML config file")
    train.add_argument("-o", "--out", help="output network JSON")
    train.set_defaults(func=cmd_train)

    sim = sub.add_parser("simulate", help="roll a network forward from random starts")
    sim.add_argument("--network", help="network JSON")
    sim.add_argument("--num-traces", type=_positive_int, help="number of traces")
    sim.add_argument("--horizon", type=_positive_int, help="steps per trace")
    sim.add_argument("--seed", type=int, help="random seed (default 0)")
    sim.add_argument("--initial-lower", type=_vector, help="initial-state box lower corner, comma-separated")
    sim.add_argument("--initial-upper", type=_vector, help="initial-state box upper corner")
    sim.add_argument("--input-lower", type=_vector, help="input box lower corner (systems with inputs)")
    sim.add_argument("--input-upper", type=_vector, help="input box upper corner")
    sim.add_argument("--config", help="TOML config file")
    sim.add_argument("-o", "--out", help="output trace CSV")
    sim.set_defaults(func=cmd_simulate)

    abstract = sub.add_parser("abstract", help="build the transition-system abstraction")
    abstract.add_argument("--network", help="network JSON")
    abstract.add_argument("--traces", help="trace CSV used for partitioning and dwell statistics")
    abstract.add_argument("--entropy", type=_positive_float, help="entropy gain threshold in bits")
    abstract.add_argument("--lmin", type=_positive_float, help="minimum partition side length")
    abstract.add_argument("--dwell", type=_positive_int, help="self-loop dwell threshold")
    abstract.add_argument("--epsilon", type=_nonnegative_float, help="model error bound for guaranteed transitions (default 0)")
    abstract.add_argument("--zone-lower", type=_vector, help="explicit working zone lower corner")
    abstract.add_argument("--zone-upper", type=_vector, help="explicit working zone upper corner")
    abstract.add_argument("--zone-margin", type=_nonnegative_float, help="relative margin added around the sample hull (default 0)")
    abstract.add_argument("--input-lower", type=_vector, help="input box lower corner")
    abstract.add_argument("--input-upper", type=_vector, help="input box upper corner")
    abstract.add_argument("--dot", help="DOT output path (default: alongside the JSON output)")
    abstract.add_argument("--config", help="TOML config file")
    abstract.add_argument("-o", "--out", help="output transition-system JSON")
    abstract.set_defaults(func=cmd_abstract)

    chk = sub.add_parser("check", help="check CTL formulas against an abstraction")
    chk.add_argument("--system", help="transition-system JSON")
    chk.add_argument("--formulas", help="formula file, one formula per line")
    chk.add_argument("--initial", type=int, help="initial partition id")
    chk.add_argument("--assert-all-true", action="store_true", help="exit 1 unless every verdict is true")
    chk.add_argument("--out-sink", action="store_true", help="route dead-end partitions to an explicit sink state instead of stuttering")
    chk.add_argument("--config", help="TOML config file")
    chk.add_argument("-o", "--out", help="also write the report as JSON")
    chk.set_defaults(func=cmd_check)

    dot = sub.add_parser("export-dot", help="re-export a stored abstraction as DOT")
    dot.add_argument("--system", help="transition-system JSON")
    dot.add_argument("--config", help="TOML config file")
    dot.add_argument("-o", "--out", help="output DOT path")
    dot.set_defaults(func=cmd_export_dot)

    return parser


def _load_config(path, command: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"bad config file {path}: {exc}")
    section = doc.get(command, {})
    if not isinstance(section, dict):
        raise UsageError(f"config section [{command}] must be a table")
    return section


def _resolve(args, cfg: dict, key: str, default=None, required: bool = False):
    value = getattr(args, key, None)
    if value is None:
        value = cfg.get(key, None)
    if value is None:
        value = default
    if value is None and required:
        raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return value


def _resolve_box(args, cfg, lower_key: str, upper_key: str, what: str):
    lower = _resolve(args, cfg, lower_key)
    upper = _resolve(args, cfg, upper_key)
    if lower is None and upper is None:
        return None
    if lower is None or upper is None:
        raise UsageError(f"{what} needs both --{lower_key.replace('_', '-')} and --{upper_key.replace('_', '-')}")
    try:
        return HyperRectangle(lower, upper)
    except ValueError as exc:
        raise UsageError(f"bad {what}: {exc}")


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {p}")
    return p


def cmd_train(args) -> int:
    cfg = _load_config(args.config, "train")
    traces_path = _require_file(_resolve(args, cfg, "traces", required=True), "trace file")
    hidden = int(_resolve(args, cfg, "hidden", required=True))
    ridge = float(_resolve(args, cfg, "ridge", default=1e-6))
    scale = float(_resolve(args, cfg, "scale", default=1.0))
    seed = int(_resolve(args, cfg, "seed", default=0))
    out = _resolve(args, cfg, "out", required=True)

    traces = load_traces_csv(traces_path)
    result = train_elm(
        traces,
        ElmTrainConfig(hidden_width=hidden, ridge_lambda=ridge, seed=seed, hidden_weight_scale=scale),
    )
    save_network(result.network, out)
    print(f"trained {hidden}-unit network on {result.num_pairs} pairs -> {out}")
    print(f"rmse {result.rmse:.6e}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, "simulate")
    network_path = _require_file(_resolve(args, cfg, "network", required=True), "network file")
    num_traces = int(_resolve(args, cfg, "num_traces", required=True))
    horizon = int(_resolve(args, cfg, "horizon", required=True))
    seed = int(_resolve(args, cfg, "seed", default=0))
    out = _resolve(args, cfg, "out", required=True)
    initial_box = _resolve_box(args, cfg, "initial_lower", "initial_upper", "initial-state box")
    if initial_box is None:
        raise UsageError("simulate needs --initial-lower and --initial-upper")
    input_box = _resolve_box(args, cfg, "input_lower", "input_upper", "input box")

    net = load_network(network_path)
    n_x = net.output_dim
    n_u = net.input_dim - net.output_dim
    if initial_box.dim != n_x:
        raise UsageError(f"initial-state box has dimension {initial_box.dim}, state dimension is {n_x}")
    rng = np.random.default_rng(seed)
    starts = initial_box.lower + rng.random((num_traces, n_x)) * initial_box.widths
    if n_u > 0:
        if input_box is None:
            raise UsageError(f"network takes {n_u} inputs; provide --input-lower and --input-upper")
        if input_box.dim != n_u:
            raise UsageError(f"input box has dimension {input_box.dim}, network takes {n_u}")
        inputs = input_box.lower + rng.random((num_traces, horizon + 1, n_u)) * input_box.widths
        traces = simulate(net, starts, horizon, input_policy=inputs)
    else:
        traces = simulate(net, starts, horizon)
    save_traces_csv(traces, out)
    print(f"simulated {num_traces} traces x {horizon} steps -> {out}")
    return 0


def cmd_abstract(args) -> int:
    cfg = _load_config(args.config, "abstract")
    network_path = _require_file(_resolve(args, cfg, "network", required=True), "network file")
    traces_path = _require_file(_resolve(args, cfg, "traces", required=True), "trace file")
    entropy = float(_resolve(args, cfg, "entropy", required=True))
    lmin = float(_resolve(args, cfg, "lmin", required=True))
    dwell = int(_resolve(args, cfg, "dwell", required=True))
    epsilon = float(_resolve(args, cfg, "epsilon", default=0.0))
    margin = float(_resolve(args, cfg, "zone_margin", default=0.0))
    out = _resolve(args, cfg, "out", required=True)
    dot_path = _resolve(args, cfg, "dot", default=str(Path(out).with_suffix(".dot")))
    zone = _resolve_box(args, cfg, "zone_lower", "zone_upper", "working zone")
    input_box = _resolve_box(args, cfg, "input_lower", "input_upper", "input box")

    net = load_network(network_path)
    traces = load_traces_csv(traces_path)
    if zone is None:
        states = traces.all_states()
        if states.size == 0:
            raise UsageError("cannot derive a working zone from an empty trace file")
        lower = states.min(axis=0)
        upper = states.max(axis=0)
        if margin > 0:
            span = upper - lower
            lower = lower - margin * span
            upper = upper + margin * span
        zone = HyperRectangle(lower, upper)

    ts = build_abstraction(
        net,
        traces,
        zone,
        MePartitionConfig(entropy_threshold=entropy, min_length=lmin),
        input_box if input_box is not None else no_input(),
        SelfLoopConfig(dwell_threshold=dwell),
        epsilon,
    )
    save_transition_system(ts, out)
    Path(dot_path).write_text(export_dot(ts), encoding="utf-8")
    print(f"{ts.n} partitions, {ts.edge_count()} transitions")
    print(f"wrote {out} and {dot_path}")
    return 0


def cmd_check(args) -> int:
    cfg = _load_config(args.config, "check")
    system_path = _require_file(_resolve(args, cfg, "system", required=True), "transition-system file")
    formulas_path = _require_file(_resolve(args, cfg, "formulas", required=True), "formula file")
    initial = _resolve(args, cfg, "initial", required=True)
    out = _resolve(args, cfg, "out")
    out_sink = bool(getattr(args, "out_sink", False) or cfg.get("out_sink", False))
    assert_all = bool(getattr(args, "assert_all_true", False) or cfg.get("assert_all_true", False))

    ts = load_transition_system(system_path)
    formulas = load_formulas(formulas_path)
    try:
        report = check_suite(ts, formulas, int(initial), out_sink=out_sink)
    except ValueError as exc:
        raise UsageError(str(exc))
    print(report.to_text())
    if out:
        text = json.dumps(report.to_json_obj(), indent=2, sort_keys=True) + "\n"
        Path(out).write_text(text, encoding="utf-8")
    if not report.all_evaluated:
        return 2
    if assert_all and not report.all_true:
        return 1
    return 0


def cmd_export_dot(args) -> int:
    cfg = _load_config(args.config, "export-dot")
    system_path = _require_file(_resolve(args, cfg, "system", required=True), "transition-system file")
    out = _resolve(args, cfg, "out", required=True)
    ts = load_transition_system(system_path)
    Path(out).write_text(export_dot(ts), encoding="utf-8")
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NetworkFormatError, TraceFormatError, CannotPartitionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
