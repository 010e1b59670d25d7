"""``ctrlnet check|compile|simulate|sequence``.

Exit codes: 0 success, 1 diagnostics with errors, 2 usage error, 3 runtime failure.
Diagnostics go to stderr, summaries to stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .compiler.export import to_dot, to_json
from .compiler.network import NetworkError
from .compiler.ports import CARTESIAN_COMMAND
from .components.motion_plan import PlanError
from .config import ConfigError, config_for_document
from .diagnostics import CompileError, Diagnostic
from .executor import ExecutionError, ExecutionTrace, SimulatedPlant, UnboundSetpointError, run, write_trace
from .kinematics import forward_kinematics
from .pipeline import compile_file
from .scenario import ScenarioError, load_scenario
from .sequencer import FAILED, SequenceError, load_sequence, run_sequence, write_events

OK, DIAGNOSTICS, USAGE, RUNTIME = 0, 1, 2, 3


class _Usage(Exception):
    pass


def _report(diags: list[Diagnostic]) -> None:
    for d in diags:
        print(d.format(), file=sys.stderr)


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise _Usage(f"no such file: {path}")
    return p


def _compile(path: str):
    """CompileResult, or an exit code after printing diagnostics."""
    p = _need_file(path)
    try:
        result = compile_file(p)
    except CompileError as exc:
        _report(exc.diagnostics)
        return DIAGNOSTICS
    except NetworkError as exc:
        print(f"error {p} invalid-network {exc}", file=sys.stderr)
        return DIAGNOSTICS
    _report(result.diagnostics)
    return result


def cmd_check(args) -> int:
    result = _compile(args.spec)
    return result if isinstance(result, int) else OK


def cmd_compile(args) -> int:
    result = _compile(args.spec)
    if isinstance(result, int):
        return result
    want_json = args.json or not (args.json or args.dot)
    want_dot = args.dot or not (args.json or args.dot)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if want_json:
            (out / "network.json").write_text(to_json(result.network), encoding="utf-8")
        if want_dot:
            (out / "network.dot").write_text(to_dot(result.network), encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write to '{out}': {exc.strerror}", file=sys.stderr)
        return RUNTIME
    return OK


def _summary(net, tree, trace: ExecutionTrace) -> list[str]:
    """Final tracking error of every exported position set point."""
    if not trace.rows or trace.final_plant is None:
        return []
    last = trace.rows[-1]
    q = trace.final_plant.positions()
    lines = []
    for name, ref in sorted(net.setpoint_exports().items()):
        pt = net.port_type(ref)
        if pt.mode != "position":
            continue
        if pt.kind == CARTESIAN_COMMAND:
            sp = np.array([last[f"{ref}.translation[{i}]"] for i in range(3)])
            if np.any(np.isnan(sp)):
                continue
            err = float(np.linalg.norm(forward_kinematics(tree, q, *pt.frames).translation - sp))
            lines.append(f"{name}: final position error {err:.6g} m")
        else:
            sp = np.array([last[f"{ref}.position[{i}]"] for i in range(len(pt.joints))])
            actual = np.array([q[j] for j in pt.joints])
            diff = np.abs(sp - actual)[~np.isnan(sp)]
            if diff.size:
                lines.append(f"{name}: final joint error {float(diff.max()):.6g}")
    return lines


def _check_dt(dt) -> None:
    if dt is not None and not dt > 0:
        raise _Usage(f"--dt must be positive, got {dt}")


def cmd_simulate(args) -> int:
    _check_dt(args.dt)
    if args.duration is not None and args.duration < 0:
        raise _Usage(f"--duration must be non-negative, got {args.duration}")
    scenario_path = _need_file(args.scenario)
    result = _compile(args.spec)
    if isinstance(result, int):
        return result
    try:
        config = config_for_document(args.spec)
        scenario = load_scenario(scenario_path)
        plans = scenario.plans(result.network)
    except (ConfigError, ScenarioError, PlanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    dt = args.dt if args.dt is not None else scenario.dt
    duration = args.duration if args.duration is not None else scenario.duration
    _check_dt(dt)
    try:
        plant = SimulatedPlant.for_network(result.tree, result.network, config, scenario.initial)
        trace = run(result.network, plant, duration, dt, plans, config=config)
    except UnboundSetpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    except ExecutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    if args.trace:
        try:
            write_trace(trace, args.trace)
        except OSError as exc:
            print(f"error: cannot write trace: {exc.strerror}", file=sys.stderr)
            return RUNTIME
    for tick, w in trace.warnings:
        print(f"warning tick {tick}: {w}", file=sys.stderr)
    if trace.error:
        print(f"error: runtime failure at {trace.error}", file=sys.stderr)
        return RUNTIME
    for line in _summary(result.network, result.tree, trace):
        print(line)
    return OK


def cmd_sequence(args) -> int:
    _check_dt(args.dt)
    path = _need_file(args.sequence)
    try:
        stages = load_sequence(path)
    except CompileError as exc:
        _report(exc.diagnostics)
        return DIAGNOSTICS
    except (NetworkError, ConfigError, ScenarioError, PlanError, SequenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    first = stages[0]
    dt = args.dt if args.dt is not None else (first.scenario.dt if first.scenario else 0.01)
    try:
        plant = SimulatedPlant.for_network(
            first.compiled.tree, first.network, first.config, first.scenario.initial if first.scenario else None
        )
        trace, events = run_sequence(stages, plant, dt)
    except (ExecutionError, SequenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DIAGNOSTICS
    try:
        if args.trace:
            write_trace(trace, args.trace)
        if args.events:
            write_events(events, args.events)
    except OSError as exc:
        print(f"error: cannot write output: {exc.strerror}", file=sys.stderr)
        return RUNTIME
    if not args.events:
        for e in events:
            print(e.format())
    if trace.error or (events and events[-1].kind == FAILED):
        print(f"error: runtime failure at {trace.error}", file=sys.stderr)
        return RUNTIME
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctrlnet", description="Compile and simulate control-network specifications.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and resolve a specification")
    p.add_argument("spec")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compile", help="write the component network as JSON and/or DOT")
    p.add_argument("spec")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--json", action="store_true")
    p.add_argument("--dot", action="store_true")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="run a compiled network against the simulated plant")
    p.add_argument("spec")
    p.add_argument("scenario")
    p.add_argument("--duration", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sequence", help="run a sequence of networks")
    p.add_argument("sequence")
    p.add_argument("--dt", type=float)
    p.add_argument("--trace")
    p.add_argument("--events")
    p.set_defaults(func=cmd_sequence)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
