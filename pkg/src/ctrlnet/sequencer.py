"""Chronological sequencing of compiled networks with predicate-triggered switching.

Sequence files list stages::

    stage approach {
      network: "reach.ctrl"
      scenario: "reach.scenario.yaml"
      until: norm_below(l2.arm.state.velocity, 1e-3) for 10
      timeout: 5
    }

Predicates: ``norm_below(port, eps)``, ``norm_above(port, eps)``,
``component_below(port, index, value)`` and ``elapsed(t)``. A port is an
exported name or ``node.port``, optionally followed by ``.field``.

On a switch, every node of the next network that is merge-equal to a node of
the running one inherits that node's internal state; all other nodes start
fresh. The plant carries over unchanged.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .compiler.merge import match_nodes
from .compiler.network import ComponentNetwork, PortRef
from .components.motion_plan import MotionPlan
from .components.runtime import sample_fields
from .config import ComponentConfig, config_for_document
from .diagnostics import CompileError, Diagnostic, SourceSpan, error
from .dsl.lexer import Token, tokenize
from .executor import ExecutionError, ExecutionTrace, Executor, SimulatedPlant
from .pipeline import CompileResult, compile_file
from .scenario import Scenario, load_scenario

KEYWORDS = frozenset({"stage", "network", "scenario", "until", "for", "timeout"})

CONDITIONS = {
    # name: (takes a port, number of numeric arguments)
    "norm_below": (True, 1),
    "norm_above": (True, 1),
    "component_below": (True, 2),
    "elapsed": (False, 1),
}

STARTED = "started"
TERMINATED = "terminated_by_predicate"
TIMED_OUT = "timed_out"
FAILED = "failed"


class SequenceError(Exception):
    pass


@dataclass(frozen=True)
class PortPredicate:
    condition: str
    port: str | None
    args: tuple[float, ...]
    hold_ticks: int = 1

    def __post_init__(self):
        if self.hold_ticks < 1:
            raise ValueError("hold_ticks must be at least 1")
        if self.condition in ("norm_below", "norm_above") and self.args[0] < 0:
            raise ValueError("norm threshold must be non-negative")

    def __str__(self) -> str:
        parts = ([self.port] if self.port else []) + [repr(a) for a in self.args]
        hold = f" for {self.hold_ticks}" if self.hold_ticks > 1 else ""
        return f"{self.condition}({', '.join(parts)}){hold}"


@dataclass(frozen=True)
class StageDecl:
    name: str
    network: str
    scenario: str | None
    until: PortPredicate
    timeout: float
    span: SourceSpan | None = field(default=None, compare=False)


@dataclass
class BehaviorStage:
    name: str
    network: ComponentNetwork
    termination: PortPredicate
    timeout: float
    plans: dict[str, MotionPlan] = field(default_factory=dict)
    config: ComponentConfig = field(default_factory=ComponentConfig)
    compiled: CompileResult | None = None
    scenario: Scenario | None = None


@dataclass(frozen=True)
class StageEvent:
    tick: int
    stage: str
    kind: str

    def format(self) -> str:
        return f"{self.tick} {self.stage} {self.kind}"


# ---------------------------------------------------------------------------
# parsing


class _SeqParser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.pos = 0
        self.file = file
        self.diags: list[Diagnostic] = []

    @property
    def tok(self) -> Token | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def fail(self, msg: str, code: str = "unexpected-token"):
        tok = self.tok
        span = tok.span if tok else (self.toks[-1].span if self.toks else None)
        found = tok.describe() if tok else "end of input"
        raise CompileError([error(code, f"{msg}, found {found}", span)])

    def take(self, kind: str, value=None, what: str = "") -> Token:
        tok = self.tok
        if tok is None or tok.kind != kind or (value is not None and tok.value != value):
            self.fail(f"expected {what or value or kind}", "unexpected-eof" if tok is None else "unexpected-token")
        self.pos += 1
        return tok

    def at(self, kind: str, value=None) -> bool:
        tok = self.tok
        return tok is not None and tok.kind == kind and (value is None or tok.value == value)

    def parse(self) -> list[StageDecl]:
        stages = []
        while self.tok is not None:
            stages.append(self.stage())
        if not stages:
            raise CompileError([error("empty-sequence", "empty sequence", SourceSpan(self.file, 1, 1, 1, 1))])
        seen: dict[str, StageDecl] = {}
        for s in stages:
            if s.name in seen:
                raise CompileError([error("duplicate-name", f"stage '{s.name}' declared twice (first at {seen[s.name].span})", s.span)])
            seen[s.name] = s
        return stages

    def stage(self) -> StageDecl:
        start = self.take("KEYWORD", "stage", "'stage'")
        name = self.take("IDENT", what="stage name").value
        self.take("LBRACE", what="'{'")
        fields: dict[str, object] = {}
        while not self.at("RBRACE"):
            key = self.take("KEYWORD", what="'network', 'scenario', 'until' or 'timeout'")
            if key.value not in ("network", "scenario", "until", "timeout"):
                self.pos -= 1
                self.fail("expected 'network', 'scenario', 'until' or 'timeout'")
            if key.value in fields:
                raise CompileError([error("duplicate-field", f"field '{key.value}' given twice in stage '{name}'", key.span)])
            self.take("COLON", what="':'")
            if key.value in ("network", "scenario"):
                fields[key.value] = self.take("STRING", what="a string").value
            elif key.value == "timeout":
                fields["timeout"] = self.number()
            else:
                fields["until"] = self.predicate()
        end = self.take("RBRACE", what="'}'")
        for required in ("network", "until", "timeout"):
            if required not in fields:
                raise CompileError([error("missing-field", f"stage '{name}' needs '{required}'", start.span)])
        if fields["timeout"] <= 0:
            raise CompileError([error("bad-timeout", f"stage '{name}' needs a positive timeout", start.span)])
        return StageDecl(name, fields["network"], fields.get("scenario"), fields["until"], fields["timeout"], start.span.to(end.span))

    def number(self) -> float:
        value = float(self.take("NUMBER", what="a number").value)
        if self.at("IDENT", "s"):
            self.pos += 1
        return value

    def path(self) -> str:
        parts = [self.take("IDENT", what="a port reference").value]
        while self.at("DOT"):
            self.pos += 1
            tok = self.tok
            if tok is None or tok.kind not in ("IDENT", "KEYWORD"):
                self.fail("expected a name after '.'")
            self.pos += 1
            parts.append(tok.value)
        return ".".join(parts)

    def predicate(self) -> PortPredicate:
        head = self.take("IDENT", what="a predicate")
        if head.value not in CONDITIONS:
            raise CompileError(
                [error("malformed-predicate", f"unknown predicate '{head.value}' (expected one of {', '.join(CONDITIONS)})", head.span)]
            )
        takes_port, nargs = CONDITIONS[head.value]
        self.take("LPAREN", what="'('")
        port = None
        if takes_port:
            port = self.path()
        args = []
        for k in range(nargs):
            if takes_port or k > 0:
                self.take("COMMA", what="','")
            args.append(self.number())
        self.take("RPAREN", what="')'")
        hold = 1
        if self.at("KEYWORD", "for"):
            self.pos += 1
            tok = self.take("NUMBER", what="a tick count")
            hold = float(tok.value)
            if hold < 1 or hold != int(hold):
                raise CompileError([error("malformed-predicate", "hold count must be a positive integer", tok.span)])
        try:
            return PortPredicate(head.value, port, tuple(args), int(hold))
        except ValueError as exc:
            raise CompileError([error("malformed-predicate", str(exc), head.span)]) from None


def parse_sequence(text: str, file: str = "<input>") -> list[StageDecl]:
    return _SeqParser(tokenize(text, file, KEYWORDS), file).parse()


def resolve_port(net: ComponentNetwork, ref: str) -> tuple[PortRef, str | None]:
    """Split ``ref`` into a port of ``net`` and an optional field name."""
    candidates: list[tuple[PortRef, str]] = []
    for name, port in net.exports.items():
        if ref == name or ref.startswith(name + "."):
            candidates.append((port, ref[len(name) + 1 :]))
    for nid, node in net.nodes.items():
        if ref.startswith(nid + "."):
            rest = ref[len(nid) + 1 :]
            port, _, fld = rest.partition(".")
            if node.port_type(port) is not None:
                candidates.append((PortRef(nid, port), fld))
    # prefer the most specific reading: the shortest leftover field
    for port, fld in sorted(candidates, key=lambda c: (len(c[1]), str(c[0]))):
        pt = net.port_type(port)
        names = [n for n, _ in sample_fields(pt)]
        if not fld or fld in names:
            return port, (fld or None)
    raise SequenceError(f"port '{ref}' does not exist in the network")


def load_sequence(path: str | os.PathLike) -> list[BehaviorStage]:
    """Parse a sequence file and compile every stage's network (paths relative to the file)."""
    path = Path(path)
    decls = parse_sequence(path.read_text(encoding="utf-8"), str(path))
    base = path.parent
    stages = []
    for d in decls:
        spec = base / d.network
        if not spec.exists():
            raise CompileError([error("unknown-network", f"stage '{d.name}': network file '{d.network}' not found", d.span)])
        compiled = compile_file(spec)
        scenario = load_scenario(base / d.scenario) if d.scenario else Scenario()
        net = compiled.network
        if d.until.port is not None:
            try:
                resolve_port(net, d.until.port)
            except SequenceError as exc:
                raise CompileError([error("unknown-port", f"stage '{d.name}': {exc}", d.span)]) from None
        stages.append(
            BehaviorStage(
                d.name,
                net,
                d.until,
                d.timeout,
                scenario.plans(net),
                config_for_document(spec),
                compiled,
                scenario,
            )
        )
    return stages


# ---------------------------------------------------------------------------
# running


def _ticks(seconds: float, dt: float) -> int:
    return max(1, math.ceil(seconds / dt - 1e-9))


class _Probe:
    def __init__(self, net: ComponentNetwork, pred: PortPredicate, dt: float):
        self.pred = pred
        self.dt = dt
        self.columns: list[str] = []
        if pred.port is not None:
            ref, fld = resolve_port(net, pred.port)
            for name, n in sample_fields(net.port_type(ref)):
                if fld is None or name == fld:
                    self.columns += [f"{ref}.{name}[{i}]" for i in range(n)]
        self.streak = 0

    def holds(self, row: dict, elapsed_ticks: int) -> bool:
        p = self.pred
        if p.condition == "elapsed":
            ok = elapsed_ticks >= _ticks(p.args[0], self.dt)
        else:
            v = np.array([row[c] for c in self.columns])
            if p.condition == "norm_below":
                ok = bool(np.linalg.norm(v) < p.args[0])
            elif p.condition == "norm_above":
                ok = bool(np.linalg.norm(v) > p.args[0])
            else:
                k = int(p.args[0])
                if not 0 <= k < len(v):
                    raise SequenceError(f"component index {k} out of range for '{p.port}' ({len(v)} values)")
                ok = bool(v[k] < p.args[1])
        self.streak = self.streak + 1 if ok else 0
        return self.streak >= p.hold_ticks


def run_sequence(
    stages: Sequence[BehaviorStage], plant: SimulatedPlant, dt: float
) -> tuple[ExecutionTrace, list[StageEvent]]:
    if not stages:
        raise SequenceError("empty sequence")
    if not dt > 0:
        raise ExecutionError(f"dt must be positive, got {dt}")
    trace = ExecutionTrace(dt)
    events: list[StageEvent] = []
    running: Executor | None = None
    tick = 0
    for stage in stages:
        ex = Executor(stage.network, plant, dt, stage.plans, config=stage.config, start_tick=tick)
        if set(ex.plant.joints) != set(plant.joints):
            raise SequenceError(f"stage '{stage.name}' drives a different set of joints")
        if running is not None:
            for u, v in match_nodes(running.net, stage.network).items():
                ex.components[v].set_state(running.components[u].get_state())
        trace.add_columns(ex.columns)
        probe = _Probe(stage.network, stage.termination, dt)
        events.append(StageEvent(tick, stage.name, STARTED))
        limit = _ticks(stage.timeout, dt)
        start = tick
        while True:
            try:
                row, warnings = ex.step()
            except Exception as exc:  # a component failure aborts the whole sequence
                trace.error = f"tick {ex.tick}: {exc}"
                events.append(StageEvent(ex.tick, stage.name, FAILED))
                trace.final_plant = ex.plant
                return trace, events
            trace.rows.append(row)
            trace.warnings += [(int(row["tick"]), w) for w in warnings]
            tick = ex.tick
            if probe.holds(row, tick - start):
                events.append(StageEvent(tick, stage.name, TERMINATED))
                break
            if tick - start >= limit:
                events.append(StageEvent(tick, stage.name, TIMED_OUT))
                break
        plant = ex.plant
        running = ex
    trace.final_plant = plant
    return trace, events


def write_events(events: Sequence[StageEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            fh.write(e.format() + "\n")
