"""Deterministic single-rate execution of a component network against a kinematic plant.

Each tick: the plant state at the start of the tick is published by the
device drivers, every activation runs once in schedule order, the drivers
hand their commands to the plant, and the plant advances by ``dt``. Plant
feedback therefore reaches controllers one tick late, which is what breaks
the controller -> plant -> controller loop.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .compiler import registry
from .compiler.network import ComponentNetwork, PortRef, validate_network
from .compiler.ports import CARTESIAN_COMMAND, PortType
from .components.motion_plan import MotionPlan
from .components.runtime import (
    PlantIO,
    RuntimeContext,
    build_component,
    sample_fields,
    value_to_sample,
)
from .config import ComponentConfig
from .kinematics import KinematicTree, Transform, forward_kinematics


class ExecutionError(Exception):
    """The network cannot be executed as requested."""


class ScheduleError(ExecutionError):
    pass


class UnboundSetpointError(ExecutionError):
    def __init__(self, names: Sequence[str]):
        self.names = list(names)
        super().__init__("unbound set point " + ", ".join(f"'{n}'" for n in self.names))


# ---------------------------------------------------------------------------
# plant


@dataclass(frozen=True, eq=False)
class SimulatedPlant:
    tree: KinematicTree
    joints: tuple[str, ...]
    modes: tuple[str, ...]
    tau: np.ndarray
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        n = len(self.joints)
        for name in ("tau", "position", "velocity"):
            a = np.array(np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (n,)))
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        for j, m in zip(self.joints, self.modes):
            if m not in ("position", "velocity"):
                raise ValueError(f"joint '{j}' has unknown control mode '{m}'")

    @classmethod
    def for_network(
        cls,
        tree: KinematicTree,
        net: ComponentNetwork,
        config: ComponentConfig | None = None,
        initial: Mapping[str, float] | None = None,
    ) -> SimulatedPlant:
        """Plant over every joint a device driver in ``net`` drives, modes from the drivers."""
        config = config or ComponentConfig()
        joints: list[str] = []
        modes: list[str] = []
        taus: list[float] = []
        for node in net.nodes.values():
            if node.kind not in registry.PLANT_BOUNDARY:
                continue
            tau = float(config.get(node.kind, node.config)["tau"])
            for j in node.params["joints"]:
                joints.append(j)
                modes.append(node.params["mode"])
                taus.append(tau)
        initial = dict(initial or {})
        unknown = sorted(set(initial) - set(joints))
        if unknown:
            raise ExecutionError(f"initial state names joint '{unknown[0]}' which no device drives")
        pos = [float(initial.get(j, 0.0)) for j in joints]
        return cls(tree, tuple(joints), tuple(modes), np.array(taus), np.array(pos), np.zeros(len(joints)))

    def index(self, joint: str) -> int:
        return self.joints.index(joint)

    def positions(self) -> dict[str, float]:
        return dict(zip(self.joints, (float(v) for v in self.position)))

    def with_state(self, position, velocity) -> SimulatedPlant:
        return replace(self, position=np.asarray(position, dtype=float), velocity=np.asarray(velocity, dtype=float))


def step_plant(plant: SimulatedPlant, command, dt: float) -> tuple[SimulatedPlant, list[str]]:
    """Advance by ``dt`` under ``command`` (NaN = hold); returns the new plant and limit warnings."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    cmd = np.asarray(command, dtype=float)
    p = np.array(plant.position)
    v = np.array(plant.velocity)
    warnings: list[str] = []
    for i, (j, mode) in enumerate(zip(plant.joints, plant.modes)):
        tau = plant.tau[i]
        alpha = 1.0 if tau <= 0 else min(dt / tau, 1.0)
        if math.isnan(cmd[i]):
            v[i] = 0.0
            continue
        if mode == "velocity":
            v[i] += (cmd[i] - v[i]) * alpha
            p[i] += v[i] * dt
        else:
            p_new = p[i] + (cmd[i] - p[i]) * alpha
            v[i] = (p_new - p[i]) / dt
            p[i] = p_new
        limits = plant.tree.joint(j).limits if plant.tree.has_joint(j) else None
        if limits is not None:
            lo, hi = limits
            if p[i] > hi or p[i] < lo:
                bound = hi if p[i] > hi else lo
                warnings.append(f"joint '{j}' clamped to {'upper' if bound == hi else 'lower'} limit {bound:g}")
                p[i] = bound
                v[i] = 0.0
    return plant.with_state(p, v), warnings


# ---------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class Activation:
    node: str
    phase: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.node}.{self.phase}"


@dataclass(frozen=True)
class Schedule:
    activations: tuple[Activation, ...]

    @property
    def order(self) -> list[str]:
        seen: list[str] = []
        for a in self.activations:
            if a.node not in seen:
                seen.append(a.node)
        return seen


def build_schedule(net: ComponentNetwork) -> Schedule:
    """Topological order of node activations, ties broken by (node id, phase order)."""
    validate_network(net)
    acts: list[Activation] = []
    key: dict[int, tuple[str, int]] = {}
    producer: dict[tuple[str, str], int] = {}
    consumer: dict[tuple[str, str], int] = {}
    for nid in sorted(net.nodes):
        for k, (phase, ins, outs) in enumerate(registry.activation_phases(net.nodes[nid])):
            idx = len(acts)
            acts.append(Activation(nid, phase, ins, outs))
            key[idx] = (nid, k)
            for p in outs:
                producer[(nid, p)] = idx
            for p in ins:
                consumer[(nid, p)] = idx
    succ: dict[int, set[int]] = {i: set() for i in range(len(acts))}
    indeg = [0] * len(acts)
    for c in net.connections:
        a = producer[(c.source.node, c.source.port)]
        b = consumer[(c.target.node, c.target.port)]
        if b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1
    heap = [(key[i], i) for i in range(len(acts)) if indeg[i] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    while heap:
        _, i = heapq.heappop(heap)
        order.append(i)
        for j in succ[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                heapq.heappush(heap, (key[j], j))
    if len(order) < len(acts):
        left = {i for i in range(len(acts)) if indeg[i] > 0}
        cycle = _find_cycle(left, succ, key)
        raise ScheduleError("algebraic loop: " + " -> ".join(str(acts[i]) for i in cycle))
    return Schedule(tuple(acts[i] for i in order))


def _find_cycle(nodes: set[int], succ, key) -> list[int]:
    # every unscheduled activation still has an unscheduled predecessor, so
    # walking predecessors must close a loop
    pred: dict[int, list[int]] = {i: [] for i in nodes}
    for i in nodes:
        for j in succ[i]:
            if j in nodes:
                pred[j].append(i)
    path: list[int] = []
    pos: dict[int, int] = {}
    cur = min(nodes, key=lambda i: key[i])
    while cur not in pos:
        pos[cur] = len(path)
        path.append(cur)
        cur = min(pred[cur], key=lambda i: key[i])
    loop = path[pos[cur] :][::-1]
    return loop + [loop[0]]


# ---------------------------------------------------------------------------
# execution


def column_names(ref: PortRef, pt: PortType) -> list[str]:
    return [f"{ref}.{name}[{i}]" for name, n in sample_fields(pt) for i in range(n)]


def plant_columns(plant: SimulatedPlant) -> list[str]:
    return [f"plant.{j}.{f}" for j in plant.joints for f in ("position", "velocity")]


@dataclass
class ExecutionTrace:
    dt: float
    columns: list[str] = field(default_factory=list)
    rows: list[dict[str, float]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)
    error: str | None = None
    final_plant: SimulatedPlant | None = None

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, math.nan) for r in self.rows])

    def add_columns(self, names) -> None:
        known = set(self.columns)
        self.columns += [n for n in names if n not in known]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trace(trace: ExecutionTrace, path) -> None:
    """CSV: ``tick,time`` then every recorded column in sorted order, one row per tick."""
    cols = sorted(c for c in trace.columns if c not in ("tick", "time"))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick", "time"] + cols)
        for r in trace.rows:
            w.writerow([str(int(r["tick"])), _fmt(r["time"])] + [_fmt(r[c]) if c in r else "" for c in cols])


class _PlantPort(PlantIO):
    def __init__(self, executor: Executor):
        self.ex = executor

    def read(self, joints):
        plant = self.ex.plant
        idx = [plant.index(j) for j in joints]
        return plant.position[idx], plant.velocity[idx]

    def command(self, joints, values):
        for j, v in zip(joints, values):
            self.ex.pending[self.ex.plant.index(j)] = float(v)


class Executor:
    """Steps one network tick by tick; the sequencer drives several of these in turn."""

    def __init__(
        self,
        net: ComponentNetwork,
        plant: SimulatedPlant,
        dt: float,
        plans: Mapping[str, MotionPlan],
        *,
        config: ComponentConfig | None = None,
        start_tick: int = 0,
    ):
        if not dt > 0:
            raise ExecutionError(f"dt must be positive, got {dt}")
        self.net = net
        self.plant = plant
        self.dt = float(dt)
        self.tick = start_tick
        self.schedule = build_schedule(net)
        setpoints = net.setpoint_exports()
        unknown = sorted(set(plans) - set(setpoints))
        if unknown:
            raise ExecutionError(f"no exported set point named '{unknown[0]}'")
        unbound = sorted(set(setpoints) - set(plans))
        if unbound:
            raise UnboundSetpointError(unbound)
        self.bindings = {name: (setpoints[name], plans[name]) for name in sorted(plans)}
        self.ctx = RuntimeContext(plant.tree, config, _PlantPort(self))
        self.components = {nid: build_component(n, self.ctx) for nid, n in net.nodes.items()}
        self.sources = {c.target: c.source for c in net.connections}
        self.values: dict[PortRef, dict] = {}
        self.pending = np.full(len(plant.joints), np.nan)
        cols: list[str] = []
        for nid in sorted(net.nodes):
            n = net.nodes[nid]
            for p in sorted(n.outputs):
                cols += column_names(PortRef(nid, p), n.outputs[p])
        for name, (ref, _) in self.bindings.items():
            cols += column_names(ref, net.port_type(ref))
        self.columns = ["tick", "time"] + sorted(cols) + plant_columns(plant)

    def _plan_input(self, ref: PortRef, plan: MotionPlan, t: float) -> dict:
        pt = self.net.port_type(ref)
        q = self.plant.positions()
        if pt.kind == CARTESIAN_COMMAND and pt.mode == "position":
            x = forward_kinematics(self.plant.tree, q, *pt.frames)
        elif pt.is_joint and pt.mode == "position":
            x = np.array([q[j] for j in pt.joints])
        else:
            x = None
        value = plan.evaluate(t, x)
        if value is None:
            n = sum(k for _, k in sample_fields(pt))
            return value_to_sample(pt, np.full(n, np.nan))
        if isinstance(value, Transform) and pt.kind != CARTESIAN_COMMAND:
            raise ExecutionError(f"Cartesian plan bound to joint port '{ref}'")
        return value_to_sample(pt, value)

    def step(self) -> tuple[dict[str, float], list[str]]:
        """Run one tick; returns the trace row and plant warnings."""
        t = self.tick * self.dt
        row: dict[str, float] = {"tick": self.tick, "time": t}
        for j, p, v in zip(self.plant.joints, self.plant.position, self.plant.velocity):
            row[f"plant.{j}.position"] = float(p)
            row[f"plant.{j}.velocity"] = float(v)
        bound = {ref: self._plan_input(ref, plan, t) for ref, plan in self.bindings.values()}
        self.pending = np.full(len(self.plant.joints), np.nan)
        for act in self.schedule.activations:
            inputs = {}
            for p in act.inputs:
                ref = PortRef(act.node, p)
                if ref in bound:
                    inputs[p] = bound[ref]
                elif ref in self.sources:
                    inputs[p] = self.values[self.sources[ref]]
            outputs = self.components[act.node].activate(act.phase, inputs, t, self.dt)
            for p, sample in outputs.items():
                self.values[PortRef(act.node, p)] = sample
        for ref, sample in list(self.values.items()) + list(bound.items()):
            for name, vec in sample.items():
                for i, x in enumerate(vec.tolist()):
                    row[f"{ref}.{name}[{i}]"] = x
        self.plant, warnings = step_plant(self.plant, self.pending, self.dt)
        self.tick += 1
        return row, warnings

    def component_states(self) -> dict[str, dict]:
        return {nid: c.get_state() for nid, c in self.components.items()}


def run(
    net: ComponentNetwork,
    plant: SimulatedPlant,
    duration: float,
    dt: float,
    plans: Mapping[str, MotionPlan],
    *,
    config: ComponentConfig | None = None,
) -> ExecutionTrace:
    """Execute ``round(duration / dt)`` ticks; a component failure truncates the trace."""
    if not dt > 0:
        raise ExecutionError(f"dt must be positive, got {dt}")
    if duration < 0:
        raise ExecutionError(f"duration must be non-negative, got {duration}")
    ex = Executor(net, plant, dt, plans, config=config)
    trace = ExecutionTrace(dt, list(ex.columns))
    for _ in range(int(round(duration / dt))):
        try:
            row, warnings = ex.step()
        except Exception as exc:  # component failures end the run, recorded in the trace
            trace.error = f"tick {ex.tick}: {exc}"
            break
        trace.rows.append(row)
        trace.warnings += [(int(row["tick"]), w) for w in warnings]
    trace.final_plant = ex.plant
    return trace
