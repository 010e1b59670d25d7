"""Executable component instances for every registered kind.

A port sample is a mapping from field name to a read-only float vector. Field
layouts follow the port type:

* JointState: ``position``, ``velocity``
* JointCommand: one field named after the mode (``position`` or ``velocity``)
* CartesianState, CartesianCommand<position>, TransformStream: ``translation``, ``rotation``
* CartesianCommand<velocity>: ``twist`` (linear; angular)

Components keep all history in ``self.state`` so the sequencer can copy it
between networks.
"""

from __future__ import annotations

import copy
from typing import Mapping

import numpy as np

from ..compiler import registry
from ..compiler.network import ComponentNode
from ..compiler.ports import (
    CARTESIAN_COMMAND,
    CARTESIAN_STATE,
    JOINT_COMMAND,
    JOINT_STATE,
    TRANSFORM_STREAM,
    PortType,
)
from ..config import ComponentConfig
from ..kinematics import KinematicTree, Transform, forward_kinematics, lookup_transform
from .cartesian import cartesian_controller_step, chain_jacobian, resolved_rate
from .dispatch import JointStateSample, dispatch_extract, dispatch_merge
from .motion_plan import plan_from_mapping
from .pid import PidConfig, PidState, pid_step
from .trajectory import TrajectoryConfig, trajectory_step
from .wbc import WbcTask, expand_cartesian_weights, selection_jacobian, wbc_solve

Sample = Mapping[str, np.ndarray]


class ComponentError(Exception):
    """A component could not produce its outputs."""


def _ro(values) -> np.ndarray:
    a = np.array(values, dtype=float).reshape(-1)
    a.setflags(write=False)
    return a


def sample_fields(pt: PortType) -> list[tuple[str, int]]:
    n = len(pt.joints)
    if pt.kind == JOINT_STATE:
        return [("position", n), ("velocity", n)]
    if pt.kind == JOINT_COMMAND:
        return [(pt.mode, n)]
    if pt.kind == CARTESIAN_COMMAND and pt.mode == "velocity":
        return [("twist", 6)]
    return [("translation", 3), ("rotation", 4)]


def make_sample(**fields) -> dict[str, np.ndarray]:
    return {k: _ro(v) for k, v in fields.items()}


def pose_sample(T: Transform) -> dict[str, np.ndarray]:
    return make_sample(translation=T.translation, rotation=T.rotation)


def sample_pose(s: Sample) -> Transform | None:
    t, r = np.asarray(s["translation"]), np.asarray(s["rotation"])
    if np.any(np.isnan(t)) or np.any(np.isnan(r)):
        return None
    return Transform(r, t)


def value_to_sample(pt: PortType, value) -> dict[str, np.ndarray]:
    """Wrap a plan value (vector or Transform) as a sample for port type ``pt``."""
    if isinstance(value, Transform):
        return pose_sample(value)
    (name, n), *_ = sample_fields(pt)
    v = np.asarray(value, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise ComponentError(f"value with {v.shape[0]} entries for a {pt} port")
    return make_sample(**{name: v})


class PlantIO:
    """What device drivers see of the plant."""

    def read(self, joints) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def command(self, joints, values) -> None:
        raise NotImplementedError


class RuntimeContext:
    def __init__(self, tree: KinematicTree, config: ComponentConfig | None = None, plant: PlantIO | None = None):
        self.tree = tree
        self.config = config or ComponentConfig()
        self.plant = plant


class Component:
    def __init__(self, node: ComponentNode, ctx: RuntimeContext):
        self.node = node
        self.ctx = ctx
        self.params = dict(node.params)
        self.cfg = ctx.config.get(node.kind, node.config)
        self.state: dict = {}

    def activate(self, phase: str, inputs: Mapping[str, Sample], t: float, dt: float) -> dict[str, Sample]:
        return self.step(inputs, t, dt)

    def step(self, inputs: Mapping[str, Sample], t: float, dt: float) -> dict[str, Sample]:
        raise NotImplementedError

    def get_state(self) -> dict:
        return copy.deepcopy(self.state)

    def set_state(self, state: Mapping) -> None:
        self.state = copy.deepcopy(dict(state))

    def joints_of(self, port: str) -> tuple[str, ...]:
        return self.node.port_type(port).joints


class DeviceDriver(Component):
    def activate(self, phase, inputs, t, dt):
        joints = self.params["joints"]
        if phase == "publish":
            p, v = self.ctx.plant.read(joints)
            return {"state": make_sample(position=p, velocity=v)}
        cmd = inputs.get("cmd")
        if cmd is not None:
            self.ctx.plant.command(joints, cmd[self.params["mode"]])
        return {}


class JointDispatcher(Component):
    def activate(self, phase, inputs, t, dt):
        if phase == "read":
            names: list[str] = []
            pos: list[float] = []
            vel: list[float] = []
            for port in sorted(inputs):
                names += self.joints_of(port)
                pos += list(inputs[port]["position"])
                vel += list(inputs[port]["velocity"])
            full = JointStateSample(t, tuple(names), pos, vel)
            out = {}
            for port, pt in self.node.outputs.items():
                if port.startswith("iface_"):
                    s = dispatch_extract(full, pt.joints)
                    out[port] = make_sample(position=s.position, velocity=s.velocity)
            return out
        partials = [(self.joints_of(p), inputs[p][self.node.inputs[p].mode]) for p in sorted(inputs)]
        drives = {p: pt for p, pt in self.node.outputs.items() if p.startswith("drive_")}
        every = [j for pt in drives.values() for j in pt.joints]
        try:
            merged = dispatch_merge(partials, every)
        except Exception as exc:
            raise ComponentError(f"{self.node.id}: {exc}") from None
        value = dict(zip(merged.joints, merged.values))
        return {p: make_sample(**{pt.mode: [value[j] for j in pt.joints]}) for p, pt in drives.items()}


class PidController(Component):
    def step(self, inputs, t, dt):
        sp = np.asarray(inputs["setpoint"]["position"])
        fb = np.asarray(inputs["feedback"]["position"])
        hold = np.isnan(sp)
        cfg = PidConfig(self.cfg["kp"], self.cfg["ki"], self.cfg["kd"], self.cfg.get("output_limits"))
        prior = PidState(self.state.get("integral"), self.state.get("prev_error"))
        u, new = pid_step(cfg, prior, np.where(hold, fb, sp), fb, dt)
        self.state = {"integral": new.integral, "prev_error": new.prev_error}
        mode = self.params["mode"]
        out = sp + u if mode == "position" else u
        return {"command": make_sample(**{mode: np.where(hold, np.nan, out)})}


class CartesianController(Component):
    def step(self, inputs, t, dt):
        gain = float(self.cfg["gain"])
        current = sample_pose(inputs["feedback"])
        target = sample_pose(inputs["setpoint"])
        twist = np.zeros(6) if target is None or current is None else cartesian_controller_step(current, target, gain)
        if self.params.get("variant") != "joint":
            return {"command": make_sample(twist=twist)}
        joints = self.params["joints"]
        js = inputs["joint_state"]
        q = dict(zip(joints, js["position"]))
        root, tip = self.params["frames"]
        qd = resolved_rate(self.ctx.tree, q, root, tip, joints, twist)
        if self.params["mode"] == "velocity":
            return {"command": make_sample(velocity=qd)}
        q_cmd = np.asarray(self.state.get("q_cmd", js["position"])) + qd * dt
        self.state = {"q_cmd": q_cmd}
        return {"command": make_sample(position=q_cmd)}


class ModeConverter(Component):
    def step(self, inputs, t, dt):
        src, dst = self.params["from"], self.params["to"]
        cmd = np.asarray(inputs["input"][src])
        fb = inputs["feedback"]
        if src == dst:
            return {"output": make_sample(**{dst: cmd})}
        if dst == "position":
            q_cmd = np.array(self.state.get("q_cmd", fb["position"]), dtype=float)
            q_cmd = q_cmd + np.where(np.isnan(cmd), 0.0, cmd) * dt
            self.state = {"q_cmd": q_cmd}
            return {"output": make_sample(position=q_cmd)}
        gain = float(self.cfg["gain"])
        return {"output": make_sample(velocity=gain * (cmd - np.asarray(fb["position"])))}


class TrajectoryGenerator(Component):
    def step(self, inputs, t, dt):
        fb = inputs["feedback"]
        p = np.asarray(self.state.get("position", fb["position"]), dtype=float)
        v = np.asarray(self.state.get("velocity", fb["velocity"]), dtype=float)
        target = np.asarray(inputs["setpoint"]["position"], dtype=float)
        target = np.where(np.isnan(target), p, target)
        cfg = TrajectoryConfig(self.cfg["max_vel"], self.cfg["max_acc"])
        p, v = trajectory_step(cfg, p, v, target, dt)
        self.state = {"position": p, "velocity": v}
        return {"command": make_sample(position=p)}


class Kinematics(Component):
    def step(self, inputs, t, dt):
        q = dict(zip(self.params["joints"], inputs["joint_state"]["position"]))
        root, tip = self.params["frames"]
        return {"pose": pose_sample(forward_kinematics(self.ctx.tree, q, root, tip))}


class Wbc(Component):
    def step(self, inputs, t, dt):
        joints = self.params["joints"]
        fb = inputs["feedback"]
        q = dict(zip(joints, fb["position"]))
        tasks = []
        for spec in self.params["tasks"]:
            sample = inputs.get(f"task_{spec['name']}")
            if spec["space"] == "cartesian":
                root, tip = spec["frames"]
                J = chain_jacobian(self.ctx.tree, q, root, tip, joints)
                desired = sample["twist"] if sample is not None else np.zeros(6)
                weights = expand_cartesian_weights(spec["weights"]) if spec["weights"] is not None else None
            else:
                J = selection_jacobian(spec["joints"], joints)
                desired = sample["velocity"] if sample is not None else np.zeros(len(spec["joints"]))
                weights = spec["weights"]
            tasks.append(WbcTask(spec["priority"], J, np.nan_to_num(np.asarray(desired, dtype=float)), weights))
        qd = dict(zip(joints, wbc_solve(tasks, self.params["joint_weights"])))
        q_cmd = dict(self.state.get("q_cmd", {}))
        out = {}
        for port, pt in self.node.outputs.items():
            if pt.mode == "velocity":
                out[port] = make_sample(velocity=[qd[j] for j in pt.joints])
            else:
                for j in pt.joints:
                    q_cmd[j] = q_cmd.get(j, q[j]) + qd[j] * dt
                out[port] = make_sample(position=[q_cmd[j] for j in pt.joints])
        self.state = {"q_cmd": q_cmd}
        return out


class MotionPlanComponent(Component):
    """Cascade stage without a set point: the plan is read from the component config."""

    def __init__(self, node, ctx):
        super().__init__(node, ctx)
        pt = node.outputs["command"]
        self.plan = plan_from_mapping(self.cfg, pt)

    def step(self, inputs, t, dt):
        pt = self.node.outputs["command"]
        fb = inputs.get("feedback")
        if fb is None:
            x = None
        elif pt.kind == CARTESIAN_COMMAND:
            x = sample_pose(fb)
        else:
            x = np.asarray(fb["position"])
        return {"command": value_to_sample(pt, self.plan.evaluate(t, x))}


class Transformer(Component):
    """Transforms between any two frames of a graph of static and streamed edges.

    Static edges come from the ``edges`` config entry as
    ``[parent, child, x, y, z, roll, pitch, yaw]``; every Cartesian input port
    adds the edge between its frames.
    """

    def step(self, inputs, t, dt):
        edges = []
        for e in self.cfg.get("edges", []):
            edges.append((str(e[0]), str(e[1]), Transform.from_xyz_rpy(e[2:5], e[5:8])))
        for port, pt in sorted(self.node.inputs.items()):
            if pt.kind in (CARTESIAN_STATE, TRANSFORM_STREAM) and port in inputs:
                T = sample_pose(inputs[port])
                if T is not None:
                    edges.append((pt.frames[0], pt.frames[1], T))
        out = {}
        for port, pt in self.node.outputs.items():
            try:
                out[port] = pose_sample(lookup_transform(edges, *pt.frames))
            except Exception as exc:
                raise ComponentError(f"{self.node.id}: {exc}") from None
        return out


FACTORY = {
    registry.DEVICE_DRIVER: DeviceDriver,
    registry.PLANT_ADAPTER: DeviceDriver,
    registry.JOINT_DISPATCHER: JointDispatcher,
    registry.PID_CONTROLLER: PidController,
    registry.CARTESIAN_CONTROLLER: CartesianController,
    registry.MODE_CONVERTER: ModeConverter,
    registry.TRAJECTORY_GENERATOR: TrajectoryGenerator,
    registry.KINEMATICS: Kinematics,
    registry.WBC: Wbc,
    registry.MOTION_PLAN: MotionPlanComponent,
    registry.TRANSFORMER: Transformer,
}


def build_component(node: ComponentNode, ctx: RuntimeContext) -> Component:
    try:
        cls = FACTORY[node.kind]
    except KeyError:
        raise ComponentError(f"no runtime behavior for component kind '{node.kind}'") from None
    return cls(node, ctx)
