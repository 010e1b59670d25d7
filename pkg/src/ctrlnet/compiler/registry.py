"""Registered component kinds and the data services cascade stages can fill.

A data service is a port signature: a command output of the inner stage's
set-point type, an optional set-point input and an optional feedback input.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..dsl.nodes import POSITION, VELOCITY
from .ports import (
    CARTESIAN_COMMAND,
    JOINT_COMMAND,
    PortType,
    cartesian_command,
    cartesian_state,
    joint_command,
    joint_state,
)

DEVICE_DRIVER = "device_driver"
JOINT_DISPATCHER = "joint_dispatcher"
WBC = "wbc"
PID_CONTROLLER = "pid_controller"
CARTESIAN_CONTROLLER = "cartesian_controller"
MODE_CONVERTER = "mode_converter"
TRAJECTORY_GENERATOR = "trajectory_generator"
KINEMATICS = "kinematics"
TRANSFORMER = "transformer"
MOTION_PLAN = "motion_plan"
PLANT_ADAPTER = "plant_adapter"

KINDS = (
    DEVICE_DRIVER,
    JOINT_DISPATCHER,
    WBC,
    PID_CONTROLLER,
    CARTESIAN_CONTROLLER,
    MODE_CONVERTER,
    TRAJECTORY_GENERATOR,
    KINEMATICS,
    TRANSFORMER,
    MOTION_PLAN,
    PLANT_ADAPTER,
)

# kinds whose input edges carry plant feedback; they are activated in phases
PLANT_BOUNDARY = (DEVICE_DRIVER, PLANT_ADAPTER)


@dataclass(frozen=True)
class StagePorts:
    service: str
    command: PortType
    setpoint: PortType | None
    feedback: PortType


def _feedback_for(inner: PortType) -> PortType:
    if inner.kind == JOINT_COMMAND:
        return joint_state(inner.joints)
    return cartesian_state(*inner.frames)


def stage_ports(kind: str, inner: PortType) -> StagePorts | None:
    """Ports of a ``kind`` stage driving a set-point port of type ``inner``.

    Returns None when no data service of ``kind`` can produce ``inner``.
    """
    fb = _feedback_for(inner)
    if kind == TRAJECTORY_GENERATOR:
        if inner.kind == JOINT_COMMAND and inner.mode == POSITION:
            return StagePorts("TrajectoryGenerator", inner, joint_command(POSITION, inner.joints), fb)
    elif kind == PID_CONTROLLER:
        if inner.kind == JOINT_COMMAND:
            return StagePorts("JointController", inner, joint_command(POSITION, inner.joints), fb)
    elif kind == CARTESIAN_CONTROLLER:
        if inner.kind == CARTESIAN_COMMAND and inner.mode == VELOCITY:
            return StagePorts("CartesianController", inner, cartesian_command(POSITION, *inner.frames), fb)
    elif kind == MOTION_PLAN:
        if inner.mode == POSITION:
            return StagePorts("MotionGenerator", inner, None, fb)
    return None


def activation_phases(node) -> list[tuple[str, tuple[str, ...], tuple[str, ...]]]:
    """Activation phases of a node as (phase, input ports, output ports).

    Drivers publish plant state before anything else runs and apply commands
    after; the dispatcher's read and write sides are independent activations.
    """
    ins = tuple(sorted(node.inputs))
    outs = tuple(sorted(node.outputs))
    if node.kind in PLANT_BOUNDARY:
        return [("publish", (), outs), ("apply", ins, ())]
    if node.kind == JOINT_DISPATCHER:
        return [
            ("read", tuple(p for p in ins if p.startswith("state_")), tuple(p for p in outs if p.startswith("iface_"))),
            ("write", tuple(p for p in ins if p.startswith("cmd_")), tuple(p for p in outs if p.startswith("drive_"))),
        ]
    return [("step", ins, outs)]
