"""Typed dataflow ports. Two ports may be connected only if their types are equal."""

from __future__ import annotations

from dataclasses import dataclass

JOINT_STATE = "JointState"
JOINT_COMMAND = "JointCommand"
CARTESIAN_STATE = "CartesianState"
CARTESIAN_COMMAND = "CartesianCommand"
TRANSFORM_STREAM = "TransformStream"

PORT_KINDS = (JOINT_STATE, JOINT_COMMAND, CARTESIAN_STATE, CARTESIAN_COMMAND, TRANSFORM_STREAM)


@dataclass(frozen=True)
class PortType:
    kind: str
    mode: str | None = None
    joints: tuple[str, ...] = ()
    frames: tuple[str, str] | None = None

    def __post_init__(self):
        if self.kind not in PORT_KINDS:
            raise ValueError(f"unknown port kind '{self.kind}'")
        object.__setattr__(self, "joints", tuple(self.joints))
        if self.frames is not None:
            object.__setattr__(self, "frames", tuple(self.frames))

    @property
    def is_joint(self) -> bool:
        return self.kind in (JOINT_STATE, JOINT_COMMAND)

    @property
    def is_setpoint_like(self) -> bool:
        return self.kind in (JOINT_COMMAND, CARTESIAN_COMMAND)

    def encode(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.mode is not None:
            d["mode"] = self.mode
        if self.is_joint:
            d["joints"] = list(self.joints)
        if self.frames is not None:
            d["frames"] = list(self.frames)
        return d

    @classmethod
    def decode(cls, d: dict) -> PortType:
        frames = d.get("frames")
        return cls(d["kind"], d.get("mode"), tuple(d.get("joints", ())), tuple(frames) if frames else None)

    def __str__(self) -> str:
        mode = f"<{self.mode}>" if self.mode else ""
        where = f"[{','.join(self.joints)}]" if self.is_joint else f"({'->'.join(self.frames or ())})"
        return f"{self.kind}{mode}{where}"


def joint_state(joints) -> PortType:
    return PortType(JOINT_STATE, None, tuple(joints))


def joint_command(mode: str, joints) -> PortType:
    return PortType(JOINT_COMMAND, mode, tuple(joints))


def cartesian_state(root: str, tip: str) -> PortType:
    return PortType(CARTESIAN_STATE, None, (), (root, tip))


def cartesian_command(mode: str, root: str, tip: str) -> PortType:
    return PortType(CARTESIAN_COMMAND, mode, (), (root, tip))
