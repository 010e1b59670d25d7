"""AST for control-network documents.

Every node carries a :class:`SourceSpan` that is excluded from equality, so
two documents compare equal when they are structurally identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..diagnostics import SourceSpan

POSITION = "position"
VELOCITY = "velocity"
CONTROL_MODES = (POSITION, VELOCITY)

JOINT_SPACE = "joint"
CARTESIAN = "cartesian"

DIRECT = "direct"
WBC = "wbc"


def _span():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DeviceTypeDecl:
    name: str
    control_mode: str
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class DeviceDecl:
    name: str
    device_type: str
    joint_names: tuple[str, ...]
    config: str | None = None
    span: SourceSpan | None = _span()

    @property
    def config_label(self) -> str:
        return self.config if self.config is not None else self.name


@dataclass(frozen=True)
class RobotDecl:
    kinematics_path: str
    devices: tuple[DeviceDecl, ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class InterfaceDecl:
    name: str
    space: str
    joint_names: tuple[str, ...]
    frames: tuple[str, str] | None = None
    control_mode: str | None = None
    arbitration: str = DIRECT
    priority: int | None = None
    weights: tuple[float, ...] | None = None
    span: SourceSpan | None = _span()

    @property
    def root_frame(self) -> str | None:
        return self.frames[0] if self.frames else None

    @property
    def tip_frame(self) -> str | None:
        return self.frames[1] if self.frames else None

    @property
    def task_dimension(self) -> int:
        return 6 if self.space == CARTESIAN else len(self.joint_names)


@dataclass(frozen=True)
class WbcBlockDecl:
    name: str
    joint_names: tuple[str, ...]
    initial_joint_weights: tuple[float, ...]
    members: tuple[InterfaceDecl, ...]
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class CascadeStage:
    kind: str
    config: str | None = None
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class CascadeDecl:
    target_interface: str
    stages: tuple[CascadeStage, ...]  # push order: outermost last
    span: SourceSpan | None = _span()


@dataclass(frozen=True)
class ControlCollectionDecl:
    name: str
    interfaces: tuple[InterfaceDecl, ...]
    wbc_blocks: tuple[WbcBlockDecl, ...]
    cascades: tuple[CascadeDecl, ...]
    span: SourceSpan | None = _span()

    def all_interfaces(self) -> tuple[InterfaceDecl, ...]:
        """Direct interfaces followed by WBC members, in declaration order."""
        members = tuple(m for b in self.wbc_blocks for m in b.members)
        return self.interfaces + members

    def interface(self, name: str) -> InterfaceDecl | None:
        for i in self.all_interfaces():
            if i.name == name:
                return i
        return None


@dataclass(frozen=True)
class SpecDocument:
    device_types: tuple[DeviceTypeDecl, ...]
    robot: RobotDecl
    collections: tuple[ControlCollectionDecl, ...]
    file: str = field(default="<input>", compare=False)
