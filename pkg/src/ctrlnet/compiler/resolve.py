"""Semantic resolution of a parsed document against the robot's kinematic tree."""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from ..diagnostics import CompileError, Diagnostic, SourceSpan, error, warning
from ..dsl.nodes import (
    CARTESIAN,
    DIRECT,
    POSITION,
    VELOCITY,
    CascadeDecl,
    ControlCollectionDecl,
    DeviceDecl,
    InterfaceDecl,
    SpecDocument,
    WbcBlockDecl,
)
from ..kinematics import KinematicTree
from . import registry
from .ports import JOINT_COMMAND, PortType, cartesian_command, joint_command


@dataclass(frozen=True)
class Source:
    """Something an interface's joints are commanded through.

    In the first collection these are devices; in every later collection they
    are the joint-space set points exported by the collection below.
    """

    name: str
    joints: tuple[str, ...]
    mode: str
    is_device: bool


@dataclass(frozen=True)
class PlannedStage:
    kind: str
    config: str
    ports: registry.StagePorts
    span: SourceSpan | None


@dataclass
class ResolvedInterface:
    decl: InterfaceDecl
    collection: str
    block: str | None
    mode: str  # command mode at the interface's output
    source_mode: str | None  # mode its sources expect (direct interfaces only)
    chain: tuple[str, ...] = ()
    own_setpoint: PortType | None = None
    stages: list[PlannedStage] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def is_cartesian(self) -> bool:
        return self.decl.space == CARTESIAN

    @property
    def setpoint(self) -> PortType | None:
        """Type of the set point exported after all cascade stages, if any."""
        if self.stages:
            return self.stages[-1].ports.setpoint
        return self.own_setpoint

    @property
    def export_name(self) -> str:
        return f"{self.collection}.{self.decl.name}"


@dataclass
class ResolvedBlock:
    decl: WbcBlockDecl
    groups: list[tuple[str, tuple[str, ...]]]  # (source mode, joints) in block order


@dataclass
class ResolvedCollection:
    decl: ControlCollectionDecl
    level: int
    sources: list[Source]
    joint_source: dict[str, str]
    interfaces: dict[str, ResolvedInterface]
    blocks: list[ResolvedBlock]

    @property
    def name(self) -> str:
        return self.decl.name

    def exported_joint_setpoints(self) -> list[Source]:
        out = []
        for iface in self.interfaces.values():
            sp = iface.setpoint
            if sp is not None and sp.kind == JOINT_COMMAND:
                out.append(Source(iface.export_name, sp.joints, sp.mode, False))
        return out


@dataclass
class ResolvedModel:
    doc: SpecDocument
    tree: KinematicTree
    device_modes: dict[str, str]
    collections: list[ResolvedCollection]
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def devices(self) -> tuple[DeviceDecl, ...]:
        return self.doc.robot.devices


def suggest(name: str, preferred, fallback=()) -> str | None:
    """Closest candidate, trying ``preferred`` names before ``fallback`` ones."""
    for pool in (list(preferred), list(fallback)):
        hits = difflib.get_close_matches(name, pool, n=1, cutoff=0.5)
        if hits:
            return hits[0]
    return None


def _did_you_mean(s: str | None) -> str:
    return f"; did you mean '{s}'?" if s else ""


class _Resolver:
    def __init__(self, doc: SpecDocument, tree: KinematicTree):
        self.doc = doc
        self.tree = tree
        self.diags: list[Diagnostic] = []

    def err(self, code, msg, span):
        self.diags.append(error(code, msg, span))

    def warn(self, code, msg, span):
        self.diags.append(warning(code, msg, span))

    def run(self) -> ResolvedModel:
        device_modes = self._devices()
        sources = [
            Source(d.name, d.joint_names, device_modes[d.name], True)
            for d in self.doc.robot.devices
            if d.name in device_modes
        ]
        collections = []
        for level, decl in enumerate(self.doc.collections):
            coll = self._collection(decl, level, sources)
            collections.append(coll)
            sources = coll.exported_joint_setpoints()
        if any(d.is_error for d in self.diags):
            raise CompileError(self.diags)
        return ResolvedModel(self.doc, self.tree, device_modes, collections, self.diags)

    # -- robot -----------------------------------------------------------------

    def _devices(self) -> dict[str, str]:
        types: dict[str, str] = {}
        for dt in self.doc.device_types:
            if dt.name in types:
                self.err("duplicate-name", f"device type '{dt.name}' declared twice", dt.span)
            types.setdefault(dt.name, dt.control_mode)
        articulated = self.tree.articulated_joints
        claimed: dict[str, DeviceDecl] = {}
        modes: dict[str, str] = {}
        for d in self.doc.robot.devices:
            if d.device_type not in types:
                self.err(
                    "unknown-device-type",
                    f"device '{d.name}' has unknown type '{d.device_type}'"
                    + _did_you_mean(suggest(d.device_type, types)),
                    d.span,
                )
            else:
                modes[d.name] = types[d.device_type]
            for j in d.joint_names:
                if not self.tree.has_joint(j):
                    unclaimed = [a for a in articulated if a not in claimed and a not in d.joint_names]
                    self.err(
                        "unknown-joint",
                        f"device '{d.name}' drives unknown joint '{j}'" + _did_you_mean(suggest(j, unclaimed, articulated)),
                        d.span,
                    )
                elif not self.tree.joint(j).articulated:
                    self.err("fixed-joint", f"device '{d.name}' drives fixed joint '{j}'", d.span)
                elif j in claimed:
                    self.err(
                        "joint-conflict",
                        f"joint '{j}' is driven by devices '{claimed[j].name}' ({claimed[j].span}) and '{d.name}'",
                        d.span,
                    )
                else:
                    claimed[j] = d
        return modes

    # -- collections -------------------------------------------------------------

    def _collection(self, decl: ControlCollectionDecl, level: int, sources: list[Source]) -> ResolvedCollection:
        joint_source: dict[str, str] = {}
        source_by_name = {s.name: s for s in sources}
        for s in sources:
            for j in s.joints:
                if j in joint_source:
                    self.warn(
                        "ambiguous-export",
                        f"joint '{j}' is exported by both '{joint_source[j]}' and '{s.name}'; "
                        f"collection '{decl.name}' uses '{joint_source[j]}'",
                        decl.span,
                    )
                else:
                    joint_source[j] = s.name
        coll = ResolvedCollection(decl, level, sources, joint_source, {}, [])

        def check_joints(owner: str, joints, span) -> bool:
            ok = True
            for j in joints:
                if j in joint_source:
                    continue
                ok = False
                if self.tree.has_joint(j) and self.tree.joint(j).articulated:
                    if level == 0:
                        self.err("undriven-joint", f"{owner} uses joint '{j}' which no device drives", span)
                    else:
                        below = self.doc.collections[level - 1].name
                        self.err(
                            "non-exported-joint",
                            f"{owner} uses joint '{j}' which collection '{below}' does not export",
                            span,
                        )
                else:
                    pool = [a for a in joint_source if a not in joints]
                    self.err(
                        "unknown-joint",
                        f"{owner} uses unknown joint '{j}'" + _did_you_mean(suggest(j, pool, self.tree.articulated_joints)),
                        span,
                    )
            return ok

        # exclusivity: each joint has at most one direct owner or one wbc block
        owners: dict[str, tuple[str, SourceSpan | None]] = {}

        def claim(joints, who: str, span) -> None:
            for j in joints:
                if j in owners:
                    prev, prev_span = owners[j]
                    self.err(
                        "joint-conflict",
                        f"joint '{j}' commanded by two controllers: {prev} ({prev_span}) and {who} ({span})",
                        span,
                    )
                else:
                    owners[j] = (who, span)

        for block in decl.wbc_blocks:
            if check_joints(f"wbc block '{block.name}'", block.joint_names, block.span):
                claim(block.joint_names, f"wbc block '{block.name}'", block.span)
                groups: dict[str, list[str]] = {}
                for j in block.joint_names:
                    groups.setdefault(source_by_name[joint_source[j]].mode, []).append(j)
                order = [m for m in (POSITION, VELOCITY) if m in groups]
                coll.blocks.append(ResolvedBlock(block, [(m, tuple(groups[m])) for m in order]))
            for m in block.members:
                ri = self._interface(m, decl, block.name, joint_source, source_by_name, check=False)
                if ri is not None:
                    coll.interfaces[m.name] = ri

        for iface in decl.interfaces:
            if not check_joints(f"interface '{iface.name}'", iface.joint_names, iface.span):
                continue
            ri = self._interface(iface, decl, None, joint_source, source_by_name, check=True)
            if ri is not None:
                claim(iface.joint_names, f"interface '{iface.name}'", iface.span)
                coll.interfaces[iface.name] = ri

        seen_cascade: dict[str, CascadeDecl] = {}
        for cascade in decl.cascades:
            ri = coll.interfaces.get(cascade.target_interface)
            if ri is None:
                if decl.interface(cascade.target_interface) is None:
                    names = [i.name for i in decl.all_interfaces()]
                    self.err(
                        "unknown-interface",
                        f"cascade targets unknown interface '{cascade.target_interface}'"
                        + _did_you_mean(suggest(cascade.target_interface, names)),
                        cascade.span,
                    )
                continue
            if cascade.target_interface in seen_cascade:
                self.err(
                    "duplicate-cascade",
                    f"interface '{cascade.target_interface}' already has a cascade "
                    f"({seen_cascade[cascade.target_interface].span})",
                    cascade.span,
                )
                continue
            seen_cascade[cascade.target_interface] = cascade
            self._plan_cascade(ri, cascade)
        return coll

    def _interface(self, decl: InterfaceDecl, coll: ControlCollectionDecl, block: str | None,
                   joint_source, source_by_name, check: bool) -> ResolvedInterface | None:
        joints = decl.joint_names
        if not check and any(j not in joint_source for j in joints):
            # members of an unresolvable block were already reported through the block
            return None
        chain: tuple[str, ...] = ()
        if decl.space == CARTESIAN and decl.frames is not None:
            ok = True
            for f in decl.frames:
                if not self.tree.has_segment(f):
                    ok = False
                    self.err(
                        "unknown-frame",
                        f"interface '{decl.name}' uses unknown frame '{f}'" + _did_you_mean(suggest(f, self.tree.segments)),
                        decl.span,
                    )
            if not ok:
                return None
            chain = self.tree.chain(*decl.frames)
            missing = [j for j in chain if j not in joints]
            if missing:
                self.err(
                    "chain-joint",
                    f"joint '{missing[0]}' on chain {decl.frames[0]} -> {decl.frames[1]} is not part of "
                    f"interface '{decl.name}'",
                    decl.span,
                )
                return None
            for j in joints:
                if j not in chain:
                    self.warn(
                        "off-chain-joint",
                        f"joint '{j}' of interface '{decl.name}' is not on chain {decl.frames[0]} -> {decl.frames[1]}",
                        decl.span,
                    )
        if block is not None:
            own = (
                cartesian_command(POSITION, *decl.frames)
                if decl.space == CARTESIAN
                else joint_command(VELOCITY, joints)
            )
            return ResolvedInterface(decl, coll.name, block, VELOCITY, None, chain, own)
        modes = {source_by_name[joint_source[j]].mode for j in joints}
        if len(modes) > 1:
            self.err(
                "mixed-modes",
                f"interface '{decl.name}' spans position- and velocity-controlled joints; split it or use a wbc_interface",
                decl.span,
            )
            return None
        source_mode = modes.pop() if modes else POSITION
        mode = decl.control_mode or source_mode
        own = cartesian_command(POSITION, *decl.frames) if decl.space == CARTESIAN else joint_command(POSITION, joints)
        return ResolvedInterface(decl, coll.name, None, mode, source_mode, chain, own)

    def _plan_cascade(self, ri: ResolvedInterface, cascade: CascadeDecl) -> None:
        inner = ri.own_setpoint
        inner_name = f"interface '{ri.name}'"
        for stage in cascade.stages:
            if stage.kind not in registry.KINDS:
                self.err(
                    "unknown-component",
                    f"no registered component kind '{stage.kind}'" + _did_you_mean(suggest(stage.kind, registry.KINDS)),
                    stage.span,
                )
                return
            if inner is None:
                self.err(
                    "cascade-no-setpoint",
                    f"cannot push '{stage.kind}' onto {inner_name}: the current outermost stage has no set-point port",
                    stage.span,
                )
                return
            ports = registry.stage_ports(stage.kind, inner)
            if ports is None:
                self.err(
                    "no-data-service",
                    f"component kind '{stage.kind}' provides no data service producing {inner}",
                    stage.span,
                )
                return
            ri.stages.append(PlannedStage(stage.kind, stage.config or ri.name, ports, stage.span))
            inner = ports.setpoint
            inner_name = f"stage '{stage.kind}'"


def resolve(doc: SpecDocument, tree: KinematicTree) -> ResolvedModel:
    """Check ``doc`` against ``tree``; raises :class:`CompileError` listing every error."""
    return _Resolver(doc, tree).run()
