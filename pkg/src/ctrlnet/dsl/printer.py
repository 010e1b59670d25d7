from __future__ import annotations

from .nodes import CARTESIAN, ControlCollectionDecl, InterfaceDecl, SpecDocument, WbcBlockDecl


def _num(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(float(v))


def _idents(names) -> str:
    return "[" + ", ".join(names) + "]"


def _nums(values) -> str:
    return "[" + ", ".join(_num(v) for v in values) + "]"


def _string(s: str) -> str:
    body = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{body}"'


def _interface(iface: InterfaceDecl, indent: str) -> list[str]:
    kw = "cartesian_control_interface" if iface.space == CARTESIAN else "control_interface"
    inner = indent + "  "
    lines = [f"{indent}{kw} {iface.name} {{"]
    if iface.frames is not None:
        lines.append(f"{inner}frames: {iface.frames[0]} -> {iface.frames[1]}")
    lines.append(f"{inner}joints: {_idents(iface.joint_names)}")
    if iface.control_mode is not None:
        lines.append(f"{inner}control_mode: {iface.control_mode}")
    if iface.priority is not None:
        lines.append(f"{inner}priority: {iface.priority}")
    if iface.weights is not None:
        lines.append(f"{inner}weights: {_nums(iface.weights)}")
    lines.append(indent + "}")
    return lines


def _block(block: WbcBlockDecl, indent: str) -> list[str]:
    inner = indent + "  "
    lines = [
        f"{indent}wbc_interface {block.name} {{",
        f"{inner}joints: {_idents(block.joint_names)}",
        f"{inner}initial_joint_weights: {_nums(block.initial_joint_weights)}",
    ]
    for m in block.members:
        lines += _interface(m, inner)
    lines.append(indent + "}")
    return lines


def _collection(coll: ControlCollectionDecl) -> list[str]:
    lines = [f"control_collection {coll.name} {{"]
    for block in coll.wbc_blocks:
        lines += _block(block, "  ")
    for iface in coll.interfaces:
        lines += _interface(iface, "  ")
    for cascade in coll.cascades:
        lines.append(f"  cascade {cascade.target_interface} {{")
        for stage in cascade.stages:
            cfg = f" config: {_string(stage.config)}" if stage.config is not None else ""
            lines.append(f"    push {stage.kind}{cfg}")
        lines.append("  }")
    lines.append("}")
    return lines


def format_document(doc: SpecDocument) -> str:
    """Canonical source text for ``doc``; parsing it yields an equal AST."""
    lines: list[str] = []
    for dt in doc.device_types:
        lines.append(f"device_type {dt.name} {{ control_mode: {dt.control_mode} }}")
    if doc.device_types:
        lines.append("")
    lines.append("robot {")
    lines.append(f"  kinematics: {_string(doc.robot.kinematics_path)}")
    for d in doc.robot.devices:
        cfg = f" config: {_string(d.config)}" if d.config is not None else ""
        lines.append(f"  device {d.name} : {d.device_type} {{ joints: {_idents(d.joint_names)}{cfg} }}")
    lines.append("}")
    for coll in doc.collections:
        lines.append("")
        lines += _collection(coll)
    return "\n".join(lines) + "\n"
