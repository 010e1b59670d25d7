"""Build the component network implied by a resolved document.

Node ids are derived from declaration names so that compiled networks are
stable across runs and mergeable across documents:

* ``device.<name>``: one driver per device (input ``cmd``, output ``state``)
* ``dispatcher``: the level-0 joint dispatcher; upper collections get
  ``<collection>.dispatcher`` wired to the exported ports of the level below
* ``<collection>.<block>``: one wbc node per block
* ``<collection>.<interface>.{kinematics,ctrl,converter}``: per-interface path
* ``<collection>.<interface>.stage<k>``: cascade stage ``k`` (1 = innermost)
"""

from __future__ import annotations

from ..dsl.nodes import CARTESIAN, POSITION
from . import registry
from .network import ComponentNetwork, ComponentNode, Connection, PortRef
from .ports import cartesian_command, cartesian_state, joint_command, joint_state
from .resolve import ResolvedBlock, ResolvedCollection, ResolvedInterface, ResolvedModel

ROOT_DISPATCHER = "dispatcher"


def port_suffix(name: str) -> str:
    return name.replace(".", "_")


def block_command_port(block: str, mode: str, groups: int) -> str:
    return f"cmd_{block}_{mode}" if groups > 1 else f"cmd_{block}"


def wbc_output_port(mode: str, groups: int) -> str:
    return f"cmd_{mode}" if groups > 1 else "cmd"


class _Builder:
    def __init__(self, model: ResolvedModel):
        self.model = model
        self.nodes: list[ComponentNode] = []
        self.connections: list[Connection] = []
        self.exports: dict[str, PortRef] = {}

    def node(self, node_id, kind, config, inputs=None, outputs=None, params=None) -> str:
        self.nodes.append(ComponentNode(node_id, kind, config, dict(inputs or {}), dict(outputs or {}), dict(params or {})))
        return node_id

    def connect(self, src_node, src_port, dst_node, dst_port) -> None:
        self.connections.append(Connection(PortRef(src_node, src_port), PortRef(dst_node, dst_port)))

    def build(self) -> ComponentNetwork:
        modes = self.model.device_modes
        # state and command endpoints of every source the current collection may use
        endpoints: dict[str, tuple[PortRef, PortRef]] = {}
        for d in self.model.devices:
            nid = f"device.{d.name}"
            mode = modes[d.name]
            self.node(
                nid,
                registry.DEVICE_DRIVER,
                d.config_label,
                {"cmd": joint_command(mode, d.joint_names)},
                {"state": joint_state(d.joint_names)},
                {"device": d.name, "joints": list(d.joint_names), "mode": mode},
            )
            endpoints[d.name] = (PortRef(nid, "state"), PortRef(nid, "cmd"))
        below = None
        for coll in self.model.collections:
            endpoints = self.collection(coll, endpoints, below)
            below = coll.name
        return ComponentNetwork.build(self.nodes, self.connections, self.exports)

    def collection(self, coll: ResolvedCollection, endpoints, below: str | None):
        cname = coll.name
        disp = ROOT_DISPATCHER if coll.level == 0 else f"{cname}.dispatcher"
        d_in: dict = {}
        d_out: dict = {}
        for s in coll.sources:
            key = port_suffix(s.name)
            d_in[f"state_{key}"] = joint_state(s.joints)
            d_out[f"drive_{key}"] = joint_command(s.mode, s.joints)
            state_ref, cmd_ref = endpoints[s.name]
            self.connect(state_ref.node, state_ref.port, disp, f"state_{key}")
            self.connect(disp, f"drive_{key}", cmd_ref.node, cmd_ref.port)
            if not s.is_device:
                # the set point is now driven from this level
                self.exports.pop(s.name, None)
        for blk in coll.blocks:
            d_out[f"iface_{blk.decl.name}"] = joint_state(blk.decl.joint_names)
            for mode, joints in blk.groups:
                d_in[block_command_port(blk.decl.name, mode, len(blk.groups))] = joint_command(mode, joints)
        for ri in coll.interfaces.values():
            d_out[f"iface_{ri.name}"] = joint_state(ri.decl.joint_names)
            if ri.block is None:
                d_in[f"cmd_{ri.name}"] = joint_command(ri.source_mode, ri.decl.joint_names)
        params = {} if below is None else {"below": below}
        self.node(disp, registry.JOINT_DISPATCHER, "dispatcher", d_in, d_out, params)

        for blk in coll.blocks:
            self.wbc_block(coll, blk, disp)
        for ri in coll.interfaces.values():
            self.interface(ri, disp)

        nxt = {}
        for src in coll.exported_joint_setpoints():
            iface = coll.interfaces[src.name.split(".", 1)[1]]
            nxt[src.name] = (PortRef(disp, f"iface_{iface.name}"), self.exports[src.name])
        return nxt

    def wbc_block(self, coll: ResolvedCollection, blk: ResolvedBlock, disp: str) -> None:
        decl = blk.decl
        nid = f"{coll.name}.{decl.name}"
        inputs = {"feedback": joint_state(decl.joint_names)}
        tasks = []
        for m in decl.members:
            ri = coll.interfaces.get(m.name)
            if ri is None:
                continue
            if m.space == CARTESIAN:
                inputs[f"task_{m.name}"] = cartesian_command("velocity", *m.frames)
            else:
                inputs[f"task_{m.name}"] = joint_command("velocity", m.joint_names)
            tasks.append(
                {
                    "name": m.name,
                    "priority": m.priority,
                    "space": m.space,
                    "joints": list(m.joint_names),
                    "frames": list(m.frames) if m.frames else None,
                    "weights": list(m.weights) if m.weights is not None else None,
                }
            )
        outputs = {wbc_output_port(mode, len(blk.groups)): joint_command(mode, joints) for mode, joints in blk.groups}
        params = {
            "collection": coll.name,
            "joints": list(decl.joint_names),
            "joint_weights": list(decl.initial_joint_weights),
            "groups": [[mode, list(joints)] for mode, joints in blk.groups],
            "tasks": tasks,
        }
        self.node(nid, registry.WBC, decl.name, inputs, outputs, params)
        self.connect(disp, f"iface_{decl.name}", nid, "feedback")
        for mode, _ in blk.groups:
            self.connect(nid, wbc_output_port(mode, len(blk.groups)), disp, block_command_port(decl.name, mode, len(blk.groups)))

    def interface(self, ri: ResolvedInterface, disp: str) -> None:
        decl = ri.decl
        base = f"{ri.collection}.{ri.name}"
        joints = decl.joint_names
        common = {"collection": ri.collection, "interface": ri.name, "joints": list(joints)}
        self.exports[f"{base}.state"] = PortRef(disp, f"iface_{ri.name}")
        pose = None
        if ri.is_cartesian:
            root, tip = decl.frames
            kin = self.node(
                f"{base}.kinematics",
                registry.KINEMATICS,
                ri.name,
                {"joint_state": joint_state(joints)},
                {"pose": cartesian_state(root, tip)},
                {**common, "frames": [root, tip]},
            )
            self.connect(disp, f"iface_{ri.name}", kin, "joint_state")
            pose = PortRef(kin, "pose")
            self.exports[f"{base}.pose"] = pose

        if ri.block is not None:
            task = PortRef(f"{ri.collection}.{ri.block}", f"task_{ri.name}")
            if ri.is_cartesian:
                ctrl = self.node(
                    f"{base}.ctrl",
                    registry.CARTESIAN_CONTROLLER,
                    ri.name,
                    {"setpoint": cartesian_command(POSITION, *decl.frames), "feedback": cartesian_state(*decl.frames)},
                    {"command": cartesian_command("velocity", *decl.frames)},
                    {**common, "frames": list(decl.frames), "variant": "task"},
                )
                self.connect(pose.node, pose.port, ctrl, "feedback")
                self.connect(ctrl, "command", task.node, task.port)
                setpoint = PortRef(ctrl, "setpoint")
            else:
                setpoint = task
        else:
            if ri.is_cartesian:
                ctrl = self.node(
                    f"{base}.ctrl",
                    registry.CARTESIAN_CONTROLLER,
                    ri.name,
                    {
                        "setpoint": cartesian_command(POSITION, *decl.frames),
                        "feedback": cartesian_state(*decl.frames),
                        "joint_state": joint_state(joints),
                    },
                    {"command": joint_command(ri.mode, joints)},
                    {**common, "frames": list(decl.frames), "variant": "joint", "mode": ri.mode},
                )
                self.connect(pose.node, pose.port, ctrl, "feedback")
                self.connect(disp, f"iface_{ri.name}", ctrl, "joint_state")
            else:
                ctrl = self.node(
                    f"{base}.ctrl",
                    registry.PID_CONTROLLER,
                    ri.name,
                    {"setpoint": joint_command(POSITION, joints), "feedback": joint_state(joints)},
                    {"command": joint_command(ri.mode, joints)},
                    {**common, "mode": ri.mode},
                )
                self.connect(disp, f"iface_{ri.name}", ctrl, "feedback")
            out = PortRef(ctrl, "command")
            if ri.mode != ri.source_mode:
                conv = self.node(
                    f"{base}.converter",
                    registry.MODE_CONVERTER,
                    ri.name,
                    {"input": joint_command(ri.mode, joints), "feedback": joint_state(joints)},
                    {"output": joint_command(ri.source_mode, joints)},
                    {**common, "from": ri.mode, "to": ri.source_mode},
                )
                self.connect(out.node, out.port, conv, "input")
                self.connect(disp, f"iface_{ri.name}", conv, "feedback")
                out = PortRef(conv, "output")
            self.connect(out.node, out.port, disp, f"cmd_{ri.name}")
            setpoint = PortRef(ctrl, "setpoint")

        for k, stage in enumerate(ri.stages, start=1):
            sid = f"{base}.stage{k}"
            ports = stage.ports
            inputs = {"feedback": ports.feedback}
            if ports.setpoint is not None:
                inputs["setpoint"] = ports.setpoint
            self.node(
                sid,
                stage.kind,
                stage.config,
                inputs,
                {"command": ports.command},
                {**common, "service": ports.service, "stage": k},
            )
            if ports.feedback.is_joint:
                self.connect(disp, f"iface_{ri.name}", sid, "feedback")
            else:
                self.connect(pose.node, pose.port, sid, "feedback")
            self.connect(sid, "command", setpoint.node, setpoint.port)
            setpoint = PortRef(sid, "setpoint") if ports.setpoint is not None else None
        if setpoint is not None:
            self.exports[base] = setpoint


def instantiate(model: ResolvedModel) -> ComponentNetwork:
    """Component network for a resolved document; exports are named ``<collection>.<interface>``."""
    return _Builder(model).build()
