"""Component networks: nodes with typed ports, connections and exported ports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .ports import JOINT_COMMAND, PortType


class NetworkError(Exception):
    """A network violates a structural invariant."""


@dataclass(frozen=True)
class PortRef:
    node: str
    port: str

    def __str__(self) -> str:
        return f"{self.node}.{self.port}"

    @classmethod
    def parse(cls, text: str) -> PortRef:
        node, _, port = text.rpartition(".")
        if not node or not port:
            raise ValueError(f"malformed port reference '{text}'")
        return cls(node, port)


@dataclass(frozen=True)
class Connection:
    source: PortRef
    target: PortRef

    def __str__(self) -> str:
        return f"{self.source} -> {self.target}"

    @property
    def sort_key(self) -> tuple[str, str, str, str]:
        return (self.source.node, self.source.port, self.target.node, self.target.port)


@dataclass(frozen=True, eq=False)
class ComponentNode:
    id: str
    kind: str
    config: str
    inputs: Mapping[str, PortType] = field(default_factory=dict)
    outputs: Mapping[str, PortType] = field(default_factory=dict)
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clash = set(self.inputs) & set(self.outputs)
        if clash:
            raise NetworkError(f"node '{self.id}': port name '{sorted(clash)[0]}' is both input and output")
        if any("." in p for p in list(self.inputs) + list(self.outputs)):
            raise NetworkError(f"node '{self.id}': port names may not contain '.'")

    @property
    def signature(self) -> str:
        """Identity used for merging: kind, config and structural parameters."""
        return json.dumps([self.kind, self.config, self.params], sort_keys=True)

    def port_type(self, port: str) -> PortType | None:
        return self.inputs.get(port) or self.outputs.get(port)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ComponentNode):
            return NotImplemented
        return (
            self.id == other.id
            and self.signature == other.signature
            and dict(self.inputs) == dict(other.inputs)
            and dict(self.outputs) == dict(other.outputs)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ComponentNetwork:
    nodes: Mapping[str, ComponentNode] = field(default_factory=dict)
    connections: tuple[Connection, ...] = ()
    exports: Mapping[str, PortRef] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", dict(sorted(self.nodes.items())))
        object.__setattr__(self, "connections", tuple(sorted(set(self.connections), key=lambda c: c.sort_key)))
        object.__setattr__(self, "exports", dict(sorted(self.exports.items())))

    @classmethod
    def build(cls, nodes: Iterable[ComponentNode], connections: Iterable[Connection], exports) -> ComponentNetwork:
        table: dict[str, ComponentNode] = {}
        for n in nodes:
            if n.id in table:
                raise NetworkError(f"duplicate node id '{n.id}'")
            table[n.id] = n
        return cls(table, tuple(connections), dict(exports))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ComponentNetwork):
            return NotImplemented
        return self.nodes == other.nodes and self.connections == other.connections and self.exports == other.exports

    __hash__ = None

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> ComponentNode:
        return self.nodes[node_id]

    def nodes_of_kind(self, kind: str) -> list[ComponentNode]:
        return [n for n in self.nodes.values() if n.kind == kind]

    def incoming(self, node_id: str) -> dict[str, list[Connection]]:
        result: dict[str, list[Connection]] = {}
        for c in self.connections:
            if c.target.node == node_id:
                result.setdefault(c.target.port, []).append(c)
        return result

    def outgoing(self, node_id: str) -> list[Connection]:
        return [c for c in self.connections if c.source.node == node_id]

    def writers(self, ref: PortRef) -> list[PortRef]:
        return [c.source for c in self.connections if c.target == ref]

    def port_type(self, ref: PortRef) -> PortType | None:
        n = self.nodes.get(ref.node)
        return n.port_type(ref.port) if n else None

    def is_input(self, ref: PortRef) -> bool:
        n = self.nodes.get(ref.node)
        return n is not None and ref.port in n.inputs

    def setpoint_exports(self) -> dict[str, PortRef]:
        return {k: v for k, v in self.exports.items() if self.is_input(v)}

    def state_exports(self) -> dict[str, PortRef]:
        return {k: v for k, v in self.exports.items() if not self.is_input(v)}


def validate_network(net: ComponentNetwork) -> None:
    """Check type soundness, single writers and export targets; raise :class:`NetworkError`."""
    problems: list[str] = []
    writers: dict[PortRef, list[PortRef]] = {}
    for c in net.connections:
        src = net.nodes.get(c.source.node)
        dst = net.nodes.get(c.target.node)
        if src is None or dst is None:
            problems.append(f"connection {c} references an unknown node")
            continue
        st = src.outputs.get(c.source.port)
        dt = dst.inputs.get(c.target.port)
        if st is None:
            problems.append(f"connection {c}: '{c.source}' is not an output port")
            continue
        if dt is None:
            problems.append(f"connection {c}: '{c.target}' is not an input port")
            continue
        if st != dt:
            problems.append(f"connection {c} joins {st} to {dt}")
        writers.setdefault(c.target, []).append(c.source)
    for target, srcs in sorted(writers.items(), key=lambda kv: str(kv[0])):
        if len(srcs) > 1:
            names = ", ".join(str(s) for s in srcs)
            problems.append(f"input '{target}' has {len(srcs)} writers: {names}")
    for n in net.nodes.values():
        if n.kind == "device_driver":
            for p, t in n.inputs.items():
                if t.kind == JOINT_COMMAND and len(writers.get(PortRef(n.id, p), [])) != 1:
                    problems.append(f"device driver command input '{n.id}.{p}' must have exactly one writer")
    for name, ref in net.exports.items():
        if net.port_type(ref) is None:
            problems.append(f"export '{name}' refers to missing port '{ref}'")
        elif net.is_input(ref) and writers.get(ref):
            problems.append(f"exported set point '{name}' ({ref}) is also written internally")
    if problems:
        raise NetworkError("; ".join(problems))
