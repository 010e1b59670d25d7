"""Deterministic JSON and DOT renderings of a component network."""

from __future__ import annotations

import json

from .network import ComponentNetwork, ComponentNode, Connection, PortRef
from .ports import PortType


def network_to_dict(net: ComponentNetwork) -> dict:
    nodes = []
    for nid in sorted(net.nodes):
        n = net.nodes[nid]
        entry = {
            "id": n.id,
            "kind": n.kind,
            "config": n.config,
            "inputs": {p: t.encode() for p, t in sorted(n.inputs.items())},
            "outputs": {p: t.encode() for p, t in sorted(n.outputs.items())},
        }
        if n.params:
            entry["params"] = n.params
        nodes.append(entry)
    return {
        "nodes": nodes,
        "connections": [{"from": str(c.source), "to": str(c.target)} for c in net.connections],
        "exports": {k: str(v) for k, v in sorted(net.exports.items())},
    }


def network_from_dict(data: dict) -> ComponentNetwork:
    nodes = [
        ComponentNode(
            d["id"],
            d["kind"],
            d["config"],
            {p: PortType.decode(t) for p, t in d.get("inputs", {}).items()},
            {p: PortType.decode(t) for p, t in d.get("outputs", {}).items()},
            d.get("params", {}),
        )
        for d in data.get("nodes", [])
    ]
    # node ids contain dots, so split port references against the known ids
    ids = sorted((n.id for n in nodes), key=len, reverse=True)

    def ref(text: str) -> PortRef:
        for nid in ids:
            if text.startswith(nid + ".") and "." not in text[len(nid) + 1 :]:
                return PortRef(nid, text[len(nid) + 1 :])
        return PortRef.parse(text)

    conns = [Connection(ref(c["from"]), ref(c["to"])) for c in data.get("connections", [])]
    exports = {k: ref(v) for k, v in data.get("exports", {}).items()}
    return ComponentNetwork.build(nodes, conns, exports)


def to_json(net: ComponentNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=2, sort_keys=True) + "\n"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(net: ComponentNetwork) -> str:
    lines = ["digraph network {", "  rankdir=LR;", "  node [shape=box];"]
    for nid in sorted(net.nodes):
        n = net.nodes[nid]
        label = f"{n.kind}\\n{n.id}"
        lines.append(f"  {_quote(nid)} [label=\"{label}\"];")
    for c in net.connections:
        lines.append(f"  {_quote(c.source.node)} -> {_quote(c.target.node)} [label={_quote(c.source.port + ' -> ' + c.target.port)}];")
    for name, ref in sorted(net.exports.items()):
        lines.append(f"  // export {name} = {ref}")
    lines.append("}")
    return "\n".join(lines) + "\n"
