"""Merging component networks by unifying structurally redundant nodes.

Two nodes are merge-equal when they have the same signature (kind, config,
parameters), agree on the types of shared port names, and every input port
connected in both networks is fed by merge-equal sources through the same
output port. The relation is computed as a greatest fixpoint, so nodes on
feedback cycles (driver -> dispatcher -> driver) unify together.

Device drivers stand for physical devices and a dispatcher for the joint
layer of one collection, so their inputs are not compared: two drivers of one
device (or two dispatchers over the same joints) always unify, and a merge
that would feed the unified node from two different sources is rejected.
"""

from __future__ import annotations

from .network import ComponentNetwork, ComponentNode, Connection, NetworkError, PortRef, validate_network
from .registry import JOINT_DISPATCHER, PLANT_BOUNDARY


class MergeError(Exception):
    """The union of two networks violates a network invariant."""


def _writers(net: ComponentNetwork) -> dict[PortRef, list[PortRef]]:
    table: dict[PortRef, list[PortRef]] = {}
    for c in net.connections:
        table.setdefault(c.target, []).append(c.source)
    return table


def _ports_agree(u: ComponentNode, v: ComponentNode) -> bool:
    for p in set(u.inputs) | set(u.outputs):
        tu, tv = u.port_type(p), v.port_type(p)
        if tv is None:
            continue
        if tu != tv or (p in u.inputs) != (p in v.inputs):
            return False
    return True


def match_nodes(a: ComponentNetwork, b: ComponentNetwork) -> dict[str, str]:
    """One-to-one map from node ids of ``a`` to merge-equal node ids of ``b``."""
    wa, wb = _writers(a), _writers(b)
    by_sig: dict[str, list[str]] = {}
    for v in b.nodes.values():
        by_sig.setdefault(v.signature, []).append(v.id)
    rel = {
        (u.id, vid)
        for u in a.nodes.values()
        for vid in by_sig.get(u.signature, ())
        if _ports_agree(u, b.nodes[vid])
    }

    def fed_alike(u: str, v: str, ok) -> bool:
        nu, nv = a.nodes[u], b.nodes[v]
        if nu.kind in PLANT_BOUNDARY or nu.kind == JOINT_DISPATCHER:
            return True
        for p in nu.inputs:
            if p not in nv.inputs:
                continue
            sa, sb = wa.get(PortRef(u, p), []), wb.get(PortRef(v, p), [])
            if not sa or not sb:
                continue
            for x in sa:
                if not any(x.port == y.port and ok(x.node, y.node) for y in sb):
                    return False
            for y in sb:
                if not any(x.port == y.port and ok(x.node, y.node) for x in sa):
                    return False
        return True

    while True:
        changed = True
        while changed:
            changed = False
            for pair in sorted(rel):
                if not fed_alike(*pair, lambda x, y: (x, y) in rel):
                    rel.discard(pair)
                    changed = True
        # greedy one-to-one choice, preferring identical ids
        mapping: dict[str, str] = {}
        used: set[str] = set()
        for u, v in sorted(rel, key=lambda p: (p[0] != p[1], min(p), max(p), p)):
            if u not in mapping and v not in used:
                mapping[u] = v
                used.add(v)
        broken = [(u, v) for u, v in mapping.items() if not fed_alike(u, v, lambda x, y: mapping.get(x) == y)]
        if not broken:
            return mapping
        rel.difference_update(broken)


def _union_node(u: ComponentNode, v: ComponentNode) -> ComponentNode:
    return ComponentNode(u.id, u.kind, u.config, {**v.inputs, **u.inputs}, {**v.outputs, **u.outputs}, u.params)


def merge(a: ComponentNetwork, b: ComponentNetwork) -> ComponentNetwork:
    """Union of ``a`` and ``b`` with merge-equal nodes unified; raises :class:`MergeError`."""
    mapping = match_nodes(a, b)
    b_to_a = {v: u for u, v in mapping.items()}
    nodes = dict(a.nodes)
    for u, v in mapping.items():
        nodes[u] = _union_node(a.nodes[u], b.nodes[v])
    rename: dict[str, str] = dict(b_to_a)
    for vid in sorted(b.nodes):
        if vid in b_to_a:
            continue
        new = vid
        k = 2
        while new in nodes:
            new = f"{vid}#{k}"
            k += 1
        rename[vid] = new
        n = b.nodes[vid]
        nodes[new] = ComponentNode(new, n.kind, n.config, n.inputs, n.outputs, n.params)

    def mapped(ref: PortRef) -> PortRef:
        return PortRef(rename[ref.node], ref.port)

    conns = list(a.connections) + [Connection(mapped(c.source), mapped(c.target)) for c in b.connections]
    exports = dict(a.exports)
    for name, ref in b.exports.items():
        r = mapped(ref)
        if name in exports and exports[name] != r:
            raise MergeError(f"export '{name}' refers to '{exports[name]}' and '{r}'")
        exports[name] = r
    net = ComponentNetwork(nodes, tuple(conns), exports)
    _check_writers(net)
    _check_dispatchers(net)
    try:
        validate_network(net)
    except NetworkError as exc:
        raise MergeError(str(exc)) from None
    return net


def _check_writers(net: ComponentNetwork) -> None:
    for target, srcs in sorted(_writers(net).items(), key=lambda kv: str(kv[0])):
        if len(srcs) > 1:
            names = " and ".join(f"'{s}'" for s in sorted(srcs, key=str))
            raise MergeError(f"input '{target}' would be written by {names}")


def _check_dispatchers(net: ComponentNetwork) -> None:
    writers = _writers(net)
    for n in net.nodes_of_kind(JOINT_DISPATCHER):
        owner: dict[str, PortRef] = {}
        for p in sorted(n.inputs):
            if not p.startswith("cmd_"):
                continue
            srcs = writers.get(PortRef(n.id, p), [])
            if not srcs:
                continue
            for j in n.inputs[p].joints:
                if j in owner:
                    raise MergeError(f"joint '{j}' at '{n.id}' would be commanded by '{owner[j]}' and '{srcs[0]}'")
                owner[j] = srcs[0]
