from __future__ import annotations

import numpy as np
import pytest

from conftest import DATA, networks_isomorphic, random_network
from ctrlnet.compiler.merge import MergeError, match_nodes, merge
from ctrlnet.compiler.network import ComponentNetwork, ComponentNode, Connection, PortRef
from ctrlnet.compiler.ports import joint_command, joint_state
from ctrlnet.pipeline import compile_file


@pytest.fixture(scope="module")
def pair():
    return compile_file(DATA / "pair_a.ctrl").network, compile_file(DATA / "pair_b.ctrl").network


def test_idempotent_on_fixture(fixture_result):
    net = fixture_result.network
    assert merge(net, net) == net


def test_empty_is_identity(fixture_result):
    net = fixture_result.network
    assert merge(net, ComponentNetwork()) == net
    assert merge(ComponentNetwork(), net) == net


def test_shared_armr_driver_and_dispatcher(pair):
    a, b = pair
    m = merge(a, b)
    assert len(m.nodes_of_kind("device_driver")) == 5
    assert [n.id for n in m.nodes_of_kind("device_driver") if n.config == "armr"] == ["device.armr"]
    (disp,) = m.nodes_of_kind("joint_dispatcher")
    assert {"cmd_reach_a", "cmd_reach_b", "iface_reach_a", "iface_reach_b"} <= set(disp.inputs) | set(disp.outputs)
    assert len(m) == len(a) + len(b) - 6
    assert set(m.exports) == set(a.exports) | set(b.exports)


def test_shared_pair_commutes(pair):
    a, b = pair
    assert networks_isomorphic(merge(a, b), merge(b, a))


def test_match_follows_structure_not_ids(pair):
    a, _ = pair
    renamed = ComponentNetwork.build(
        [ComponentNode("x" + n.id, n.kind, n.config, n.inputs, n.outputs, n.params) for n in a.nodes.values()],
        [Connection(PortRef("x" + c.source.node, c.source.port), PortRef("x" + c.target.node, c.target.port)) for c in a.connections],
        {k: PortRef("x" + v.node, v.port) for k, v in a.exports.items()},
    )
    mapping = match_nodes(a, renamed)
    assert mapping == {n: "x" + n for n in a.nodes}
    assert len(merge(a, renamed)) == len(a)


def test_overlapping_joint_commands_are_rejected(fixture_result, pair):
    a, _ = pair
    # collection a commands 'ar'; the fixture's wbc block commands it too
    with pytest.raises(MergeError, match="joint 'ar'"):
        merge(fixture_result.network, a)


def test_two_writers_named_in_error():
    c = joint_command("position", ["q"])
    s = joint_state(["q"])
    drv = ComponentNode("drv", "device_driver", "d", {"cmd": c}, {"state": s})
    p1 = ComponentNode("p1", "pid_controller", "one", {}, {"command": c})
    p2 = ComponentNode("p2", "pid_controller", "two", {}, {"command": c})
    a = ComponentNetwork.build([drv, p1], [Connection(PortRef("p1", "command"), PortRef("drv", "cmd"))], {})
    b = ComponentNetwork.build([drv, p2], [Connection(PortRef("p2", "command"), PortRef("drv", "cmd"))], {})
    with pytest.raises(MergeError) as info:
        merge(a, b)
    assert "'p1.command'" in str(info.value) and "'p2.command'" in str(info.value)


def test_conflicting_export_names():
    s = joint_state(["q"])
    a = ComponentNetwork.build([ComponentNode("k", "kinematics", "a", {}, {"out": s})], [], {"e": PortRef("k", "out")})
    b = ComponentNetwork.build([ComponentNode("m", "kinematics", "b", {}, {"out": s})], [], {"e": PortRef("m", "out")})
    with pytest.raises(MergeError, match="export 'e'"):
        merge(a, b)


def test_greatest_fixpoint_unifies_feedback_cycle():
    c = joint_command("position", ["q"])
    s = joint_state(["q"])

    def loop(prefix):
        drv = ComponentNode(prefix + "drv", "device_driver", "d", {"cmd": c}, {"state": s})
        pid = ComponentNode(prefix + "pid", "pid_controller", "p", {"feedback": s}, {"command": c})
        return ComponentNetwork.build(
            [drv, pid],
            [
                Connection(PortRef(prefix + "drv", "state"), PortRef(prefix + "pid", "feedback")),
                Connection(PortRef(prefix + "pid", "command"), PortRef(prefix + "drv", "cmd")),
            ],
            {},
        )

    a, b = loop("a_"), loop("b_")
    assert match_nodes(a, b) == {"a_drv": "b_drv", "a_pid": "b_pid"}
    assert len(merge(a, b)) == 2


def test_differently_fed_nodes_stay_apart():
    s1, s2 = joint_state(["q"]), joint_state(["q"])
    src1 = ComponentNode("src", "kinematics", "one", {}, {"out": s1})
    src2 = ComponentNode("src", "kinematics", "two", {}, {"out": s2})
    user = ComponentNode("use", "pid_controller", "p", {"feedback": s1}, {})
    a = ComponentNetwork.build([src1, user], [Connection(PortRef("src", "out"), PortRef("use", "feedback"))], {})
    b = ComponentNetwork.build([src2, user], [Connection(PortRef("src", "out"), PortRef("use", "feedback"))], {})
    m = merge(a, b)
    assert sorted(m.nodes) == ["src", "src#2", "use", "use#2"]


@pytest.mark.parametrize("seed", range(50))
def test_random_network_algebra(seed):
    rng = np.random.default_rng(seed)
    a, b = random_network(rng), random_network(rng)
    assert merge(a, a) == a
    assert merge(a, ComponentNetwork()) == a
    ab, ba = merge(a, b), merge(b, a)
    assert networks_isomorphic(ab, ba)
    assert max(len(a), len(b)) <= len(ab) <= len(a) + len(b)
    # the same draw with its original ids merges back to its own size
    assert len(merge(ab, ab)) == len(ab)
