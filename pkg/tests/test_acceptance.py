"""Acceptance criteria, one test each; the terminal summary prints a PASS/FAIL line per criterion."""

from __future__ import annotations

import shutil
import time

import numpy as np
import pytest

from conftest import (
    DATA,
    compile_variant,
    fd_column,
    fixture_text,
    golden_graph,
    isomorphism,
    network_graph,
    networks_isomorphic,
    planar3,
    planar_xy,
    random_network,
    random_q,
    random_tree,
    with_finger_in_wbc,
    with_second_finger,
    with_upper_collection,
)
from ctrlnet.cli import main
from ctrlnet.compiler.merge import MergeError, match_nodes, merge
from ctrlnet.compiler.network import ComponentNetwork, PortRef
from ctrlnet.compiler.ports import CARTESIAN_COMMAND
from ctrlnet.components.wbc import WbcTask, selection_jacobian, wbc_solve
from ctrlnet.config import config_for_document
from ctrlnet.diagnostics import CompileError
from ctrlnet.dsl.parser import parse_text
from ctrlnet.executor import SimulatedPlant, run
from ctrlnet.kinematics import (
    Transform,
    forward_kinematics,
    inverse_kinematics,
    jacobian,
    load_kinematic_description,
    pose_error,
)
from ctrlnet.pipeline import compile_file
from ctrlnet.scenario import load_scenario
from ctrlnet.sequencer import STARTED, TERMINATED, TIMED_OUT, load_sequence, run_sequence

CASCADE = 'push trajectory_generator config: "arm_with_hand"'


def _errors(text: str):
    try:
        compile_variant(text)
    except CompileError as exc:
        return [d for d in exc.diagnostics if d.is_error]
    return []


def _command_path(net: ComponentNetwork, start: str) -> list[str]:
    """Nodes from ``start`` along set-point-like edges down to the dispatcher."""
    path = [start]
    while net.node(path[-1]).kind != "joint_dispatcher":
        (nxt,) = [c.target.node for c in net.outgoing(path[-1]) if net.port_type(c.source).is_setpoint_like]
        path.append(nxt)
    return path


def test_criterion_01_fixture_round_trip():
    t0 = time.perf_counter()
    doc = parse_text(fixture_text(), "fixture.ctrl")
    assert len(doc.robot.devices) == 5
    assert len({j for d in doc.robot.devices for j in d.joint_names}) == 12
    (l2,) = doc.collections
    assert l2.name == "l2" and len(l2.wbc_blocks[0].members) == 3
    assert [c.target_interface for c in l2.cascades] == ["finger"] and len(l2.cascades[0].stages) == 1

    result = compile_file(DATA / "fixture.ctrl")
    assert [d for d in result.diagnostics if d.is_error] == []
    expected, exports = golden_graph(DATA / "fixture_network.golden.json")
    mapping = isomorphism(network_graph(result.network), expected)
    assert mapping is not None
    assert {k: (mapping[v.node], v.port) for k, v in result.network.exports.items()} == exports

    net = result.network
    path = _command_path(net, "l2.other_arm.ctrl")
    assert [net.node(n).kind for n in path].count("mode_converter") == 1
    assert len(net.nodes_of_kind("mode_converter")) == 1
    assert net.exports["l2.finger"] == PortRef("l2.finger.stage1", "setpoint")
    assert time.perf_counter() - t0 < 1.0


def test_criterion_02_exclusivity():
    (d,) = _errors(with_second_finger(fixture_text()))
    assert d.code == "joint-conflict" and "'gr'" in d.message

    result = compile_variant(with_finger_in_wbc(fixture_text()))
    assert result.diagnostics == []
    assert "gr" in result.network.node("l2.wbc").params["joints"]


def test_criterion_03_kinematics_oracles():
    t0 = time.perf_counter()
    planar = load_kinematic_description(DATA / "planar2.urdf")
    rng = np.random.default_rng(2024)

    # FK against closed-form planar trigonometry
    worst = 0.0
    for _ in range(1000):
        t1, t2 = rng.uniform(-3.1, 3.1, 2)
        T = forward_kinematics(planar, {"j1": t1, "j2": t2}, "base", "tool")
        x, y = planar_xy(t1, t2)
        expected = Transform.from_axis_angle((0, 0, 1), t1 + t2, (x, y, 0.0))
        worst = max(worst, float(np.max(np.abs(T.translation - expected.translation))))
        worst = max(worst, float(np.max(np.abs(T.matrix - expected.matrix))))
    assert worst < 1e-12

    # Jacobian against central differences on random trees
    worst = 0.0
    for _ in range(100):
        tree = random_tree(rng, int(rng.integers(1, 7)))
        q = random_q(rng, tree)
        root, tip = tree.root, "tool"
        J = jacobian(tree, q, root, tip)
        for i, n in enumerate(tree.chain(root, tip)):
            worst = max(worst, float(np.max(np.abs(J[:, i] - fd_column(tree, q, root, tip, n)))))
    assert worst < 1e-5

    # IK round trip on targets produced by FK
    worst = 0.0
    for _ in range(100):
        q = {"j1": float(rng.uniform(-3, 3)), "j2": float(rng.uniform(0.2, 2.8))}
        target = forward_kinematics(planar, q, "base", "tool")
        seed = {k: v + float(rng.uniform(-0.3, 0.3)) for k, v in q.items()}
        sol = inverse_kinematics(planar, target, "base", "tool", seed)
        worst = max(worst, float(np.linalg.norm(pose_error(target, forward_kinematics(planar, sol.q, "base", "tool")))))
    assert worst < 1e-6
    assert time.perf_counter() - t0 < 10.0


def test_criterion_04_wbc_hierarchy():
    tree = planar3()
    names = ["j1", "j2", "j3"]
    rng = np.random.default_rng(7)
    for _ in range(100):
        q = dict(zip(names, rng.uniform(-2, 2, 3)))
        J1 = jacobian(tree, q, "base", "tip")[:2]
        x1 = rng.normal(size=2)
        posture = WbcTask(2, selection_jacobian(names, names), rng.normal(size=3))
        cart = WbcTask(1, J1, x1)
        wq = rng.uniform(0.1, 2.0, 3)
        alone = wbc_solve([cart], wq)
        both = wbc_solve([cart, posture], wq)
        assert abs(np.linalg.norm(x1 - J1 @ alone) - np.linalg.norm(x1 - J1 @ both)) < 1e-9

        # a joint with zero weight does not move
        k = int(rng.integers(3))
        w0 = wq.copy()
        w0[k] = 0.0
        assert wbc_solve([cart, posture], w0)[k] == 0.0

        # one full-rank task against a dense least-squares oracle
        sq = np.sqrt(wq)
        oracle = sq * np.linalg.lstsq(J1 * sq, x1, rcond=None)[0]
        np.testing.assert_allclose(alone, oracle, atol=1e-9, rtol=0)


def test_criterion_05_merge_algebra():
    empty = ComponentNetwork()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        a, b = random_network(rng), random_network(rng)
        assert merge(a, a) == a
        assert merge(a, empty) == a and merge(empty, a) == a
        ab, ba = merge(a, b), merge(b, a)
        assert networks_isomorphic(ab, ba)
        assert max(len(a), len(b)) <= len(ab) <= len(a) + len(b)

    pa = compile_file(DATA / "pair_a.ctrl").network
    pb = compile_file(DATA / "pair_b.ctrl").network
    m = merge(pa, pb)
    assert [n.id for n in m.nodes_of_kind("device_driver") if n.config == "armr"] == ["device.armr"]
    assert len(m.nodes_of_kind("joint_dispatcher")) == 1
    assert networks_isomorphic(m, merge(pb, pa))
    assert merge(m, m) == m
    with pytest.raises(MergeError):
        merge(compile_file(DATA / "fixture.ctrl").network, pa)


def test_criterion_06_cascade_semantics():
    (d,) = _errors(fixture_text().replace(CASCADE, 'push motion_plan config: "p"\n    push trajectory_generator'))
    assert d.code == "cascade-no-setpoint"

    variants = {
        "one stage": (CASCADE, True),
        "two stages": ('push pid_controller config: "inner"\n    push trajectory_generator config: "outer"', True),
        "plan outermost": ('push trajectory_generator\n    push motion_plan config: "plan"', False),
    }
    for label, (stages, exported) in variants.items():
        net = compile_variant(fixture_text().replace(CASCADE, stages)).network
        chain = sorted((n for n in net.nodes if n.startswith("l2.finger.stage")), key=lambda s: int(s.rpartition("stage")[2]))
        inner = "l2.finger.ctrl"
        for outer in chain:
            assert net.writers(PortRef(inner, "setpoint")) == [PortRef(outer, "command")], label
            inner = outer
        top = net.node(chain[-1])
        assert ("setpoint" in top.inputs) == exported, label
        assert ("l2.finger" in net.exports) == exported, label
        if exported:
            assert net.exports["l2.finger"] == PortRef(chain[-1], "setpoint")


def test_criterion_07_layering():
    (d,) = _errors(with_upper_collection(fixture_text(), "gl"))
    assert d.code == "non-exported-joint"

    lower = compile_file(DATA / "fixture.ctrl").network
    net = compile_variant(with_upper_collection(fixture_text(), "gr")).network
    lower_ports = {str(r) for r in lower.exports.values()}
    upper = {n for n in net.nodes if n.startswith("l3.")}
    crossing = [c for c in net.connections if (c.source.node in upper) != (c.target.node in upper)]
    assert crossing
    for c in crossing:
        lower_end = c.target if c.source.node in upper else c.source
        assert str(lower_end) in lower_ports


def test_criterion_08_end_to_end_convergence(tmp_path):
    t0 = time.perf_counter()
    result = compile_file(DATA / "fixture.ctrl")
    config = config_for_document(DATA / "fixture.ctrl")
    sc = load_scenario(DATA / "fixture.scenario.yaml")
    net, tree = result.network, result.tree
    pt = net.port_type(net.exports["l2.other_arm"])
    assert pt.kind == CARTESIAN_COMMAND
    root, tip = pt.frames

    plans = sc.plans(net)
    goal = plans["l2.other_arm"].goal
    sol = inverse_kinematics(tree, goal, root, tip, {j: 0.0 for j in tree.chain(root, tip)})
    assert np.linalg.norm(pose_error(goal, forward_kinematics(tree, sol.q, root, tip))) < 1e-6
    assert sol.limit_violations == ()

    assert (sc.dt, sc.duration) == (0.01, 10.0)
    plant = SimulatedPlant.for_network(tree, net, config, sc.initial)
    trace = run(net, plant, sc.duration, sc.dt, plans, config=config)
    assert trace.error is None and len(trace) == 1000
    final = forward_kinematics(tree, trace.final_plant.positions(), root, tip)
    assert np.linalg.norm(final.translation - goal.translation) < 1e-3
    elapsed = time.perf_counter() - t0

    for name in ("a.csv", "b.csv"):
        assert main(["simulate", str(DATA / "fixture.ctrl"), str(DATA / "fixture.scenario.yaml"), "--trace", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert elapsed < 5.0


def test_criterion_09_sequencer_continuity():
    stages = load_sequence(DATA / "two_stage.seq")
    first = stages[0]
    plant = SimulatedPlant.for_network(first.compiled.tree, first.network, first.config)
    trace, events = run_sequence(stages, plant, 0.01)
    assert trace.error is None

    assert len(events) == 2 * len(stages)
    for k, stage in enumerate(stages):
        start, end = events[2 * k], events[2 * k + 1]
        assert (start.stage, start.kind) == (stage.name, STARTED)
        assert end.stage == stage.name and end.kind in (TERMINATED, TIMED_OUT)
    switch = events[2].tick
    assert events[1].tick == switch

    # both stages share the driver and the dispatcher
    shared = match_nodes(stages[0].network, stages[1].network)
    assert {"device.armr", "dispatcher"} <= set(shared)

    limit = max(s.config.get("trajectory_generator", s.network.node("arm.reach.stage1").config)["max_vel"] for s in stages)
    for j in ("ar", "br", "cr"):
        p = trace.column(f"plant.{j}.position")
        steps = np.abs(np.diff(p))
        assert np.max(steps) <= limit * 0.01 + 1e-12
        # row k holds the state before tick k, so steps[switch] is the first move under the new network
        assert steps[switch] <= steps[switch - 1] + 1e-12


def test_criterion_10_determinism(tmp_path):
    work = tmp_path / "work"
    shutil.copytree(DATA, work)
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        out.mkdir()
        assert main(["compile", str(work / "fixture.ctrl"), "--out-dir", str(out)]) == 0
        assert main(["simulate", str(work / "fixture.ctrl"), str(work / "fixture.scenario.yaml"), "--duration", "2", "--trace", str(out / "sim.csv")]) == 0
        assert main(["sequence", str(work / "two_stage.seq"), "--trace", str(out / "seq.csv"), "--events", str(out / "events.txt")]) == 0
        runs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert sorted(runs[0]) == ["events.txt", "network.dot", "network.json", "seq.csv", "sim.csv"]
    for name in runs[0]:
        assert runs[0][name] == runs[1][name], name
