"""Kinematic trees: URDF-subset parsing, forward/inverse kinematics, Jacobians
and frame-graph transform lookup.

Transforms follow the ``T_a_b`` convention: the pose of frame ``b`` expressed
in frame ``a``, so ``T_a_c = T_a_b @ T_b_c``.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

import numpy as np

ARTICULATED = ("revolute", "continuous", "prismatic")
JOINT_KINDS = ARTICULATED + ("fixed",)


class KinematicsError(Exception):
    """Malformed kinematic description or an invalid query against one."""


class IKError(KinematicsError):
    """Inverse kinematics did not converge; carries the best iterate."""

    def __init__(self, message: str, best: dict[str, float], residual: float, iterations: int):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iterations = iterations


class TransformLookupError(KinematicsError):
    pass


# ---------------------------------------------------------------------------
# quaternion helpers, (w, x, y, z) order


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.asarray(a, dtype=float).tolist()
    bw, bx, by, bz = np.asarray(b, dtype=float).tolist()
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    s = math.sin(angle / 2.0)
    return np.array([math.cos(angle / 2.0), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_from_rotvec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    angle = float(np.linalg.norm(v))
    if angle < 1e-300:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return quat_from_axis_angle(v / angle, angle)


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a unit quaternion, angle in [0, pi]."""
    if q[0] < 0.0:
        q = -q
    v = q[1:]
    s = float(np.linalg.norm(v))
    if s < 1e-300:
        return np.zeros(3)
    angle = 2.0 * math.atan2(s, q[0])
    return v / s * angle


def quat_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    # URDF convention: R = Rz(yaw) Ry(pitch) Rx(roll)
    qx = quat_from_axis_angle((1.0, 0.0, 0.0), roll)
    qy = quat_from_axis_angle((0.0, 1.0, 0.0), pitch)
    qz = quat_from_axis_angle((0.0, 0.0, 1.0), yaw)
    return quat_mul(quat_mul(qz, qy), qx)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_rotate(q: np.ndarray, v) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float).tolist()
    vx, vy, vz = np.asarray(v, dtype=float).tolist()
    # v + 2w (u x v) + 2 u x (u x v), u = (x, y, z)
    cx, cy, cz = y * vz - z * vy, z * vx - x * vz, x * vy - y * vx
    return np.array(
        [
            vx + 2.0 * (w * cx + y * cz - z * cy),
            vy + 2.0 * (w * cy + z * cx - x * cz),
            vz + 2.0 * (w * cz + x * cy - y * cx),
        ]
    )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Transform:
    """Rigid transform: unit quaternion (w, x, y, z) plus translation in meters."""

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float).reshape(4)
        n = float(np.linalg.norm(q))
        if not np.isfinite(n) or n == 0.0:
            raise ValueError("rotation quaternion must be finite and non-zero")
        if abs(n - 1.0) > 1e-12:
            q = q / n
        object.__setattr__(self, "rotation", _frozen(q))
        object.__setattr__(self, "translation", _frozen(np.asarray(self.translation, dtype=float).reshape(3)))

    @classmethod
    def identity(cls) -> Transform:
        return cls()

    @classmethod
    def from_translation(cls, x: float, y: float = 0.0, z: float = 0.0) -> Transform:
        return cls(translation=(x, y, z))

    @classmethod
    def from_axis_angle(cls, axis, angle: float, translation=(0.0, 0.0, 0.0)) -> Transform:
        return cls(quat_from_axis_angle(axis, angle), translation)

    @classmethod
    def from_xyz_rpy(cls, xyz=(0.0, 0.0, 0.0), rpy=(0.0, 0.0, 0.0)) -> Transform:
        return cls(quat_from_rpy(*rpy), xyz)

    @property
    def matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    @property
    def homogeneous(self) -> np.ndarray:
        h = np.eye(4)
        h[:3, :3] = self.matrix
        h[:3, 3] = self.translation
        return h

    @classmethod
    def _trusted(cls, rotation: np.ndarray, translation: np.ndarray) -> Transform:
        # products and inverses of unit quaternions are unit to rounding; skip re-validation
        t = object.__new__(cls)
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(t, "rotation", rotation)
        object.__setattr__(t, "translation", translation)
        return t

    def __matmul__(self, other: Transform) -> Transform:
        return Transform._trusted(
            quat_mul(self.rotation, other.rotation),
            self.translation + quat_rotate(self.rotation, other.translation),
        )

    def inverse(self) -> Transform:
        qi = quat_conj(self.rotation)
        return Transform._trusted(qi, -quat_rotate(qi, self.translation))

    def apply(self, point) -> np.ndarray:
        return self.translation + quat_rotate(self.rotation, point)

    def allclose(self, other: Transform, atol: float = 1e-9) -> bool:
        return pose_distance(self, other) <= atol

    def __repr__(self) -> str:
        r = ", ".join(f"{v:.6g}" for v in self.rotation)
        t = ", ".join(f"{v:.6g}" for v in self.translation)
        return f"Transform(rotation=[{r}], translation=[{t}])"


def pose_error(target: Transform, current: Transform) -> np.ndarray:
    """6-vector (translation difference; axis-angle of target * current^-1)."""
    rot = quat_to_rotvec(quat_mul(target.rotation, quat_conj(current.rotation)))
    return np.concatenate([target.translation - current.translation, rot])


def pose_distance(a: Transform, b: Transform) -> float:
    return float(np.max(np.abs(pose_error(a, b))))


def interpolate_pose(a: Transform, b: Transform, s: float) -> Transform:
    """Linear translation and geodesic rotation blend, ``s`` in [0, 1]."""
    if s <= 0.0:
        return a
    if s >= 1.0:
        return b
    delta = quat_to_rotvec(quat_mul(b.rotation, quat_conj(a.rotation)))
    q = quat_mul(quat_from_rotvec(delta * s), a.rotation)
    return Transform(q, a.translation + s * (b.translation - a.translation))


# ---------------------------------------------------------------------------
# tree model


@dataclass(frozen=True)
class JointSpec:
    name: str
    kind: str
    parent: str
    child: str
    origin: Transform = field(default_factory=Transform)
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)
    limits: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in JOINT_KINDS:
            raise KinematicsError(f"joint '{self.name}': unsupported joint kind '{self.kind}'")
        axis = np.asarray(self.axis, dtype=float)
        if self.articulated:
            n = float(np.linalg.norm(axis))
            if n == 0.0:
                raise KinematicsError(f"joint '{self.name}': zero-length axis")
            axis = axis / n
        object.__setattr__(self, "axis", tuple(float(v) for v in axis))
        if self.limits is not None:
            lo, hi = self.limits
            if lo > hi:
                raise KinematicsError(f"joint '{self.name}': lower limit {lo} exceeds upper limit {hi}")

    @property
    def articulated(self) -> bool:
        return self.kind in ARTICULATED

    def motion(self, q: float) -> Transform:
        ax, ay, az = self.axis
        if self.kind in ("revolute", "continuous"):
            s = math.sin(q / 2.0)
            return Transform._trusted(np.array([math.cos(q / 2.0), ax * s, ay * s, az * s]), np.zeros(3))
        if self.kind == "prismatic":
            return Transform._trusted(np.array([1.0, 0.0, 0.0, 0.0]), np.array([ax * q, ay * q, az * q]))
        return Transform()

    def transform(self, q: float = 0.0) -> Transform:
        """Parent-segment frame to child-segment frame at position ``q``."""
        if not self.articulated:
            return self.origin
        return self.origin @ self.motion(q)

    def within_limits(self, q: float, tol: float = 0.0) -> bool:
        if self.limits is None or self.kind == "continuous":
            return True
        return self.limits[0] - tol <= q <= self.limits[1] + tol


@dataclass(frozen=True)
class KinematicTree:
    root: str
    segments: tuple[str, ...]
    joints: tuple[JointSpec, ...]

    def __post_init__(self):
        seen: set[str] = set()
        for s in self.segments:
            if s in seen:
                raise KinematicsError(f"duplicate link name '{s}'")
            seen.add(s)
        if self.root not in seen:
            raise KinematicsError(f"root segment '{self.root}' is not a link")
        names: set[str] = set()
        parent_of: dict[str, str] = {}
        for j in self.joints:
            if j.name in names:
                raise KinematicsError(f"duplicate joint name '{j.name}'")
            names.add(j.name)
            for end in (j.parent, j.child):
                if end not in seen:
                    raise KinematicsError(f"joint '{j.name}' references unknown link '{end}'")
            if j.child in parent_of or j.child == self.root:
                raise KinematicsError(f"joint '{j.name}': cyclic or multi-parent structure at link '{j.child}'")
            parent_of[j.child] = j.name
        # every segment must hang off the root
        reachable = {self.root}
        frontier = [self.root]
        children: dict[str, list[str]] = {}
        for j in self.joints:
            children.setdefault(j.parent, []).append(j.child)
        while frontier:
            s = frontier.pop()
            for c in children.get(s, []):
                reachable.add(c)
                frontier.append(c)
        stray = [s for s in self.segments if s not in reachable]
        if stray:
            if all(s in parent_of for s in stray):
                raise KinematicsError(f"cyclic or multi-parent structure involving link '{stray[0]}'")
            raise KinematicsError(f"link '{stray[0]}' is not connected to root '{self.root}'")

    @cached_property
    def _joint_by_name(self) -> dict[str, JointSpec]:
        return {j.name: j for j in self.joints}

    @cached_property
    def _parent_joint(self) -> dict[str, JointSpec]:
        return {j.child: j for j in self.joints}

    def joint(self, name: str) -> JointSpec:
        try:
            return self._joint_by_name[name]
        except KeyError:
            raise KinematicsError(f"unknown joint '{name}'") from None

    def has_joint(self, name: str) -> bool:
        return name in self._joint_by_name

    def has_segment(self, name: str) -> bool:
        return name in self._parent_joint or name == self.root or name in self.segments

    @property
    def articulated_joints(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints if j.articulated)

    def _ancestry(self, segment: str) -> list[JointSpec]:
        """Joints from the tree root down to ``segment``."""
        if segment not in self.segments:
            raise KinematicsError(f"unknown segment '{segment}'")
        path = []
        while segment in self._parent_joint:
            j = self._parent_joint[segment]
            path.append(j)
            segment = j.parent
        return path[::-1]

    @cached_property
    def _paths(self) -> dict[tuple[str, str], list[tuple[JointSpec, int]]]:
        return {}

    def path(self, root: str, tip: str) -> list[tuple[JointSpec, int]]:
        """Joints traversed from ``root`` to ``tip``; direction -1 means child-to-parent."""
        key = (root, tip)
        if key not in self._paths:
            self._paths[key] = self._compute_path(root, tip)
        return list(self._paths[key])

    def _compute_path(self, root: str, tip: str) -> list[tuple[JointSpec, int]]:
        up = self._ancestry(root)
        down = self._ancestry(tip)
        k = 0
        while k < len(up) and k < len(down) and up[k] is down[k]:
            k += 1
        return [(j, -1) for j in reversed(up[k:])] + [(j, +1) for j in down[k:]]

    def chain(self, root: str, tip: str) -> tuple[str, ...]:
        """Articulated joint names on the root-to-tip path, in traversal order."""
        return tuple(j.name for j, _ in self.path(root, tip) if j.articulated)


def _require(q: Mapping[str, float], joint: JointSpec) -> float:
    try:
        return float(q[joint.name])
    except KeyError:
        raise KinematicsError(f"missing value for joint '{joint.name}'") from None


def forward_kinematics(tree: KinematicTree, q: Mapping[str, float], root: str, tip: str) -> Transform:
    T = Transform()
    for joint, direction in tree.path(root, tip):
        step = joint.transform(_require(q, joint) if joint.articulated else 0.0)
        T = T @ (step if direction > 0 else step.inverse())
    return T


def jacobian(tree: KinematicTree, q: Mapping[str, float], root: str, tip: str) -> np.ndarray:
    """6 x n geometric Jacobian of ``tip`` relative to ``root``, expressed in ``root``.

    Rows are (linear; angular); columns follow :meth:`KinematicTree.chain`.
    """
    path = tree.path(root, tip)
    T = Transform()
    axes = []
    for joint, direction in path:
        qj = _require(q, joint) if joint.articulated else 0.0
        if direction > 0:
            frame = T @ joint.origin
            T = frame @ joint.motion(qj)
        else:
            # walking upward: the joint frame sits at child @ motion^-1
            frame = T @ joint.motion(qj).inverse()
            T = frame @ joint.origin.inverse()
        if joint.articulated:
            axes.append((joint, direction, quat_rotate(frame.rotation, joint.axis), frame.translation))
    p_tip = T.translation
    J = np.zeros((6, len(axes)))
    for i, (joint, direction, w, p) in enumerate(axes):
        if joint.kind == "prismatic":
            J[:3, i] = direction * w
        else:
            rx, ry, rz = (p_tip - p).tolist()
            wx, wy, wz = w.tolist()
            J[:3, i] = (direction * (wy * rz - wz * ry), direction * (wz * rx - wx * rz), direction * (wx * ry - wy * rx))
            J[3:, i] = direction * w
    return J


class IKSolution(NamedTuple):
    q: dict[str, float]
    iterations: int
    residual: float
    limit_violations: tuple[str, ...]


def inverse_kinematics(
    tree: KinematicTree,
    target: Transform,
    root: str,
    tip: str,
    seed: Mapping[str, float],
    *,
    max_iter: int = 200,
    tol: float = 1e-6,
    damping: float = 0.1,
) -> IKSolution:
    """Damped least squares: ``q <- q + J^T (J J^T + damping^2 I)^-1 e``.

    The residual is the Euclidean norm of the 6-vector pose error. Joint limits
    are reported in ``limit_violations`` but never clamp the iterates.
    """
    names = tree.chain(root, tip)
    q = dict(seed)
    for n in names:
        if n not in q:
            raise KinematicsError(f"seed is missing chain joint '{n}'")
    x = np.array([float(q[n]) for n in names])
    best_x, best_err = x.copy(), math.inf
    lam2 = damping * damping
    for it in range(max_iter + 1):
        q.update(zip(names, x.tolist()))
        e = pose_error(target, forward_kinematics(tree, q, root, tip))
        err = float(np.linalg.norm(e))
        if err < best_err:
            best_x, best_err = x.copy(), err
        if err < tol:
            violations = tuple(n for n in names if not tree.joint(n).within_limits(q[n]))
            return IKSolution({n: float(v) for n, v in zip(names, x)}, it, err, violations)
        if it == max_iter:
            break
        J = jacobian(tree, q, root, tip)
        x = x + J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(6), e)
    best = {n: float(v) for n, v in zip(names, best_x)}
    raise IKError(
        f"inverse kinematics did not converge after {max_iter} iterations (residual {best_err:.3g})",
        best,
        best_err,
        max_iter,
    )


def lookup_transform(edges: Iterable[tuple[str, str, Transform]], source: str, target: str) -> Transform:
    """Pose of ``target`` in ``source`` from a graph of known ``T_a_b`` edges.

    Edges are invertible; any connecting path is used (breadth first, neighbours
    visited in sorted order so the choice is deterministic).
    """
    if source == target:
        return Transform()
    adj: dict[str, list[tuple[str, Transform]]] = {}
    for a, b, T in edges:
        adj.setdefault(a, []).append((b, T))
        adj.setdefault(b, []).append((a, T.inverse()))
    for nbrs in adj.values():
        nbrs.sort(key=lambda e: e[0])
    found = {source: Transform()}
    queue = deque([source])
    while queue:
        f = queue.popleft()
        for g, T in adj.get(f, ()):
            if g not in found:
                found[g] = found[f] @ T
                if g == target:
                    return found[g]
                queue.append(g)
    other = _component(adj, target)
    raise TransformLookupError(
        f"frames '{source}' and '{target}' are not connected "
        f"(components represented by '{min(found)}' and '{min(other)}')"
    )


def _component(adj, start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        f = stack.pop()
        for g, _ in adj.get(f, ()):
            if g not in seen:
                seen.add(g)
                stack.append(g)
    return seen


# ---------------------------------------------------------------------------
# URDF subset


def _floats(text: str | None, n: int, what: str) -> tuple[float, ...]:
    if text is None:
        return (0.0,) * n
    try:
        vals = tuple(float(v) for v in text.split())
    except ValueError:
        raise KinematicsError(f"{what}: expected {n} numbers, got '{text}'") from None
    if len(vals) != n:
        raise KinematicsError(f"{what}: expected {n} numbers, got '{text}'")
    return vals


def parse_kinematic_description(text: str) -> KinematicTree:
    """Build a :class:`KinematicTree` from URDF text.

    Only ``link``, ``joint`` (revolute, continuous, prismatic, fixed), ``origin``,
    ``axis`` and ``limit`` are interpreted; everything else is ignored.
    """
    try:
        root_el = ET.fromstring(text)
    except ET.ParseError as exc:
        raise KinematicsError(f"malformed XML: {exc}") from None
    if root_el.tag != "robot":
        raise KinematicsError(f"expected <robot> root element, found <{root_el.tag}>")

    links: list[str] = []
    for el in root_el.findall("link"):
        name = el.get("name")
        if not name:
            raise KinematicsError("<link> without a name")
        if name in links:
            raise KinematicsError(f"duplicate link name '{name}'")
        links.append(name)
    if not links:
        raise KinematicsError("document declares no links")

    joints: list[JointSpec] = []
    for el in root_el.findall("joint"):
        name = el.get("name")
        if not name:
            raise KinematicsError("<joint> without a name")
        kind = el.get("type")
        if kind not in JOINT_KINDS:
            raise KinematicsError(f"joint '{name}': unsupported joint kind '{kind}'")
        parent = el.find("parent")
        child = el.find("child")
        if parent is None or child is None or not parent.get("link") or not child.get("link"):
            raise KinematicsError(f"joint '{name}': missing parent or child link")
        origin = Transform()
        o = el.find("origin")
        if o is not None:
            origin = Transform.from_xyz_rpy(
                _floats(o.get("xyz"), 3, f"joint '{name}' origin xyz"),
                _floats(o.get("rpy"), 3, f"joint '{name}' origin rpy"),
            )
        axis = (1.0, 0.0, 0.0)
        a = el.find("axis")
        if a is not None and a.get("xyz") is not None:
            axis = _floats(a.get("xyz"), 3, f"joint '{name}' axis")
        limits = None
        lim = el.find("limit")
        if lim is not None and kind in ("revolute", "prismatic"):
            if lim.get("lower") is not None or lim.get("upper") is not None:
                limits = (
                    _floats(lim.get("lower", "0"), 1, f"joint '{name}' lower limit")[0],
                    _floats(lim.get("upper", "0"), 1, f"joint '{name}' upper limit")[0],
                )
        joints.append(JointSpec(name, kind, parent.get("link"), child.get("link"), origin, axis, limits))

    children = {j.child for j in joints}
    roots = [l for l in links if l not in children]
    if len(roots) != 1:
        if not roots:
            raise KinematicsError("cyclic or multi-parent structure: no root link")
        raise KinematicsError(f"multiple root links: {', '.join(roots)}")
    seen_child: dict[str, str] = {}
    for j in joints:
        if j.child in seen_child:
            raise KinematicsError(
                f"cyclic or multi-parent structure: link '{j.child}' is the child of "
                f"joints '{seen_child[j.child]}' and '{j.name}'"
            )
        seen_child[j.child] = j.name
    return KinematicTree(roots[0], tuple(links), tuple(joints))


def load_kinematic_description(path) -> KinematicTree:
    with open(path, encoding="utf-8") as fh:
        return parse_kinematic_description(fh.read())
