"""Rigid poses, box-shaped brick models, sockets and box-box intersection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from ..accel import njit, pick

POS_TOL = 0.005
ANGLE_TOL = np.deg2rad(10.0)


def quat_normalize(q):
    q = np.asarray(q, float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_matrix(q) -> np.ndarray:
    """Rotation matrices for scalar-last quaternions (..., 4)."""
    return Rotation.from_quat(np.asarray(q, float).reshape(-1, 4)).as_matrix().reshape(
        np.shape(q)[:-1] + (3, 3))


def quat_angle(q1, q2) -> float:
    """Geodesic angle between two orientations."""
    d = abs(float(np.dot(quat_normalize(q1), quat_normalize(q2))))
    return 2.0 * np.arccos(min(1.0, d))


@dataclass
class Pose6DoF:
    r: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.r = np.asarray(self.r, float).reshape(3)
        self.q = quat_normalize(np.asarray(self.q, float).reshape(4))

    @property
    def R(self) -> np.ndarray:
        return quat_matrix(self.q)

    def apply(self, p) -> np.ndarray:
        return self.R @ np.asarray(p, float) + self.r

    def compose(self, other: Pose6DoF) -> Pose6DoF:
        rot = Rotation.from_quat(self.q) * Rotation.from_quat(other.q)
        return Pose6DoF(self.apply(other.r), rot.as_quat())

    def to_json(self) -> dict:
        return {"r": self.r.tolist(), "q": self.q.tolist()}

    @classmethod
    def from_json(cls, d) -> Pose6DoF:
        return cls(d["r"], d.get("q", [0, 0, 0, 1]))

    @classmethod
    def from_euler(cls, r, degrees_xyz) -> Pose6DoF:
        return cls(r, Rotation.from_euler("xyz", degrees_xyz, degrees=True).as_quat())


@dataclass
class Socket:
    id: str
    mate: str
    pose: Pose6DoF  # in the brick frame


@dataclass
class ObjectModel:
    """A cuboid brick centred on its frame origin."""

    id: str
    dims: tuple
    sockets: list = field(default_factory=list)
    color: tuple = (0, 0, 255)  # BGR used by the simulator

    def __post_init__(self):
        self.dims = tuple(float(v) for v in self.dims)
        if len(self.dims) != 3 or min(self.dims) <= 0:
            raise ValueError("box dims must be three positive lengths")
        for s in self.sockets:
            R = s.pose.R
            if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6:
                raise ValueError(f"socket {s.id} frame is not orthonormal")

    @property
    def half(self) -> np.ndarray:
        return np.asarray(self.dims) / 2.0

    def corners(self, pose: Pose6DoF) -> np.ndarray:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
        return (signs * self.half) @ pose.R.T + pose.r

    def to_json(self) -> dict:
        return {"id": self.id, "dims": list(self.dims), "color": list(self.color),
                "sockets": [{"id": s.id, "mate": s.mate, **s.pose.to_json()} for s in self.sockets]}

    @classmethod
    def from_json(cls, d) -> ObjectModel:
        sockets = [Socket(s["id"], s["mate"], Pose6DoF(s["r"], s.get("q", [0, 0, 0, 1])))
                   for s in d.get("sockets", [])]
        return cls(d["id"], tuple(d["dims"]), sockets, tuple(d.get("color", (0, 0, 255))))


def brick(id, length=0.064, width=0.032, height=0.02, color=(0, 0, 255)) -> ObjectModel:
    """Brick with one top socket ("stud") and one bottom socket ("tube")."""
    up = Pose6DoF((0, 0, height / 2))
    down = Pose6DoF((0, 0, -height / 2))
    return ObjectModel(id, (length, width, height),
                       [Socket("stud", "tube", up), Socket("tube", "stud", down)], color)


# oriented-box intersection (separating axis theorem)

def _obb_numpy(c1, R1, h1, c2, R2, h2):
    t = c2 - c1
    axes = [R1[:, i] for i in range(3)] + [R2[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            ax = np.cross(R1[:, i], R2[:, j])
            if np.dot(ax, ax) > 1e-18:
                axes.append(ax)
    for ax in axes:
        r1 = np.sum(h1 * np.abs(R1.T @ ax))
        r2 = np.sum(h2 * np.abs(R2.T @ ax))
        if abs(np.dot(t, ax)) > r1 + r2:
            return False
    return True


@njit
def _obb_numba(c1, R1, h1, c2, R2, h2):
    t = c2 - c1
    ax = np.empty(3)
    for k in range(15):
        if k < 3:
            for d in range(3):
                ax[d] = R1[d, k]
        elif k < 6:
            for d in range(3):
                ax[d] = R2[d, k - 3]
        else:
            i = (k - 6) // 3
            j = (k - 6) % 3
            a = R1[:, i]
            b = R2[:, j]
            ax[0] = a[1] * b[2] - a[2] * b[1]
            ax[1] = a[2] * b[0] - a[0] * b[2]
            ax[2] = a[0] * b[1] - a[1] * b[0]
            if ax[0] * ax[0] + ax[1] * ax[1] + ax[2] * ax[2] <= 1e-18:
                continue
        r1 = 0.0
        r2 = 0.0
        for m in range(3):
            p1 = 0.0
            p2 = 0.0
            for d in range(3):
                p1 += R1[d, m] * ax[d]
                p2 += R2[d, m] * ax[d]
            r1 += h1[m] * abs(p1)
            r2 += h2[m] * abs(p2)
        dist = t[0] * ax[0] + t[1] * ax[1] + t[2] * ax[2]
        if abs(dist) > r1 + r2:
            return False
    return True


_obb = pick(_obb_numba, _obb_numpy)


def boxes_intersect(model_a: ObjectModel, pose_a: Pose6DoF, model_b: ObjectModel,
                    pose_b: Pose6DoF, shrink=1e-4) -> bool:
    """True when the solids overlap; faces in contact (within ``shrink``) do not count."""
    ha = np.maximum(model_a.half - shrink, 0.0)
    hb = np.maximum(model_b.half - shrink, 0.0)
    return bool(_obb(pose_a.r, np.ascontiguousarray(pose_a.R), ha,
                     pose_b.r, np.ascontiguousarray(pose_b.R), hb))


def socket_world(model: ObjectModel, pose: Pose6DoF, socket: Socket) -> Pose6DoF:
    return pose.compose(socket.pose)


def check_connection(pose_a: Pose6DoF, pose_b: Pose6DoF, model_a: ObjectModel,
                     model_b: ObjectModel, pos_tol=POS_TOL, ang_tol=ANGLE_TOL) -> bool:
    """Some mating socket pair coincides within the position and angle tolerances."""
    for sa in model_a.sockets:
        wa = socket_world(model_a, pose_a, sa)
        for sb in model_b.sockets:
            if not (sa.mate == sb.id and sb.mate == sa.id):
                continue
            wb = socket_world(model_b, pose_b, sb)
            if np.linalg.norm(wa.r - wb.r) > pos_tol:
                continue
            if quat_angle(wa.q, wb.q) <= ang_tol:
                return True
    return False
