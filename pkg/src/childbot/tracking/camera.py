"""Pinhole camera, z-buffered box renderer and pixel lifting."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..accel import njit, pick
from .geometry import ObjectModel, Pose6DoF

LIFT_RADIUS = 5


class NoValidDepth(ValueError):
    pass


@dataclass
class CameraModel:
    """Intrinsics plus camera-to-world pose; camera frame is x right, y down, z forward."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: Pose6DoF = field(default_factory=lambda: Pose6DoF((0, 0, 0)))

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        self._rays = None

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0, self.cx], [0, self.fy, self.cy], [0, 0, 1.0]])

    def rays(self) -> np.ndarray:
        """(H*W, 3) camera-frame directions with unit z, row-major over pixels."""
        if self._rays is None:
            v, u = np.mgrid[0:self.height, 0:self.width]
            self._rays = np.stack([(u.ravel() - self.cx) / self.fx,
                                   (v.ravel() - self.cy) / self.fy,
                                   np.ones(u.size)], axis=1)
        return self._rays

    def to_camera(self, pts) -> np.ndarray:
        R = self.pose.R
        return (np.asarray(pts, float) - self.pose.r) @ R

    def project(self, pts) -> np.ndarray:
        pc = self.to_camera(pts)
        z = pc[..., 2:3]
        return np.concatenate([self.fx * pc[..., :1] / z + self.cx,
                               self.fy * pc[..., 1:2] / z + self.cy], axis=-1)

    def box_in_camera(self, model: ObjectModel, pose: Pose6DoF):
        R = self.pose.R.T @ pose.R
        c = self.to_camera(pose.r)
        return np.ascontiguousarray(R), np.ascontiguousarray(c)

    def to_json(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height, "pose": self.pose.to_json()}

    @classmethod
    def from_json(cls, d) -> CameraModel:
        return cls(d["fx"], d["fy"], d["cx"], d["cy"], int(d["width"]), int(d["height"]),
                   Pose6DoF.from_json(d.get("pose", {"r": [0, 0, 0]})))


def look_at(eye, target, up=(0, 0, 1)) -> Pose6DoF:
    """Camera-to-world pose looking from ``eye`` towards ``target``."""
    from scipy.spatial.transform import Rotation

    eye, target, up = (np.asarray(v, float) for v in (eye, target, up))
    z = target - eye
    z /= np.linalg.norm(z)
    x = np.cross(z, up)
    if np.linalg.norm(x) < 1e-9:
        x = np.cross(z, (0, 1, 0))
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=1)
    return Pose6DoF(eye, Rotation.from_matrix(R).as_quat())


# ray-box slab test; rays live in the camera frame and start at its origin

@njit
def _hit_numba(rays, R, c, h):
    """Depth (z) of the first hit per ray against one box, 0 where missed."""
    n = rays.shape[0]
    out = np.zeros(n)
    # camera origin in box coordinates
    o0 = -(R[0, 0] * c[0] + R[1, 0] * c[1] + R[2, 0] * c[2])
    o1 = -(R[0, 1] * c[0] + R[1, 1] * c[1] + R[2, 1] * c[2])
    o2 = -(R[0, 2] * c[0] + R[1, 2] * c[1] + R[2, 2] * c[2])
    o = (o0, o1, o2)
    for i in range(n):
        tn = -1e30
        tf = 1e30
        ok = True
        for a in range(3):
            d = R[0, a] * rays[i, 0] + R[1, a] * rays[i, 1] + R[2, a] * rays[i, 2]
            oa = o[a]
            if abs(d) < 1e-15:
                if oa < -h[a] or oa > h[a]:
                    ok = False
                    break
                continue
            t1 = (-h[a] - oa) / d
            t2 = (h[a] - oa) / d
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tn:
                tn = t1
            if t2 < tf:
                tf = t2
        if ok and tn <= tf and tn > 0:
            out[i] = tn
    return out


def _hit_numpy(rays, R, c, h):
    o = -(R.T @ c)
    d = rays @ R  # (n, 3) direction in box frame
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-h - o) / d
        t2 = (h - o) / d
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    par = np.abs(d) < 1e-15
    inside = (o >= -h) & (o <= h)
    lo = np.where(par, np.where(inside, -1e30, 1e30), lo)
    hi = np.where(par, np.where(inside, 1e30, -1e30), hi)
    tn = lo.max(axis=1)
    tf = hi.min(axis=1)
    hit = (tn <= tf) & (tn > 0)
    return np.where(hit, tn, 0.0)


box_hits = pick(_hit_numba, _hit_numpy)


def render_depth(models, poses, camera: CameraModel, with_ids=False):
    """Nearest-surface z-depth (H, W) with 0 where nothing is hit.

    ``with_ids`` also returns an (H, W) int array of model indices (-1 = none).
    """
    rays = camera.rays()
    depth = np.zeros(len(rays))
    ids = np.full(len(rays), -1, dtype=np.int64)
    for k, (m, p) in enumerate(zip(models, poses)):
        R, c = camera.box_in_camera(m, p)
        z = box_hits(rays, R, c, m.half)
        closer = (z > 0) & ((depth == 0) | (z < depth))
        depth[closer] = z[closer]
        ids[closer] = k
    shape = (camera.height, camera.width)
    if with_ids:
        return depth.reshape(shape), ids.reshape(shape)
    return depth.reshape(shape)


def lift_to_3d(p, depth, camera: CameraModel, radius=LIFT_RADIUS) -> np.ndarray:
    """World point behind pixel ``p`` = (u, v); holes use the nearest valid pixel."""
    depth = np.asarray(depth, float)
    u = int(round(float(p[0])))
    v = int(round(float(p[1])))
    h, w = depth.shape
    if not (0 <= u < w and 0 <= v < h):
        raise ValueError(f"pixel {p} outside the image")
    uu, vv = float(p[0]), float(p[1])
    z = depth[v, u]
    if not z > 0:
        v0, v1 = max(0, v - radius), min(h, v + radius + 1)
        u0, u1 = max(0, u - radius), min(w, u + radius + 1)
        win = depth[v0:v1, u0:u1]
        gv, gu = np.mgrid[v0:v1, u0:u1]
        d2 = (gu - u) ** 2 + (gv - v) ** 2
        ok = (win > 0) & (d2 <= radius * radius)
        if not ok.any():
            raise NoValidDepth(f"no valid depth within {radius} px of {p}")
        d2 = np.where(ok, d2, np.iinfo(np.int64).max)
        j = np.unravel_index(np.argmin(d2), d2.shape)
        vv, uu = float(gv[j]), float(gu[j])
        z = win[j]
    pc = z * np.array([(uu - camera.cx) / camera.fx, (vv - camera.cy) / camera.fy, 1.0])
    return camera.pose.apply(pc)
