"""Depth-based 6-DoF particle filter with a detection-driven input vector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from ..accel import njit, pick
from .camera import CameraModel, _hit_numba, _hit_numpy, box_hits, render_depth
from .geometry import ObjectModel, Pose6DoF, _obb, quat_normalize

N_PARTICLES = 200
SIGMA_T = 0.005
SIGMA_R = np.deg2rad(2.0)
SIGMA_D = 0.010
TAU = 0.030
COLLISION_FACTOR = 0.01


class DegenerateWeights(RuntimeError):
    pass


@dataclass
class PFParams:
    sigma_t: float = SIGMA_T
    sigma_r: float = SIGMA_R
    sigma_d: float = SIGMA_D
    tau: float = TAU
    collision: float = COLLISION_FACTOR


@dataclass
class ParticleSet:
    r: np.ndarray  # (P, 3)
    q: np.ndarray  # (P, 4) scalar-last
    w: np.ndarray  # (P,)

    def __post_init__(self):
        self.r = np.asarray(self.r, float).reshape(-1, 3)
        self.q = quat_normalize(np.asarray(self.q, float).reshape(-1, 4))
        self.w = np.asarray(self.w, float).reshape(-1)
        if not (len(self.r) == len(self.q) == len(self.w)):
            raise ValueError("particle arrays differ in length")
        if np.any(self.w < 0) or not np.isclose(self.w.sum(), 1.0, atol=1e-9):
            raise ValueError("weights must be non-negative and sum to 1")

    def __len__(self):
        return len(self.w)

    @classmethod
    def around(cls, pose: Pose6DoF, n=N_PARTICLES) -> ParticleSet:
        return cls(np.tile(pose.r, (n, 1)), np.tile(pose.q, (n, 1)), np.full(n, 1.0 / n))

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.w ** 2))

    def estimate(self) -> Pose6DoF:
        return Pose6DoF(self.w @ self.r, self.q[int(np.argmax(self.w))])

    def covariance(self) -> np.ndarray:
        d = self.r - self.w @ self.r
        return (self.w[:, None] * d).T @ d


def input_vector(P, r, s) -> np.ndarray:
    """u = (P - r) * s for one or many particle positions."""
    return (np.asarray(P, float) - np.asarray(r, float)) * float(s)


# likelihood

def _scores_numpy(rays, obs, Rs, cs, h, tau2):
    out = np.empty(len(Rs))
    valid = obs > 0
    for j in range(len(Rs)):
        z = _hit_numpy(rays, Rs[j], cs[j], h)
        m = (z > 0) & valid
        e2 = (z[m] - obs[m]) ** 2
        out[j] = np.sum(tau2 - np.minimum(e2, tau2))
    return out


@njit
def _scores_numba(rays, obs, Rs, cs, h, tau2):
    out = np.empty(Rs.shape[0])
    for j in range(Rs.shape[0]):
        z = _hit_numba(rays, Rs[j], cs[j], h)
        acc = 0.0
        for i in range(z.shape[0]):
            if z[i] > 0 and obs[i] > 0:
                e = z[i] - obs[i]
                e2 = e * e
                if e2 < tau2:
                    acc += tau2 - e2
        out[j] = acc
    return out


_scores = pick(_scores_numba, _scores_numpy)


def _roi(camera: CameraModel, model: ObjectModel, r, q):
    """Pixel indices covering every particle's projected box."""
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    R = Rotation.from_quat(q).as_matrix()
    corners = np.einsum("pij,cj->pci", R, signs * model.half) + r[:, None, :]
    pc = camera.to_camera(corners.reshape(-1, 3))
    front = pc[:, 2] > 1e-6
    if not front.any():
        return np.zeros(0, dtype=np.int64)
    uv = np.stack([camera.fx * pc[front, 0] / pc[front, 2] + camera.cx,
                   camera.fy * pc[front, 1] / pc[front, 2] + camera.cy], axis=1)
    u0 = int(np.clip(np.floor(uv[:, 0].min()) - 1, 0, camera.width))
    u1 = int(np.clip(np.ceil(uv[:, 0].max()) + 2, 0, camera.width))
    v0 = int(np.clip(np.floor(uv[:, 1].min()) - 1, 0, camera.height))
    v1 = int(np.clip(np.ceil(uv[:, 1].max()) + 2, 0, camera.height))
    if u1 <= u0 or v1 <= v0:
        return np.zeros(0, dtype=np.int64)
    vv, uu = np.mgrid[v0:v1, u0:u1]
    return (vv * camera.width + uu).ravel()


def log_likelihood(r, q, depth, camera: CameraModel, model: ObjectModel, params=PFParams()):
    """Per-particle log weight: -sum over the pooled silhouette pixels of rho(e) / sigma_d^2.

    The pixel set is the union of all particles' silhouettes; a pixel outside a
    particle's own silhouette, or without valid depth, costs tau^2.  Terms that
    are equal for every particle are dropped, so the result is defined up to a
    common constant.
    """
    r = np.asarray(r, float).reshape(-1, 3)
    q = np.asarray(q, float).reshape(-1, 4)
    idx = _roi(camera, model, r, q)
    if len(idx) == 0:
        return np.zeros(len(r))
    rays = np.ascontiguousarray(camera.rays()[idx])
    obs = np.ascontiguousarray(np.asarray(depth, float).ravel()[idx])
    Rc = np.ascontiguousarray(np.einsum("ji,pjk->pik", camera.pose.R, Rotation.from_quat(q).as_matrix()))
    cc = np.ascontiguousarray(camera.to_camera(r))
    tau2 = params.tau ** 2
    return _scores(rays, obs, Rc, cc, model.half, tau2) / params.sigma_d ** 2


def pixel_residuals(pose: Pose6DoF, depth, camera: CameraModel, model: ObjectModel):
    """Rendered minus observed depth on the pose's silhouette (observed-valid pixels)."""
    R, c = camera.box_in_camera(model, pose)
    z = box_hits(camera.rays(), R, c, model.half)
    obs = np.asarray(depth, float).ravel()
    m = (z > 0) & (obs > 0)
    return z[m] - obs[m]


def collision_mask(r, q, model: ObjectModel, others, shrink=1e-4) -> np.ndarray:
    """True where a particle's box overlaps any (model, pose) in ``others``."""
    hits = np.zeros(len(r), dtype=bool)
    if not others:
        return hits
    Rs = Rotation.from_quat(q).as_matrix()
    ha = np.maximum(model.half - shrink, 0.0)
    for om, op in others:
        hb = np.maximum(om.half - shrink, 0.0)
        Rb = np.ascontiguousarray(op.R)
        for j in range(len(r)):
            if not hits[j] and _obb(r[j], np.ascontiguousarray(Rs[j]), ha, op.r, Rb, hb):
                hits[j] = True
    return hits


def systematic_resample(w, rng) -> np.ndarray:
    n = len(w)
    pos = (rng.random() + np.arange(n)) / n
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return np.searchsorted(cum, pos, side="right").clip(0, n - 1)


@dataclass
class StepInfo:
    ess: float
    resampled: bool
    degenerate: bool
    collisions: int
    weights: np.ndarray  # normalised, before resampling


def _normalize(logw, factor):
    """exp(logw) * factor scaled to sum 1; None when no weight survives."""
    finite = np.isfinite(logw)
    if not finite.any():
        return None
    top = logw[finite].max()
    w = np.where(finite, np.exp(np.where(finite, logw, top) - top), 0.0) * factor
    total = w.sum()
    if not total > 0:
        # the best particles all collide and the rest underflowed: retry in log space
        with np.errstate(divide="ignore"):
            lw = np.where(finite, logw, -np.inf) + np.log(factor)
        if not np.isfinite(lw).any():
            return None
        w = np.exp(lw - lw[np.isfinite(lw)].max())
        total = w.sum()
    return w / total


def explained_by(others, depth, camera: CameraModel, tau=TAU) -> np.ndarray:
    """Pixels whose observed depth is within ``tau`` of another object's rendering."""
    depth = np.asarray(depth, float)
    if not others:
        return np.zeros(depth.shape, dtype=bool)
    z = render_depth([m for m, _ in others], [p for _, p in others], camera)
    return (z > 0) & (depth > 0) & (np.abs(depth - z) < tau)


def pf_step(ps: ParticleSet, u, depth, camera: CameraModel, model: ObjectModel, others=(),
            rng=None, params=PFParams(), occluded=None):
    """Predict, weight, estimate, resample.  Returns (particles, estimate, info).

    ``u`` is (3,) or (P, 3), zero when the detector lost the object.  ``others``
    holds (model, pose) pairs of the other objects' current estimates.
    ``occluded`` marks pixels treated as hidden (no depth evidence) for this
    object, typically ``explained_by(others, ...)``.
    """
    rng = np.random.default_rng(rng)
    n = len(ps)
    u = np.broadcast_to(np.asarray(u, float), (n, 3))
    if not np.all(np.isfinite(u)):
        raise ValueError("input vector must be finite")
    r = ps.r + u + rng.normal(0.0, params.sigma_t, size=(n, 3))
    dq = Rotation.from_rotvec(rng.normal(0.0, params.sigma_r, size=(n, 3)))
    q = quat_normalize((Rotation.from_quat(ps.q) * dq).as_quat())

    if occluded is not None:
        depth = np.where(occluded, 0.0, depth)
    logw = np.log(np.maximum(ps.w, 1e-300)) + log_likelihood(r, q, depth, camera, model, params)
    hit = collision_mask(r, q, model, others)
    factor = np.where(hit, params.collision, 1.0)
    w = _normalize(logw, factor)
    degenerate = w is None
    if degenerate:
        w = np.full(n, 1.0 / n)
    out = ParticleSet(r, q, w)
    est = out.estimate()
    ess = out.ess
    resampled = ess < n / 2
    if resampled:
        idx = systematic_resample(w, rng)
        out = ParticleSet(r[idx], q[idx], np.full(n, 1.0 / n))
    return out, est, StepInfo(ess, resampled, degenerate, int(hit.sum()), w)
