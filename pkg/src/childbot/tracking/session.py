"""Tracking sessions, scripted scenes, frame files and connection-recall evaluation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from ..events import Event
from .camera import CameraModel, NoValidDepth, lift_to_3d, look_at, render_depth
from .detect import ColorModel, detect_color
from .geometry import ObjectModel, Pose6DoF, brick, check_connection
from .pf import N_PARTICLES, ParticleSet, PFParams, explained_by, input_vector, pf_step

BACKGROUND = (128, 128, 128)
HORIZONS = (5.0, 20.0)
SMOOTH_WINDOW = 10
RELEASE_FRAMES = 5


class EmptyEvaluation(ValueError):
    pass


def visible_point(models, poses, k, camera: CameraModel):
    """Lift of the centroid of object ``k``'s unoccluded pixels in a joint render."""
    z, ids = render_depth(models, poses, camera, with_ids=True)
    vs, us = np.nonzero(ids == k)
    if len(us) == 0:
        return None
    try:
        return lift_to_3d((us.mean(), vs.mean()), np.where(ids == k, z, 0.0), camera)
    except NoValidDepth:
        return None


class TrackingSession:
    """One particle filter per object, run sequentially on each frame pair.

    The detector's lifted centroid lies on the visible surface, so before it
    enters the input vector it is moved by the offset between the current
    estimate's origin and the same visible point predicted for the estimate.
    """

    def __init__(self, camera: CameraModel, models, init_poses, colors=None,
                 n_particles=N_PARTICLES, seed=0, params=PFParams(), sender="tracker",
                 window=SMOOTH_WINDOW, release=RELEASE_FRAMES):
        self.camera = camera
        self.models = list(models)
        self.colors = colors or {m.id: ColorModel.from_bgr(m.color) for m in self.models}
        self.params = params
        self.sender = sender
        self.particles = {m.id: ParticleSet.around(p, n_particles)
                          for m, p in zip(self.models, init_poses)}
        self.estimates = {m.id: Pose6DoF(p.r, p.q) for m, p in zip(self.models, init_poses)}
        self.rngs = {m.id: np.random.default_rng([seed, k]) for k, m in enumerate(self.models)}
        self.window = window
        self.release = release
        self.history = {m.id: [] for m in self.models}
        self.connected = {}  # pair -> consecutive frames without a mate
        self.events = []
        self.infos = {}
        self._seq = 0

    def _event(self, name, params, t):
        self._seq += 1
        ev = Event.make(name, params, sender=self.sender, seq=self._seq, ts=int(round(t * 1000)))
        self.events.append(ev)
        return ev

    def target(self, model: ObjectModel, det, depth):
        if det is None:
            return None
        try:
            P = lift_to_3d(det.p, depth, self.camera)
        except NoValidDepth:
            return None
        est = self.estimates[model.id]
        seen = visible_point(self.models, [self.estimates[m.id] for m in self.models],
                             self.models.index(model), self.camera)
        return P if seen is None else P + (est.r - seen)

    def step(self, bgr, depth, t=0.0) -> dict:
        previous = dict(self.estimates)
        for m in self.models:
            det = detect_color(bgr, self.colors[m.id])
            P = self.target(m, det, depth)
            ps = self.particles[m.id]
            u = np.zeros(3) if P is None else input_vector(P, ps.r, det.s)
            others = [(o, previous[o.id]) for o in self.models if o.id != m.id]
            hidden = explained_by(others, depth, self.camera, self.params.tau)
            ps, est, info = pf_step(ps, u, depth, self.camera, m, others, self.rngs[m.id],
                                    self.params, occluded=hidden)
            self.particles[m.id] = ps
            self.estimates[m.id] = est
            self.history[m.id] = (self.history[m.id] + [est])[-self.window:]
            self.infos[m.id] = info
            if info.degenerate:
                self._event("monitor.tracker.degenerate", {"object": m.id}, t)
            self._event("sense.object.pose", {"object": m.id, **est.to_json(),
                                              "detected": det is not None}, t)
        self._update_connections(t)
        return dict(self.estimates)

    def smoothed(self, oid) -> Pose6DoF:
        """Mean translation and sign-aligned mean quaternion over the recent window."""
        hist = self.history[oid] or [self.estimates[oid]]
        qs = np.array([p.q for p in hist])
        qs = qs * np.where(qs @ qs[-1] < 0, -1.0, 1.0)[:, None]
        return Pose6DoF(np.mean([p.r for p in hist], axis=0), qs.mean(axis=0))

    def _update_connections(self, t):
        """A pair connects when the smoothed poses mate; it is released after
        ``release`` consecutive frames without a mate."""
        for i in range(len(self.models)):
            for j in range(i + 1, len(self.models)):
                a, b = self.models[i], self.models[j]
                pair = (a.id, b.id)
                on = check_connection(self.smoothed(a.id), self.smoothed(b.id), a, b)
                if on:
                    if pair not in self.connected:
                        self._event("sense.assembly.connection", {"a": a.id, "b": b.id}, t)
                    self.connected[pair] = 0
                elif pair in self.connected:
                    self.connected[pair] += 1
                    if self.connected[pair] >= self.release:
                        del self.connected[pair]


# scripted scenes

@dataclass
class Frame:
    t: float
    poses: dict  # object id -> Pose6DoF
    occluders: list = field(default_factory=list)  # (ObjectModel, Pose6DoF)


@dataclass
class Scene:
    camera: CameraModel
    models: list
    frames: list
    connections: list = field(default_factory=list)  # {"t", "a", "b", "required"}

    def model(self, oid) -> ObjectModel:
        return next(m for m in self.models if m.id == oid)

    def render(self, i):
        """(bgr uint8, depth float metres) for frame ``i``."""
        fr = self.frames[i]
        models = [m for m in self.models if m.id in fr.poses] + [o for o, _ in fr.occluders]
        poses = [fr.poses[m.id] for m in self.models if m.id in fr.poses] + [p for _, p in fr.occluders]
        depth, ids = render_depth(models, poses, self.camera, with_ids=True)
        palette = np.array([m.color for m in models] + [BACKGROUND], dtype=np.uint8)
        bgr = palette[np.where(ids >= 0, ids, len(models))]
        return bgr, depth

    def to_json(self) -> dict:
        return {
            "camera": self.camera.to_json(),
            "objects": [m.to_json() for m in self.models],
            "frames": [{"t": f.t, "poses": {k: p.to_json() for k, p in f.poses.items()},
                        "occluders": [{"model": o.to_json(), **p.to_json()} for o, p in f.occluders]}
                       for f in self.frames],
            "connections": list(self.connections),
        }

    @classmethod
    def from_json(cls, d) -> Scene:
        frames = [Frame(float(f["t"]), {k: Pose6DoF.from_json(p) for k, p in f["poses"].items()},
                        [(ObjectModel.from_json(o["model"]), Pose6DoF.from_json(o))
                         for o in f.get("occluders", [])])
                  for f in d["frames"]]
        return cls(CameraModel.from_json(d["camera"]),
                   [ObjectModel.from_json(m) for m in d["objects"]], frames,
                   list(d.get("connections", [])))


def load_scene(path) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return Scene.from_json(json.load(fh))


def save_scene(scene: Scene, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene.to_json(), fh, indent=1)


def desk_camera(width=640, height=480, f=600.0) -> CameraModel:
    return CameraModel(f, f, width / 2 - 0.5, height / 2 - 0.5, width, height,
                       look_at((0.0, -0.5, 0.6), (0.0, 0.0, 0.0)))


def occlusion_scene(n_before=20, n_occluded=30, n_after=50, fps=10.0, shift=(0.0, 0.0, 0.0)) -> Scene:
    """A brick that a hand-sized box hides completely for a while.

    While hidden the brick slides by ``shift`` at constant speed.
    """
    target = brick("brick", color=(0, 0, 255))
    pose = Pose6DoF.from_euler((0.0, 0.0, 0.01), (10, -5, 30))
    cam = desk_camera()
    hand = ObjectModel("hand", (0.12, 0.12, 0.02), color=(140, 180, 225))
    # between camera and brick, 15 cm in front of it
    towards = cam.pose.r - pose.r
    hand_pose = Pose6DoF(pose.r + 0.15 * towards / np.linalg.norm(towards), cam.pose.q)
    frames = []
    for i in range(n_before + n_occluded + n_after):
        hidden = n_before <= i < n_before + n_occluded
        occ = [(hand, hand_pose)] if hidden else []
        frac = min(max(i - n_before + 1, 0), n_occluded) / n_occluded
        moved = Pose6DoF(pose.r + frac * np.asarray(shift, float), pose.q)
        frames.append(Frame(i / fps, {"brick": moved}, occ))
    return Scene(cam, [target], frames)


def assembly_scene(fps=10.0) -> Scene:
    """Brick b is carried onto brick a, stays connected, then is pulled off."""
    a = brick("a", color=(0, 0, 255))
    b = brick("b", color=(255, 0, 0))
    pa = Pose6DoF((0.0, 0.0, 0.01))
    stacked = np.array([0.0, 0.0, 0.03])
    frames = []
    n = 60
    for i in range(n):
        if i < 20:
            s = i / 20
            rb = np.array([0.10, 0.04, 0.06]) * (1 - s) + stacked * s
        elif i < 40:
            rb = stacked
        else:
            rb = stacked + np.array([0.0, 0.0, 0.004 * (i - 39)])
        frames.append(Frame(i / fps, {"a": pa, "b": Pose6DoF(rb)}))
    return Scene(desk_camera(), [a, b], frames,
                 [{"t": 20 / fps, "a": "a", "b": "b", "required": True}])


# frame files: NNNN_color.png (8-bit BGR) and NNNN_depth.png (16-bit millimetres)

def write_frames(scene: Scene, directory):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i in range(len(scene.frames)):
        bgr, depth = scene.render(i)
        cv2.imwrite(str(d / f"{i:04d}_color.png"), bgr)
        cv2.imwrite(str(d / f"{i:04d}_depth.png"), np.round(depth * 1000).astype(np.uint16))


def read_frame(directory, i):
    d = Path(directory)
    bgr = cv2.imread(str(d / f"{i:04d}_color.png"), cv2.IMREAD_COLOR)
    raw = cv2.imread(str(d / f"{i:04d}_depth.png"), cv2.IMREAD_UNCHANGED)
    if bgr is None or raw is None:
        raise FileNotFoundError(f"frame {i} missing in {d}")
    return bgr, raw.astype(float) / 1000.0


# connection recall

def _pair(a, b):
    return tuple(sorted((str(a), str(b))))


def eval_identification(detections, truths, horizons=HORIZONS) -> dict:
    """Recall of true connections detected within [t, t + h].

    ``detections`` and ``truths`` are dicts with t, a, b (truths also carry
    ``required``).  Matching is one-to-one per object pair, in chronological
    order, each truth taking the earliest unused detection in its window.
    Returns {h: {"total": r, "required": r or None}}.
    """
    truths = sorted(truths, key=lambda x: float(x["t"]))
    if not truths:
        raise EmptyEvaluation("no ground-truth connections")
    out = {}
    for h in horizons:
        used = set()
        hits = []
        for tr in truths:
            t0, key = float(tr["t"]), _pair(tr["a"], tr["b"])
            match = None
            for j, dt in sorted(enumerate(detections), key=lambda x: float(x[1]["t"])):
                if j in used or _pair(dt["a"], dt["b"]) != key:
                    continue
                if t0 <= float(dt["t"]) <= t0 + h:
                    match = j
                    break
            if match is not None:
                used.add(match)
            hits.append((bool(tr.get("required", True)), match is not None))
        req = [ok for r, ok in hits if r]
        out[h] = {"total": sum(ok for _, ok in hits) / len(hits),
                  "required": (sum(req) / len(req)) if req else None}
    return out


def connection_records(events) -> list:
    return [{"t": ev.ts / 1000.0, "a": ev.params["a"], "b": ev.params["b"]}
            for ev in events if ev.name == "sense.assembly.connection"]


def run_scene(scene: Scene, frames_dir=None, seed=0, n_particles=N_PARTICLES) -> dict:
    """Track a scene from its first true poses; returns per-frame errors and events."""
    first = scene.frames[0].poses
    session = TrackingSession(scene.camera, scene.models, [first[m.id] for m in scene.models],
                              n_particles=n_particles, seed=seed)
    errors = {m.id: [] for m in scene.models}
    for i, fr in enumerate(scene.frames):
        bgr, depth = read_frame(frames_dir, i) if frames_dir else scene.render(i)
        est = session.step(bgr, depth, fr.t)
        for m in scene.models:
            if m.id in fr.poses:
                errors[m.id].append(float(np.linalg.norm(est[m.id].r - fr.poses[m.id].r)))
    return {"errors": errors, "events": session.events,
            "connections": connection_records(session.events)}
