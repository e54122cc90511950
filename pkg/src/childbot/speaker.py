"""Audio-visual active speaker selection and localization metrics."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .events.model import Event

GATE_RADIUS = 1.0
FINE_RADIUS = 0.5


class EmptyEvaluation(ValueError):
    pass


@dataclass
class PersonTrack:
    person: str | int
    times: np.ndarray
    positions: np.ndarray  # (T, 3)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.positions = np.asarray(self.positions, float).reshape(-1, 3)
        if len(self.times) != len(self.positions):
            raise ValueError("one position per timestamp")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must increase")

    def at(self, t) -> np.ndarray:
        """Position at the latest sample not after ``t`` (first sample before that)."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.positions[max(k, 0)]


@dataclass
class SpeakerEstimate:
    t: float
    audio: tuple
    person: str | int | None
    distance: float

    def to_json(self) -> dict:
        return {"t": self.t, "xyz": list(map(float, self.audio)), "person": self.person,
                "distance": None if math.isinf(self.distance) else self.distance}


def _id_key(pid):
    # numeric ids compare numerically, others lexically; numbers sort first
    return (0, pid, "") if isinstance(pid, (int, float)) else (1, 0, str(pid))


def select_active_speaker(audio_point, persons: dict, t=0.0, gate=GATE_RADIUS) -> SpeakerEstimate:
    """Nearest person to ``audio_point``; ``persons`` maps id -> xyz."""
    a = np.asarray(audio_point, float)
    best, best_d = None, math.inf
    for pid in sorted(persons, key=_id_key):
        dist = float(np.linalg.norm(np.asarray(persons[pid], float) - a))
        if dist < best_d:
            best, best_d = pid, dist
    chosen = best if best_d <= gate else None
    return SpeakerEstimate(t, tuple(a.tolist()), chosen, best_d)


@dataclass
class LocalizationReport:
    n: int
    pcor: float
    rmse: float
    rmsef: float | None
    speaker_pcor: float | None = None

    def to_dict(self) -> dict:
        return {"n": self.n, "Pcor": self.pcor, "RMSE": self.rmse, "RMSEf": self.rmsef,
                "speaker_Pcor": self.speaker_pcor}


def eval_localization(estimates, truths, est_ids=None, true_ids=None,
                      fine=FINE_RADIUS) -> LocalizationReport:
    """Pcor (error < fine), RMSE over all, RMSEf over the fine subset."""
    est = np.asarray(estimates, float).reshape(-1, 3) if len(estimates) else np.zeros((0, 3))
    tru = np.asarray(truths, float).reshape(-1, 3) if len(truths) else np.zeros((0, 3))
    if len(est) == 0:
        raise EmptyEvaluation("no estimates")
    if est.shape != tru.shape:
        raise ValueError("estimates and truths must be aligned")
    return metrics_from_errors(np.linalg.norm(est - tru, axis=1), est_ids, true_ids, fine)


def metrics_from_errors(errors, est_ids=None, true_ids=None, fine=FINE_RADIUS):
    e = np.asarray(errors, float)
    if e.size == 0:
        raise EmptyEvaluation("no estimates")
    ok = e < fine
    rmsef = float(np.sqrt(np.mean(e[ok] ** 2))) if ok.any() else None
    spk = None
    if est_ids is not None:
        if len(est_ids) != len(true_ids) or not len(est_ids):
            raise EmptyEvaluation("speaker ids missing")
        spk = sum(a == b for a, b in zip(est_ids, true_ids)) / len(est_ids)
    return LocalizationReport(len(e), float(ok.mean()), float(np.sqrt(np.mean(e ** 2))), rmsef, spk)


def speaker_event(est: SpeakerEstimate, sender="speaker", seq=0) -> Event:
    return Event.make("sense.speaker", {"person": est.person, "xyz": list(map(float, est.audio))},
                      sender=sender, seq=seq, ts=int(round(est.t * 1000)))


def read_jsonl(path) -> list[dict]:
    """Records of the form {t, xyz, person}."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                if "t" not in rec or "xyz" not in rec:
                    raise ValueError(f"record needs t and xyz: {line.strip()}")
                out.append(rec)
    return out


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def evaluate_files(est_path, truth_path) -> LocalizationReport:
    est = read_jsonl(est_path)
    tru = {r["t"]: r for r in read_jsonl(truth_path)}
    pairs = [(e, tru[e["t"]]) for e in est if e["t"] in tru]
    if not pairs:
        raise EmptyEvaluation("no aligned records")
    ids = all("person" in e and "person" in g for e, g in pairs)
    return eval_localization([e["xyz"] for e, _ in pairs], [g["xyz"] for _, g in pairs],
                             [e["person"] for e, _ in pairs] if ids else None,
                             [g["person"] for _, g in pairs] if ids else None)


def synthetic_av_scene(rng, geometry, grid, min_sep=1.0, n_persons=2):
    """Random person heads 0.5 m inside the walls, pairwise >= ``min_sep`` apart."""
    lo = np.asarray(geometry.room[0]) + 0.5
    hi = np.asarray(geometry.room[1]) - 0.5
    lo[2], hi[2] = max(lo[2], 0.5), min(hi[2], 1.5)
    while True:
        pts = [grid.snap(rng.uniform(lo, hi)) for _ in range(n_persons)]
        if all(np.linalg.norm(pts[i] - pts[j]) >= min_sep
               for i in range(n_persons) for j in range(i + 1, n_persons)):
            return {k: p for k, p in enumerate(pts)}


def run_av_trials(n_frames, seed=0, snr_db=20.0, frame_len=4096, geometry=None, grid=None,
                  rate=16000.0):
    """Simulated frames: one of two persons talks; returns (estimates, true ids, truths)."""
    from .audio import GridSpec, SourceSpec, SrpLocalizer, default_geometry, simulate_propagation
    geometry = geometry or default_geometry()
    grid = grid or GridSpec.from_room(geometry, 0.1)
    loc = SrpLocalizer(geometry, grid)
    rng = np.random.default_rng(seed)
    estimates, true_ids, truths = [], [], []
    for k in range(n_frames):
        persons = synthetic_av_scene(rng, geometry, grid)
        talker = int(rng.integers(len(persons)))
        sig = rng.standard_normal(frame_len)
        frames = simulate_propagation([SourceSpec(persons[talker], sig)], geometry, snr_db,
                                      seed=int(rng.integers(2**31)), rate=rate)
        point = loc(frames).argmax
        estimates.append(select_active_speaker(point, persons, t=k * frame_len / rate))
        true_ids.append(talker)
        truths.append(persons[talker])
    return estimates, true_ids, np.asarray(truths)
