"""Microphone array layouts and localization grids."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_SOUND = 343.0


class GeometryError(ValueError):
    pass


@dataclass
class LinearArray:
    """Uniform linear array; ``mics`` has shape (N, 3)."""

    mics: np.ndarray

    def __post_init__(self):
        self.mics = np.asarray(self.mics, dtype=float)
        if self.mics.ndim != 2 or self.mics.shape[1] != 3 or len(self.mics) < 2:
            raise GeometryError("mics must be an (N, 3) array with N >= 2")
        if not np.all(np.isfinite(self.mics)):
            raise GeometryError("mic positions must be finite")
        steps = np.diff(self.mics, axis=0)
        if np.linalg.norm(steps[0]) <= 0:
            raise GeometryError("coincident microphones")
        if np.max(np.abs(steps - steps[0])) > 1e-9:
            raise GeometryError("microphones are not collinear and equispaced")

    @classmethod
    def from_axis(cls, center, axis, d, n=4):
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        offsets = (np.arange(n) - (n - 1) / 2.0) * d
        return cls(np.asarray(center, dtype=float)[None, :] + offsets[:, None] * axis[None, :])

    @property
    def n(self) -> int:
        return len(self.mics)

    @property
    def d(self) -> float:
        return float(np.linalg.norm(self.mics[1] - self.mics[0]))

    @property
    def axis(self) -> np.ndarray:
        v = self.mics[1] - self.mics[0]
        return v / np.linalg.norm(v)

    @property
    def center(self) -> np.ndarray:
        return self.mics.mean(axis=0)

    def pairs(self):
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]


@dataclass
class ArrayGeometry:
    arrays: list[LinearArray]
    c: float = SPEED_OF_SOUND
    room: tuple = ((0.0, 0.0, 0.0), (4.0, 4.0, 2.0))

    def __post_init__(self):
        if not self.arrays:
            raise GeometryError("at least one array is required")
        if self.c <= 0:
            raise GeometryError("speed of sound must be positive")
        lo, hi = np.asarray(self.room[0], float), np.asarray(self.room[1], float)
        if np.any(hi <= lo):
            raise GeometryError("room bounds are empty")
        self.room = (tuple(lo), tuple(hi))

    def contains(self, point) -> bool:
        p = np.asarray(point, float)
        lo, hi = np.asarray(self.room[0]), np.asarray(self.room[1])
        return bool(np.all(p >= lo) and np.all(p <= hi))

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "room": [list(self.room[0]), list(self.room[1])],
            "arrays": [{"mics": a.mics.tolist()} for a in self.arrays],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ArrayGeometry:
        arrays = []
        for spec in data["arrays"]:
            if "mics" in spec:
                arrays.append(LinearArray(spec["mics"]))
            else:
                arrays.append(LinearArray.from_axis(spec["center"], spec["axis"], spec["d"],
                                                    spec.get("n", 4)))
        room = data.get("room", [[0, 0, 0], [4, 4, 2]])
        return cls(arrays, float(data.get("c", SPEED_OF_SOUND)), (tuple(room[0]), tuple(room[1])))


def default_geometry(d=0.08, c=SPEED_OF_SOUND) -> ArrayGeometry:
    """Four 4-mic arrays around a 4x4x2 m room.

    Heights differ and one array is vertical so that no plane acts as a
    mirror for every array at once.
    """
    return ArrayGeometry([
        LinearArray.from_axis((2.0, 0.05, 1.0), (1, 0, 0), d),
        LinearArray.from_axis((3.95, 2.0, 1.6), (0, 1, 0), d),
        LinearArray.from_axis((2.0, 3.95, 0.6), (-1, 0, 0), d),
        LinearArray.from_axis((0.05, 0.05, 1.0), (0, 0, 1), d),
    ], c)


def load_geometry(path) -> ArrayGeometry:
    with open(path, encoding="utf-8") as fh:
        return ArrayGeometry.from_dict(json.load(fh))


def save_geometry(geometry: ArrayGeometry, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(geometry.to_dict(), fh, indent=2)


@dataclass
class GridSpec:
    """Axis-aligned box split into cubic cells; points are cell centres."""

    lo: tuple = (0.0, 0.0, 0.0)
    hi: tuple = (4.0, 4.0, 2.0)
    resolution: float = 0.1
    shape: tuple = field(init=False)

    def __post_init__(self):
        if self.resolution <= 0:
            raise GeometryError("resolution must be positive")
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        counts = np.floor((hi - lo) / self.resolution + 1e-9).astype(int)
        if np.any(counts < 1):
            raise GeometryError("grid is empty")
        self.lo, self.hi = tuple(lo), tuple(hi)
        self.shape = tuple(int(v) for v in counts)

    @classmethod
    def from_room(cls, geometry: ArrayGeometry, resolution=0.1):
        return cls(geometry.room[0], geometry.room[1], resolution)

    def axes(self):
        return [self.lo[k] + self.resolution * (np.arange(self.shape[k]) + 0.5) for k in range(3)]

    def points(self) -> np.ndarray:
        """(G, 3) cell centres in C order over (x, y, z)."""
        gx, gy, gz = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def __len__(self):
        return int(np.prod(self.shape))

    def snap(self, point) -> np.ndarray:
        """Centre of the cell containing ``point``."""
        p = np.asarray(point, float)
        idx = np.floor((p - np.asarray(self.lo)) / self.resolution)
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
        return np.asarray(self.lo) + self.resolution * (idx + 0.5)

    def key(self):
        return (self.lo, self.hi, self.resolution)
