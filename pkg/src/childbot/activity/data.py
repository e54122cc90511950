"""Multi-view descriptor corpora: container, binary file format and a synthetic generator.

File layout (little-endian)::

    {"channels": [...], "S": 4, "D": {"traj": 8, ...}, "labels": [...]}\\n
    for each video, for each sensor 0..S-1, for each channel in header order:
        uint32 M
        M * D float32 values (row-major)
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CHANNELS = ("traj", "hog", "hof", "mbhx", "mbhy")


@dataclass
class Video:
    label: str
    desc: dict  # channel -> list over sensors of (M, D) arrays
    vid: int = 0

    def sensor(self, channel, i) -> np.ndarray:
        return self.desc[channel][i]


@dataclass
class DescriptorSet:
    channels: tuple
    dims: dict
    sensors: int
    videos: list

    def __post_init__(self):
        self.channels = tuple(self.channels)
        for k, v in enumerate(self.videos):
            v.vid = k
            for c in self.channels:
                blocks = v.desc[c]
                if len(blocks) != self.sensors:
                    raise ValueError(f"video {k} channel {c}: {len(blocks)} sensors, expected {self.sensors}")
                for b in blocks:
                    if b.size and b.shape[1] != self.dims[c]:
                        raise ValueError(f"video {k} channel {c}: dim {b.shape[1]} != {self.dims[c]}")

    @property
    def labels(self) -> list:
        return [v.label for v in self.videos]

    @property
    def classes(self) -> list:
        return sorted(set(self.labels))

    def __len__(self):
        return len(self.videos)


def save_descriptors(ds: DescriptorSet, path):
    path = Path(path)
    if path.is_dir():
        path = path / "descriptors.bin"
    header = {"channels": list(ds.channels), "S": ds.sensors,
              "D": {c: ds.dims[c] for c in ds.channels}, "labels": ds.labels}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for v in ds.videos:
            for i in range(ds.sensors):
                for c in ds.channels:
                    block = np.asarray(v.desc[c][i], dtype="<f4").reshape(-1, ds.dims[c])
                    fh.write(struct.pack("<I", len(block)))
                    fh.write(block.tobytes())
    return path


def load_descriptors(path) -> DescriptorSet:
    path = Path(path)
    if path.is_dir():
        path = path / "descriptors.bin"
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        channels, s, dims = header["channels"], int(header["S"]), header["D"]
        videos = []
        for label in header["labels"]:
            desc = {c: [] for c in channels}
            for _ in range(s):
                for c in channels:
                    (m,) = struct.unpack("<I", fh.read(4))
                    n = m * dims[c]
                    raw = fh.read(4 * n)
                    if len(raw) != 4 * n:
                        raise ValueError("truncated descriptor file")
                    desc[c].append(np.frombuffer(raw, dtype="<f4").reshape(m, dims[c]).astype(float))
            videos.append(Video(label, desc))
        if fh.read(1):
            raise ValueError("trailing bytes after the last block")
    return DescriptorSet(channels, dims, s, videos)


def synthetic_corpus(seed=1, n_classes=3, videos_per_class=10, sensors=4,
                     channels=("traj", "hog"), dim=8, components=12, m_mean=50,
                     informativeness=(0.5, 0.4, 0.35, 0.3), concentration=20.0,
                     clutter_scale=2.5, occlusion=0.3, occluded_factor=0.2) -> DescriptorSet:
    """Class-dependent Gaussian mixtures observed through views of varying quality.

    Every channel has ``components`` shared Gaussian prototypes.  A class is a
    Dirichlet-drawn weight vector over them and each video jitters those
    weights.  View ``i`` emits a descriptor from the video's mixture with
    probability ``informativeness[i]`` and from a broad clutter Gaussian
    otherwise.  Independently per video and view, the view is occluded with
    probability ``occlusion``, which scales its informativeness by
    ``occluded_factor``.  No single view therefore sees every video well.
    """
    if len(informativeness) != sensors:
        raise ValueError("one informativeness value per sensor")
    rng = np.random.default_rng(seed)
    protos = {c: rng.normal(0.0, 3.0, size=(components, dim)) for c in channels}
    class_w = {c: rng.dirichlet(np.full(components, 0.7), size=n_classes) for c in channels}
    videos = []
    for k in range(n_classes):
        for _ in range(videos_per_class):
            desc = {c: [] for c in channels}
            quality = np.asarray(informativeness) * np.where(
                rng.random(sensors) < occlusion, occluded_factor, 1.0)
            for c in channels:
                w = rng.dirichlet(concentration * class_w[c][k] + 1e-3)
                for i in range(sensors):
                    m = int(rng.poisson(m_mean))
                    informative = rng.random(m) < quality[i]
                    comp = rng.choice(components, size=m, p=w)
                    x = protos[c][comp] + rng.normal(0.0, 1.0, size=(m, dim))
                    clutter = rng.normal(0.0, clutter_scale * 3.0, size=(m, dim))
                    x = np.where(informative[:, None], x, clutter)
                    desc[c].append(x)
            videos.append(Video(f"class{k}", desc))
    return DescriptorSet(channels, {c: dim for c in channels}, sensors, videos)
