"""Leave-one-video-out evaluation of single-view and fused activity models."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .classify import OneVsAllSVM, fuse_scores
from .data import DescriptorSet
from .encoding import (
    Codebook,
    chi2_kernel_matrix,
    chi2_normalizers,
    encode_bovw,
    encode_vlad,
    train_codebook,
)

DEFAULT_K = {"bovw": 64, "vlad": 16}
FUSIONS = ("single", "feature", "encoding", "score")


class InsufficientData(ValueError):
    pass


@dataclass
class LoocvConfig:
    encoding: str = "bovw"
    fusion: str = "single"
    view: int = 0
    channels: tuple | None = None
    k: int | None = None
    seed: int = 0
    C: float = 100.0

    def __post_init__(self):
        if self.encoding not in DEFAULT_K:
            raise ValueError(f"unknown encoding {self.encoding!r}")
        if self.fusion not in FUSIONS:
            raise ValueError(f"unknown fusion mode {self.fusion!r}")
        if self.k is None:
            self.k = DEFAULT_K[self.encoding]

    @property
    def name(self) -> str:
        return f"view{self.view}" if self.fusion == "single" else self.fusion


@dataclass
class LoocvResult:
    accuracy: float
    confusion: np.ndarray
    classes: list
    predictions: list
    folds: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "classes": self.classes,
                "confusion": self.confusion.tolist()}


@dataclass
class FoldArtifacts:
    held_out: int
    train_ids: tuple
    shared: dict  # channel -> Codebook
    per_sensor: dict  # channel -> Codebook
    normalizer_ids: dict = field(default_factory=dict)


def _check_data(ds: DescriptorSet):
    counts = Counter(ds.labels)
    if len(counts) < 2 or min(counts.values()) < 2:
        raise InsufficientData("need at least two classes with two or more videos each")


def _fold_books(ds, train_ids, channels, k, seed, need_shared, need_per_sensor):
    shared, per_sensor = {}, {}
    for c in channels:
        per = [[ds.videos[v].desc[c][i] for v in train_ids] for i in range(ds.sensors)]
        if need_shared:
            shared[c] = train_codebook(per, k, "shared", seed, train_ids)
        if need_per_sensor:
            per_sensor[c] = train_codebook(per, k, "per-sensor", seed, train_ids)
    return shared, per_sensor


def _bovw_stack(ds, art, channels, fusion, view):
    """(N, S', C, K) histograms for every video under one fold's books."""
    reps = []
    for v in ds.videos:
        per_channel = []
        for c in channels:
            sensors = v.desc[c]
            if fusion == "feature":
                per_channel.append(encode_bovw(sensors, art.shared[c], True).values[None, :])
            elif fusion == "encoding":
                vals = encode_bovw(sensors, art.per_sensor[c], False).values
                per_channel.append(vals)
            else:
                book = art.per_sensor[c].book(view)
                one = Codebook((book,), "shared")
                per_channel.append(encode_bovw(sensors[view], one, True).values[None, :])
        reps.append(np.stack(per_channel, axis=1))
    return np.stack(reps)


def _vlad_stack(ds, art, channels, fusion, view):
    rows = []
    for v in ds.videos:
        parts = []
        for c in channels:
            sensors = v.desc[c]
            if fusion == "feature":
                parts.append(encode_vlad(sensors, art.shared[c], True).values)
            elif fusion == "encoding":
                parts.append(encode_vlad(sensors, art.per_sensor[c], False).values)
            else:
                one = Codebook((art.per_sensor[c].book(view),), "shared")
                parts.append(encode_vlad(sensors[view], one, True).values)
        x = np.concatenate(parts)
        n = np.linalg.norm(x)
        rows.append(x / n if n > 0 else x)
    return np.stack(rows)


def _predict_mode(ds, art, cfg_encoding, C, channels, fusion, view, labels, test):
    """Probability vector for the held-out video under one model."""
    train = list(art.train_ids)
    if cfg_encoding == "bovw":
        reps = _bovw_stack(ds, art, channels, fusion, view)
        A = chi2_normalizers(reps[train])
        art.normalizer_ids[(fusion, view)] = tuple(train)
        gram = chi2_kernel_matrix(reps[train], reps[train], A)
        row = chi2_kernel_matrix(reps[[test]], reps[train], A)
    else:
        x = _vlad_stack(ds, art, channels, fusion, view)
        gram = x[train] @ x[train].T
        row = x[[test]] @ x[train].T
    model = OneVsAllSVM(C=C).fit(gram, labels[train])
    return model.predict_proba(row)[0], model.classes_


def run_loocv_modes(ds: DescriptorSet, encoding="bovw", modes=None, channels=None, k=None,
                    seed=0, C=100.0, keep_folds=False) -> dict:
    """Evaluate several models with shared per-fold codebooks.

    ``modes`` is a list of names: ``view<i>``, ``feature``, ``encoding``, ``score``.
    Returns name -> :class:`LoocvResult`.
    """
    _check_data(ds)
    k = k or DEFAULT_K[encoding]
    channels = tuple(channels or ds.channels)
    modes = list(modes or [f"view{i}" for i in range(ds.sensors)] + ["feature", "encoding", "score"])
    labels = np.asarray(ds.labels)
    classes = ds.classes
    index = {c: i for i, c in enumerate(classes)}
    preds = {m: [] for m in modes}
    folds = []
    need_shared = "feature" in modes
    for test in range(len(ds)):
        train_ids = tuple(v for v in range(len(ds)) if v != test)
        shared, per_sensor = _fold_books(ds, train_ids, channels, k, seed, need_shared, True)
        art = FoldArtifacts(test, train_ids, shared, per_sensor)
        for book in list(shared.values()) + list(per_sensor.values()):
            assert test not in book.trained_on, "held-out video leaked into a codebook"
        view_probs = {}
        for i in range(ds.sensors):
            if f"view{i}" in modes or "score" in modes:
                view_probs[i] = _predict_mode(ds, art, encoding, C, channels, "single", i, labels, test)
        for m in modes:
            if m.startswith("view"):
                p, cls = view_probs[int(m[4:])]
            elif m == "score":
                p, _ = fuse_scores([view_probs[i][0] for i in range(ds.sensors)])
                cls = view_probs[0][1]
            else:
                p, cls = _predict_mode(ds, art, encoding, C, channels, m, 0, labels, test)
            preds[m].append(cls[int(np.argmax(p))])
        for ids in art.normalizer_ids.values():
            assert test not in ids, "held-out video leaked into a normaliser"
        if keep_folds:
            folds.append(art)
    out = {}
    for m in modes:
        conf = np.zeros((len(classes), len(classes)), dtype=int)
        for truth, guess in zip(labels, preds[m]):
            conf[index[truth], index[guess]] += 1
        acc = float(np.trace(conf) / len(labels))
        out[m] = LoocvResult(acc, conf, classes, preds[m], folds)
    return out


def run_loocv(ds: DescriptorSet, config: LoocvConfig, keep_folds=False) -> LoocvResult:
    modes = [config.name]
    return run_loocv_modes(ds, config.encoding, modes, config.channels, config.k, config.seed,
                           config.C, keep_folds)[config.name]
