"""Colour tracking-by-detection: hue/saturation backprojection and blob selection."""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

H_BINS = 30
S_BINS = 32
THRESHOLD = 0.5
MORPH_RADIUS = 2
MIN_AREA = 25


class EmptyModel(ValueError):
    pass


@dataclass
class ColorModel:
    hist: np.ndarray  # (H_BINS, S_BINS), sums to 1

    def __post_init__(self):
        self.hist = np.asarray(self.hist, dtype=np.float32)
        if np.any(self.hist < 0):
            raise ValueError("histogram entries must be non-negative")
        total = float(self.hist.sum())
        if total <= 0:
            raise EmptyModel("colour model has no mass")
        self.hist /= total

    @classmethod
    def from_pixels(cls, bgr, mask=None, bins=(H_BINS, S_BINS)) -> ColorModel:
        hsv = cv2.cvtColor(np.ascontiguousarray(bgr, dtype=np.uint8), cv2.COLOR_BGR2HSV)
        m = None if mask is None else np.asarray(mask, dtype=np.uint8)
        hist = cv2.calcHist([hsv], [0, 1], m, list(bins), [0, 180, 0, 256])
        if hist.sum() <= 0:
            raise EmptyModel("no pixels to build a colour model from")
        return cls(hist)

    @classmethod
    def from_bgr(cls, color, bins=(H_BINS, S_BINS)) -> ColorModel:
        patch = np.tile(np.asarray(color, dtype=np.uint8), (4, 4, 1))
        return cls.from_pixels(patch, bins=bins)

    def to_json(self) -> list:
        return self.hist.tolist()


@dataclass
class DetectionResult:
    p: np.ndarray  # (u, v) pixel centre
    s: float
    area: int


def backproject(bgr, model: ColorModel) -> np.ndarray:
    """Per-pixel probability in [0, 1], relative to the most probable bin."""
    if model.hist.max() <= 0:
        raise EmptyModel("colour model has no mass")
    hsv = cv2.cvtColor(np.ascontiguousarray(bgr, dtype=np.uint8), cv2.COLOR_BGR2HSV)
    hb, sb = model.hist.shape
    hi = np.minimum((hsv[..., 0].astype(np.int64) * hb) // 180, hb - 1)
    si = np.minimum((hsv[..., 1].astype(np.int64) * sb) // 256, sb - 1)
    return (model.hist / model.hist.max())[hi, si].astype(float)


def detect_color(bgr, model: ColorModel, threshold=THRESHOLD, radius=MORPH_RADIUS,
                 min_area=MIN_AREA):
    prob = backproject(bgr, model)
    mask = (prob >= threshold).astype(np.uint8)
    if radius > 0:
        kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (2 * radius + 1, 2 * radius + 1))
        mask = cv2.morphologyEx(mask, cv2.MORPH_OPEN, kernel)
        mask = cv2.morphologyEx(mask, cv2.MORPH_CLOSE, kernel)
    n, labels, stats, cents = cv2.connectedComponentsWithStats(mask, connectivity=8)
    if n <= 1:
        return None
    areas = stats[1:, cv2.CC_STAT_AREA]
    best = int(np.argmax(areas)) + 1
    area = int(stats[best, cv2.CC_STAT_AREA])
    if area < min_area:
        return None
    region = labels == best
    s = float(np.clip(prob[region].mean(), 0.0, 1.0))
    return DetectionResult(np.asarray(cents[best], float), s, area)
