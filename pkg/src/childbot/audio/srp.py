"""GCC-PHAT and grid-search SRP-PHAT localization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..accel import njit, pick
from .geometry import ArrayGeometry, GridSpec
from .signals import AudioFrame

PHAT_EPS = 1e-12
UPSAMPLE = 8


class DegenerateSignal(ValueError):
    pass


def _check_channels(*chans):
    for x in chans:
        if not np.any(x):
            raise DegenerateSignal("channel is identically zero")


def phat_spectrum(x1, x2, n=None):
    """Whitened cross-spectrum X1 conj(X2) / max(|X1 conj(X2)|, eps)."""
    x1 = np.asarray(x1, float)
    x2 = np.asarray(x2, float)
    if x1.shape != x2.shape:
        raise ValueError("channels must have equal length")
    _check_channels(x1, x2)
    n = n or x1.shape[-1]
    cross = np.fft.rfft(x1, n) * np.conj(np.fft.rfft(x2, n))
    return cross / np.maximum(np.abs(cross), PHAT_EPS)


def gcc_phat(x1, x2, rate):
    """Return ``(lags_s, cc, peak_lag_s)``.

    ``cc[k]`` is the whitened correlation at lag ``lags_s[k]``; a positive lag
    means ``x2`` is a delayed copy of ``x1``.  Inputs are zero-padded to twice
    their length so the correlation is linear rather than circular.
    """
    x1 = np.asarray(x1, float)
    t = x1.shape[-1]
    n = 2 * t
    r = np.fft.irfft(phat_spectrum(x1, x2, n), n)
    lags = np.arange(-(t - 1), t)
    # r[m] peaks at m = -delay; flip so index lag L reads r[-L]
    cc = r[(-lags) % n]
    peak = lags[int(np.argmax(cc))]
    return lags / rate, cc, peak / rate


@dataclass
class SrpMap:
    grid: GridSpec
    power: np.ndarray  # flat, len(grid)

    @property
    def argmax_index(self) -> int:
        return int(np.argmax(self.power))

    @property
    def argmax(self) -> np.ndarray:
        return self.grid.points()[self.argmax_index]

    @property
    def peak(self) -> float:
        return float(self.power[self.argmax_index])

    def volume(self) -> np.ndarray:
        return self.power.reshape(self.grid.shape)


def pair_lags(geometry: ArrayGeometry, points: np.ndarray):
    """Per-array (P, G) geometric lags in seconds: (|p-m_j| - |p-m_i|) / c."""
    out = []
    for arr in geometry.arrays:
        dist = np.linalg.norm(points[None, :, :] - arr.mics[:, None, :], axis=2)
        out.append(np.stack([(dist[j] - dist[i]) / geometry.c for i, j in arr.pairs()]))
    return out


def _gather_numpy(corr, idx):
    # corr: (P, L) upsampled circular correlation; idx: (P, G) fractional index
    length = corr.shape[1]
    lo = np.floor(idx)
    frac = idx - lo
    lo = lo.astype(np.int64) % length
    hi = (lo + 1) % length
    rows = np.arange(corr.shape[0])[:, None]
    vals = corr[rows, lo] * (1.0 - frac) + corr[rows, hi] * frac
    return vals.sum(axis=0)


@njit
def _gather_numba(corr, idx):
    n_pairs, n_points = idx.shape
    length = corr.shape[1]
    out = np.zeros(n_points)
    for g in range(n_points):
        acc = 0.0
        for p in range(n_pairs):
            x = idx[p, g]
            lo = np.floor(x)
            frac = x - lo
            i0 = int(lo) % length
            i1 = (i0 + 1) % length
            acc += corr[p, i0] * (1.0 - frac) + corr[p, i1] * frac
        out[g] = acc
    return out


gather_pairs = pick(_gather_numba, _gather_numpy)


class SrpLocalizer:
    """SRP-PHAT over a fixed grid; lag tables are computed once per rate/length."""

    def __init__(self, geometry: ArrayGeometry, grid: GridSpec, upsample=UPSAMPLE):
        self.geometry = geometry
        self.grid = grid
        self.upsample = int(upsample)
        self.points = grid.points()
        self.lags = pair_lags(geometry, self.points)
        self._cache = {}

    def _indices(self, rate, length):
        key = (rate, length)
        if key not in self._cache:
            u = self.upsample
            # circular correlation r[m] peaks at m = -lag; convert seconds to (negated) up-sampled bins
            self._cache = {key: [np.ascontiguousarray(-lag * rate * u) for lag in self.lags]}
        return self._cache[key]

    def correlations(self, frame: AudioFrame, array_index: int) -> np.ndarray:
        """(P, T*U) circular whitened correlations of one array's pairs."""
        arr = self.geometry.arrays[array_index]
        t = frame.length
        specs = np.fft.rfft(frame.samples, axis=1)
        if not np.all(np.any(frame.samples, axis=1)):
            raise DegenerateSignal("channel is identically zero")
        out = []
        for i, j in arr.pairs():
            cross = specs[i] * np.conj(specs[j])
            out.append(cross / np.maximum(np.abs(cross), PHAT_EPS))
        return np.fft.irfft(np.stack(out), n=t * self.upsample, axis=1) * self.upsample

    def __call__(self, frames) -> SrpMap:
        if len(frames) != len(self.geometry.arrays):
            raise ValueError("need one frame per array")
        rate, length = frames[0].rate, frames[0].length
        idx = self._indices(rate, length)
        power = np.zeros(len(self.points))
        for a, frame in enumerate(frames):
            if frame.channels != self.geometry.arrays[a].n:
                raise ValueError(f"array {a} expects {self.geometry.arrays[a].n} channels")
            power += gather_pairs(self.correlations(frame, a), idx[a])
        return SrpMap(self.grid, power)


def srp_phat(frames, geometry: ArrayGeometry, grid: GridSpec | None = None) -> SrpMap:
    grid = grid or GridSpec.from_room(geometry)
    return SrpLocalizer(geometry, grid)(frames)
