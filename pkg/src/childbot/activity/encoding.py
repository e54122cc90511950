"""Codebooks, BoVW / VLAD encodings and the multi-view chi-squared kernel."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..accel import njit, pick
from .kmeans import TooFewDescriptors, assign, kmeans


class DimMismatch(ValueError):
    pass


class NonpositiveNormalizer(ValueError):
    pass


@dataclass
class Codebook:
    """One centroid matrix (shared mode) or one per sensor (per-sensor mode)."""

    books: tuple
    mode: str = "shared"
    trained_on: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.books = tuple(np.ascontiguousarray(b, dtype=float) for b in self.books)
        if self.mode not in ("shared", "per-sensor"):
            raise ValueError(f"unknown codebook mode {self.mode!r}")
        if self.mode == "shared" and len(self.books) != 1:
            raise ValueError("a shared codebook has exactly one centroid matrix")
        for b in self.books:
            if b.ndim != 2 or b.shape[0] < 2:
                raise ValueError("codebooks need K >= 2 centroids")
            if not np.all(np.isfinite(b)):
                raise ValueError("centroids must be finite")

    @property
    def k(self) -> int:
        return self.books[0].shape[0]

    @property
    def dim(self) -> int:
        return self.books[0].shape[1]

    def book(self, sensor=0) -> np.ndarray:
        return self.books[0] if self.mode == "shared" else self.books[sensor]


MAX_TRAIN = 2000


def train_codebook(descriptors, k, mode="shared", seed=0, trained_on=(),
                   max_train=MAX_TRAIN) -> Codebook:
    """``descriptors`` is a list over sensors of lists of (M, D) arrays.

    At most ``max_train`` descriptors (a seeded random subset) per book enter
    k-means; ``None`` uses them all.
    """
    per_sensor = [np.concatenate([np.asarray(a, float).reshape(-1, a.shape[-1]) for a in s])
                  if len(s) else np.zeros((0, 0)) for s in descriptors]
    if mode == "shared":
        pooled = np.concatenate([p for p in per_sensor if p.size])
        books = (_fit(pooled, k, seed, max_train),)
    else:
        books = tuple(_fit(p, k, seed + i, max_train) for i, p in enumerate(per_sensor))
    return Codebook(books, mode, frozenset(trained_on))


def _fit(x, k, seed, max_train=None):
    if max_train is not None and len(x) > max_train:
        pick_rows = np.random.default_rng(seed).choice(len(x), max_train, replace=False)
        x = x[np.sort(pick_rows)]
    if len(x) < k or len(np.unique(x, axis=0)) < k:
        raise TooFewDescriptors(f"need {k} distinct descriptors, have {len(x)}")
    return kmeans(x, k, seed).centroids


@dataclass
class EncodedRep:
    kind: str  # "bovw", "vlad", "vlad-concat"
    values: np.ndarray
    raw: np.ndarray
    degenerate: bool = False


def _l2(v):
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.zeros_like(v)


def _as_list(descs):
    if isinstance(descs, np.ndarray):
        return [descs]
    return list(descs)


def _check_dims(arrays, dim):
    for a in arrays:
        a = np.asarray(a)
        if a.size and (a.ndim != 2 or a.shape[1] != dim):
            raise DimMismatch(f"descriptor dim {a.shape[-1]} != codebook dim {dim}")


def bovw_counts(x, centroids) -> np.ndarray:
    x = np.asarray(x, float)
    if len(x) == 0:
        return np.zeros(len(centroids))
    labels, _ = assign(np.ascontiguousarray(x), centroids)
    return np.bincount(labels, minlength=len(centroids)).astype(float)


def encode_bovw(descs, codebook: Codebook, multiview=True) -> EncodedRep:
    """Sum-pooled (over descriptors and, for a shared book, sensors) L2 histogram.

    With ``multiview=False`` and several sensors each sensor is encoded with its
    own book and the rows are returned as a (S, K) matrix.
    """
    sensors = _as_list(descs)
    _check_dims(sensors, codebook.dim)
    counts = [bovw_counts(x, codebook.book(i)) for i, x in enumerate(sensors)]
    if multiview or len(sensors) == 1:
        raw = np.sum(counts, axis=0)
        return EncodedRep("bovw", _l2(raw), raw, not raw.any())
    raw = np.stack(counts)
    vals = np.stack([_l2(r) for r in raw])
    return EncodedRep("bovw", vals, raw, not raw.any())


def vlad_residuals(x, centroids) -> np.ndarray:
    x = np.asarray(x, float)
    k, dim = centroids.shape
    out = np.zeros((k, dim))
    if len(x) == 0:
        return out
    labels, _ = assign(np.ascontiguousarray(x), centroids)
    np.add.at(out, labels, x - centroids[labels])
    return out


def _vlad_normalize(res):
    blocks = np.stack([_l2(b) for b in res])
    return _l2(blocks.ravel())


def encode_vlad(descs, codebook: Codebook, multiview=True) -> EncodedRep:
    """Residual sums per codeword, intra-normalised per block, then global L2.

    A shared book with ``multiview`` pools residuals over sensors.  Otherwise
    each sensor is encoded with its book and the normalised vectors are
    concatenated (length S*K*D) and renormalised.
    """
    sensors = _as_list(descs)
    _check_dims(sensors, codebook.dim)
    res = [vlad_residuals(x, codebook.book(i)) for i, x in enumerate(sensors)]
    if multiview or len(sensors) == 1:
        raw = np.sum(res, axis=0)
        vals = _vlad_normalize(raw)
        return EncodedRep("vlad", vals, raw.ravel(), not vals.any())
    parts = [_vlad_normalize(r) for r in res]
    vals = _l2(np.concatenate(parts))
    return EncodedRep("vlad-concat", vals, np.concatenate([r.ravel() for r in res]),
                      not vals.any())


def chi2_distance(a, b) -> float:
    """0.5 * sum (a-b)^2 / (a+b), skipping bins where a+b == 0."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    s = a + b
    m = s > 0
    return float(0.5 * np.sum((a[m] - b[m]) ** 2 / s[m]))


def _chi2_matrix_numpy(x, y):
    out = np.empty((len(x), len(y)))
    for i in range(len(x)):
        s = x[i][None, :] + y
        d = (x[i][None, :] - y) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(s > 0, d / np.where(s > 0, s, 1.0), 0.0)
        out[i] = 0.5 * q.sum(axis=1)
    return out


@njit
def _chi2_matrix_numba(x, y):
    n, k = x.shape
    m = y.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                s = x[i, t] + y[j, t]
                if s > 0:
                    d = x[i, t] - y[j, t]
                    acc += d * d / s
            out[i, j] = 0.5 * acc
    return out


chi2_matrix = pick(_chi2_matrix_numba, _chi2_matrix_numpy)


def chi2_multiview_kernel(rep_j, rep_q, A) -> float:
    """sum_{i,c} exp(-L(h_j^{c,i}, h_q^{c,i}) / A_{i,c}); reps are (S, C, K)."""
    rj, rq = np.asarray(rep_j, float), np.asarray(rep_q, float)
    A = np.asarray(A, float)
    if rj.shape != rq.shape or rj.shape[:2] != A.shape:
        raise DimMismatch("representations and normalisers must share (S, C) structure")
    if np.any(A <= 0):
        raise NonpositiveNormalizer("A_c must be positive")
    total = 0.0
    for i in range(A.shape[0]):
        for c in range(A.shape[1]):
            total += np.exp(-chi2_distance(rj[i, c], rq[i, c]) / A[i, c])
    return float(total)


def chi2_normalizers(reps) -> np.ndarray:
    """Mean pairwise chi2 distance per (sensor, channel) over training reps (N, S, C, K)."""
    reps = np.asarray(reps, float)
    n, s, c, _ = reps.shape
    A = np.empty((s, c))
    iu = np.triu_indices(n, 1)
    for i in range(s):
        for j in range(c):
            d = chi2_matrix(np.ascontiguousarray(reps[:, i, j]), np.ascontiguousarray(reps[:, i, j]))
            A[i, j] = d[iu].mean() if n > 1 else 0.0
    if np.any(A <= 0):
        raise NonpositiveNormalizer("mean training chi2 distance is zero")
    return A


def chi2_kernel_matrix(x, y, A) -> np.ndarray:
    """Kernel between rep stacks x (N, S, C, K) and y (M, S, C, K)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.asarray(A, float)
    if np.any(A <= 0):
        raise NonpositiveNormalizer("A_c must be positive")
    out = np.zeros((len(x), len(y)))
    for i in range(A.shape[0]):
        for c in range(A.shape[1]):
            d = chi2_matrix(np.ascontiguousarray(x[:, i, c]), np.ascontiguousarray(y[:, i, c]))
            out += np.exp(-d / A[i, c])
    return out
