"""Lloyd k-means with k-means++ seeding."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..accel import njit, pick

MAX_ITER = 100


class TooFewDescriptors(ValueError):
    pass


def _assign_numpy(x, c):
    best = np.empty(len(x), dtype=np.int64)
    dist = np.empty(len(x))
    step = 4096
    for s in range(0, len(x), step):
        d2 = ((x[s:s + step, None, :] - c[None, :, :]) ** 2).sum(axis=2)
        best[s:s + step] = np.argmin(d2, axis=1)
        dist[s:s + step] = d2[np.arange(len(d2)), best[s:s + step]]
    return best, dist


@njit
def _assign_numba(x, c):
    n, dim = x.shape
    k = c.shape[0]
    best = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for i in range(n):
        bd = np.inf
        bk = 0
        for j in range(k):
            acc = 0.0
            for d in range(dim):
                t = x[i, d] - c[j, d]
                acc += t * t
            if acc < bd:
                bd = acc
                bk = j
        best[i] = bk
        dist[i] = bd
    return best, dist


assign = pick(_assign_numba, _assign_numpy)


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    objective: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def kmeans_pp(x, k, rng) -> np.ndarray:
    n = len(x)
    idx = [int(rng.integers(n))]
    d2 = ((x - x[idx[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise TooFewDescriptors(f"fewer than {k} distinct descriptors")
        nxt = int(rng.choice(n, p=d2 / total))
        idx.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[idx].copy()


def kmeans(x, k, seed=0, max_iter=MAX_ITER) -> KMeansResult:
    """Minimise the sum of squared distances to the nearest of ``k`` centroids.

    ``objective`` lists the cost after seeding and after every Lloyd
    iteration; it never increases.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if k < 2:
        raise ValueError("K must be at least 2")
    if len(x) < k:
        raise TooFewDescriptors(f"{len(x)} descriptors for K={k}")
    rng = np.random.default_rng(seed)
    c = kmeans_pp(x, k, rng)
    labels, dist = assign(x, c)
    res = KMeansResult(c, labels, [float(dist.sum())])
    for it in range(1, max_iter + 1):
        new_c = np.empty_like(c)
        counts = np.bincount(labels, minlength=k)
        sums = np.stack([np.bincount(labels, weights=x[:, d], minlength=k)
                         for d in range(x.shape[1])], axis=1)
        for j in range(k):
            if counts[j]:
                new_c[j] = sums[j] / counts[j]
            else:
                new_c[j] = c[j]
        # an empty cluster takes over the worst-served point, which cannot raise the cost
        for j in np.flatnonzero(counts == 0):
            _, d_now = assign(x, new_c)
            far = int(np.argmax(d_now))
            new_c[j] = x[far]
        new_labels, dist = assign(x, new_c)
        res.objective.append(float(dist.sum()))
        c = new_c
        res.iterations = it
        if np.array_equal(new_labels, labels):
            res.converged = True
            labels = new_labels
            break
        labels = new_labels
    res.centroids = c
    res.labels = labels
    return res
