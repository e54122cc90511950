"""Time each hot kernel with numba and with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Both implementations are imported directly, so one process compares them
regardless of CHILDBOT_DISABLE_NUMBA.  The first numba call (compilation or
cache load) is excluded.
"""
import argparse
import json
import timeit

import numpy as np
from scipy.spatial.transform import Rotation

from childbot.activity.encoding import _chi2_matrix_numba, _chi2_matrix_numpy
from childbot.activity.kmeans import _assign_numba, _assign_numpy
from childbot.audio.srp import _gather_numba, _gather_numpy
from childbot.speech.grammar import _all_numba, _all_numpy
from childbot.tracking.camera import _hit_numba, _hit_numpy
from childbot.tracking.geometry import _obb_numba, _obb_numpy
from childbot.tracking.pf import _scores_numba, _scores_numpy


def cases(rng):
    # sizes follow the real call sites: 4x6 mic pairs over the 0.1 m grid,
    # 2000 descriptors per codebook, a 30-video kernel, 200 particles on a ROI
    corr = rng.normal(size=(24, 4096))
    idx = rng.uniform(0, 4096, size=(24, 40 * 40 * 20))
    yield "srp gather", (_gather_numba, _gather_numpy), (corr, idx)

    yield "kmeans assign", (_assign_numba, _assign_numpy), (rng.normal(size=(2000, 8)), rng.normal(size=(64, 8)))

    h = rng.random((30, 64)) * (rng.random((30, 64)) > 0.3)
    yield "chi2 matrix", (_chi2_matrix_numba, _chi2_matrix_numpy), (h, h)

    sents = [rng.integers(0, 40, int(rng.integers(1, 8))) for _ in range(200)]
    flat = np.concatenate(sents)
    offsets = np.concatenate([[0], np.cumsum([len(s) for s in sents])]).astype(np.int64)
    yield "levenshtein x200", (_all_numba, _all_numpy), (rng.integers(0, 40, 6), flat, offsets)

    rays = rng.normal(size=(120 * 90, 3)) * (0.3, 0.3, 0) + (0, 0, 1)
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    hbox = np.array([0.032, 0.016, 0.01])
    R = Rotation.random(random_state=1).as_matrix()
    yield "ray-box render", (_hit_numba, _hit_numpy), (rays, R, np.array([0, 0, 0.6]), hbox)

    Rs = Rotation.random(200, random_state=2).as_matrix()
    cs = rng.normal(size=(200, 3)) * 0.01 + (0, 0, 0.6)
    obs = rng.uniform(0.55, 0.65, len(rays))
    yield "pf scores x200", (_scores_numba, _scores_numpy), (rays, obs, Rs, cs, hbox, 1e-4)

    R2 = Rotation.random(random_state=3).as_matrix()
    yield "obb test", (_obb_numba, _obb_numpy), (np.zeros(3), R, hbox, np.array([0.03, 0, 0]), R2, hbox)


def run(repeat=5, seed=0):
    rows = []
    for name, (fast, slow), args in cases(np.random.default_rng(seed)):
        fast(*args)
        row = {"kernel": name}
        for label, fn in (("numba", fast), ("numpy", slow)):
            number = 1
            while timeit.timeit(lambda: fn(*args), number=number) < 0.05 and number < 10_000:
                number *= 10
            row[label + "_s"] = min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number
        row["speedup"] = row["numpy_s"] / row["numba_s"]
        rows.append(row)
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    args = p.parse_args(argv)
    rows = run(args.repeat, args.seed)
    print(f"{'kernel':<18}{'numba':>12}{'numpy':>12}{'speedup':>9}")
    for r in rows:
        print(f"{r['kernel']:<18}{r['numba_s'] * 1e3:>10.3f}ms{r['numpy_s'] * 1e3:>10.3f}ms{r['speedup']:>8.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
