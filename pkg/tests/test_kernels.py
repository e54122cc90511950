import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from childbot import accel
from childbot.activity.encoding import _chi2_matrix_numba, _chi2_matrix_numpy
from childbot.activity.kmeans import _assign_numba, _assign_numpy
from childbot.audio.srp import _gather_numba, _gather_numpy
from childbot.tracking.geometry import _obb_numba, _obb_numpy
from childbot.tracking.pf import _scores_numba, _scores_numpy


def test_assign_parity():
    rng = np.random.default_rng(0)
    x, c = rng.normal(size=(500, 8)), rng.normal(size=(12, 8))
    a, da = _assign_numba(x, c)
    b, db = _assign_numpy(x, c)
    assert np.array_equal(a, b)
    np.testing.assert_allclose(da, db, rtol=1e-12)


def test_chi2_parity_with_empty_bins():
    rng = np.random.default_rng(1)
    x = rng.random((30, 20)) * (rng.random((30, 20)) > 0.5)
    y = rng.random((25, 20)) * (rng.random((25, 20)) > 0.5)
    np.testing.assert_allclose(_chi2_matrix_numba(x, y), _chi2_matrix_numpy(x, y), rtol=1e-12, atol=1e-15)


def test_gather_parity_wraps_negative_indices():
    rng = np.random.default_rng(2)
    corr = rng.normal(size=(6, 256))
    idx = rng.uniform(-300, 300, size=(6, 1000))
    np.testing.assert_allclose(_gather_numba(corr, idx), _gather_numpy(corr, idx), rtol=1e-12)


def test_scores_parity():
    rng = np.random.default_rng(3)
    rays = rng.normal(size=(600, 3)) * (0.2, 0.2, 0) + (0, 0, 1)
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    Rs = Rotation.random(10, random_state=3).as_matrix()
    cs = rng.normal(size=(10, 3)) * 0.02 + (0, 0, 0.5)
    obs = rng.uniform(0.4, 0.6, 600) * (rng.random(600) > 0.1)
    h = np.array([0.032, 0.016, 0.01])
    np.testing.assert_allclose(_scores_numba(rays, obs, Rs, cs, h, 1e-4),
                               _scores_numpy(rays, obs, Rs, cs, h, 1e-4), rtol=1e-9, atol=1e-15)


def test_obb_parity():
    rng = np.random.default_rng(4)
    h = np.array([0.032, 0.016, 0.01])
    hits = 0
    for k in range(300):
        R1, R2 = Rotation.random(2, random_state=k).as_matrix()
        c1, c2 = rng.normal(size=3) * 0.03, rng.normal(size=3) * 0.03
        got = _obb_numba(c1, R1, h, c2, R2, h)
        assert got == _obb_numpy(c1, R1, h, c2, R2, h)
        hits += got
    assert 0 < hits < 300


@pytest.mark.parametrize("value,expect", [("1", "numpy"), ("0", None), ("", None)])
def test_disable_switch(value, expect):
    env = dict(os.environ, CHILDBOT_DISABLE_NUMBA=value)
    out = subprocess.run([sys.executable, "-c", "from childbot import accel; print(accel.backend_name())"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == (expect or ("numba" if accel.HAVE_NUMBA else "numpy"))


def test_benchmark_script_runs(tmp_path):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--repeat", "1", "--json", str(tmp_path / "b.json")])
    rows = __import__("json").loads((tmp_path / "b.json").read_text())
    assert {r["kernel"] for r in rows} >= {"srp gather", "levenshtein x200", "pf scores x200"}
    assert all(r["numba_s"] > 0 and r["numpy_s"] > 0 for r in rows)
