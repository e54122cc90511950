"""Synthetic localization benchmark: random talkers in the room, SRP-PHAT estimates."""
from __future__ import annotations

import time

import numpy as np

from .geometry import ArrayGeometry, GridSpec, default_geometry
from .signals import SourceSpec, simulate_propagation
from .srp import SrpLocalizer


def localization_bench(geometry: ArrayGeometry | None = None, snr_db=20.0, trials=100, grid=0.1,
                       seed=0, frame_len=4096, rate=16000.0, margin=0.3):
    """Returns a dict with Pcor, RMSE, RMSEf and the mean seconds per frame."""
    from ..speaker import metrics_from_errors

    geometry = geometry or default_geometry()
    loc = SrpLocalizer(geometry, GridSpec.from_room(geometry, grid))
    rng = np.random.default_rng(seed)
    lo = np.asarray(geometry.room[0], float) + margin
    hi = np.asarray(geometry.room[1], float) - margin
    errors, spent = [], 0.0
    for k in range(trials):
        p = rng.uniform(lo, hi)
        frames = simulate_propagation([SourceSpec(p, rng.standard_normal(frame_len))], geometry,
                                      snr_db, seed=seed * 100_003 + k, rate=rate)
        t0 = time.perf_counter()
        est = loc(frames).argmax
        spent += time.perf_counter() - t0
        errors.append(float(np.linalg.norm(est - p)))
    rep = metrics_from_errors(errors).to_dict()
    rep.update(snr_db=snr_db, grid=grid, seconds_per_frame=spent / trials, trials=trials)
    return rep
