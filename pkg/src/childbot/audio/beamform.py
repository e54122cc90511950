"""Delay-and-sum beamforming for a uniform linear array."""
from __future__ import annotations

import numpy as np

from .geometry import SPEED_OF_SOUND
from .signals import AudioFrame, fractional_delay


def steering_delays(n, d, phi, c=SPEED_OF_SOUND) -> np.ndarray:
    """tau_n = (n - 1) d cos(phi) / c for mics n = 1..N (seconds)."""
    return np.arange(n) * d * np.cos(phi) / c


def delay_and_sum(frame: AudioFrame, d, phi, c=SPEED_OF_SOUND) -> np.ndarray:
    """y(t) = mean_n a_n(t - tau_n); same length as the input."""
    x = frame.samples
    taus = steering_delays(x.shape[0], d, phi, c)
    return fractional_delay(x, taus, frame.rate).mean(axis=0)


def plane_wave(signal, n, d, phi, rate, c=SPEED_OF_SOUND) -> np.ndarray:
    """Array snapshot of a far-field wave from angle ``phi`` to the array axis.

    Mic n sits n*d further along the axis, so it hears the wave tau_n earlier.
    """
    taus = steering_delays(n, d, phi, c)
    return fractional_delay(np.broadcast_to(signal, (n, len(signal))), -taus, rate)
