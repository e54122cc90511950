"""Multichannel frames, free-field simulation, framing and WAV I/O."""
from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry


class SourceOutsideRoom(ValueError):
    pass


class SignalTooShort(ValueError):
    pass


@dataclass
class AudioFrame:
    samples: np.ndarray  # (channels, T)
    rate: float
    start: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        if s.ndim != 2:
            raise ValueError("samples must be channels x T")
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        self.samples = s

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.rate


@dataclass
class SourceSpec:
    position: tuple
    signal: np.ndarray
    gain: float = 1.0


def fractional_delay(x: np.ndarray, delay: float | np.ndarray, rate: float) -> np.ndarray:
    """Circularly delay ``x`` (last axis) by ``delay`` seconds via a phase ramp."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    freqs = np.fft.rfftfreq(n, 1.0 / rate)
    delay = np.asarray(delay, dtype=float)
    phase = np.exp(-2j * np.pi * freqs * delay[..., None])
    spec = np.fft.rfft(x, axis=-1) * phase
    if n % 2 == 0:
        # keep the Nyquist bin real so the result is a real signal
        spec[..., -1] = spec[..., -1].real
    return np.fft.irfft(spec, n=n, axis=-1)


def simulate_propagation(sources, geometry: ArrayGeometry, snr_db=None, seed=0,
                         rate=16000.0) -> list[AudioFrame]:
    """Free-field rendering of ``sources`` at every microphone, one frame per array."""
    if not sources:
        raise ValueError("at least one source is required")
    lengths = {len(s.signal) for s in sources}
    if len(lengths) != 1:
        raise ValueError("source signals must have equal length")
    for s in sources:
        if not geometry.contains(s.position):
            raise SourceOutsideRoom(f"source at {tuple(s.position)} is outside {geometry.room}")
    rng = np.random.default_rng(seed)
    frames = []
    for arr in geometry.arrays:
        total = 0.0
        for s in sources:
            dist = np.linalg.norm(arr.mics - np.asarray(s.position, float)[None, :], axis=1)
            total = total + (s.gain / dist)[:, None] * fractional_delay(
                np.broadcast_to(s.signal, (arr.n, len(s.signal))), dist / geometry.c, rate)
        total = np.array(total)
        if snr_db is not None:
            power = np.mean(total ** 2, axis=1, keepdims=True)
            sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
            total = total + sigma * rng.standard_normal(total.shape)
        frames.append(AudioFrame(total, rate, 0.0))
    return frames


def frame_stream(signal, rate, window=2.5, shift=0.6) -> list[AudioFrame]:
    """Sliding windows over ``signal`` (1-D or channels x T)."""
    x = np.asarray(signal, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    w = int(round(window * rate))
    s = int(round(shift * rate))
    if w <= 0 or s <= 0:
        raise ValueError("window and shift must be positive")
    n = x.shape[1]
    if n < w:
        raise SignalTooShort(f"{n / rate:.3f} s is shorter than the {window} s window")
    count = (n - w) // s + 1
    return [AudioFrame(x[:, k * s:k * s + w], rate, k * s / rate) for k in range(count)]


def read_wav(path) -> tuple[np.ndarray, int]:
    """PCM-16 WAV as (channels, T) floats in [-1, 1) plus the sample rate."""
    with wave.open(str(path), "rb") as fh:
        if fh.getsampwidth() != 2:
            raise ValueError("only 16-bit PCM is supported")
        ch, rate, n = fh.getnchannels(), fh.getframerate(), fh.getnframes()
        raw = np.frombuffer(fh.readframes(n), dtype="<i2")
    return raw.reshape(-1, ch).T.astype(float) / 32768.0, rate


def write_wav(path, samples, rate):
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(x.shape[0])
        fh.setsampwidth(2)
        fh.setframerate(int(rate))
        fh.writeframes(pcm.T.tobytes())
