"""WAV I/O and SNR-controlled noise mixing."""

from __future__ import annotations

import logging
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EvalError, FormatError

log = logging.getLogger(__name__)

CLEAN = "clean"


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read 16-bit PCM mono; returns float samples in [-1, 1) and the rate."""
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
                raise FormatError(f"{path}: expected 16-bit PCM mono")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        raise FormatError(f"{path}: {exc}") from None
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0, rate


def write_wav(path, samples, rate: int) -> None:
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(rate))
        wf.writeframes(pcm.tobytes())


def power(x: np.ndarray) -> float:
    return float(np.mean(np.square(x)))


def snr_db(signal: np.ndarray, noise: np.ndarray) -> float:
    return 10.0 * math.log10(power(signal) / power(noise))


@dataclass(frozen=True)
class SnrSpec:
    target_snr_db: float | str  # dB, or "clean"
    seed: int = 0

    def __post_init__(self):
        if self.target_snr_db != CLEAN:
            value = float(self.target_snr_db)
            if not math.isfinite(value):
                raise EvalError(f"SNR must be finite, got {self.target_snr_db}")
            object.__setattr__(self, "target_snr_db", value)

    @property
    def is_clean(self) -> bool:
        return self.target_snr_db == CLEAN

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "SnrSpec":
        text = str(text).strip().lower()
        return cls(CLEAN if text in (CLEAN, "inf", "none") else float(text), seed)


def noise_label(spec: SnrSpec) -> str:
    if spec.is_clean:
        return CLEAN
    return format(spec.target_snr_db, "g")


def noise_segment(noise: np.ndarray, length: int, seed) -> np.ndarray:
    """A ``length``-sample excerpt of ``noise`` from a seeded offset, looping if short."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    offset = int(rng.integers(0, noise.size))
    return noise[(offset + np.arange(length)) % noise.size]


def mix_components(clean, noise, spec: SnrSpec, clean_rate: int | None = None,
                   noise_rate: int | None = None) -> tuple[np.ndarray, float]:
    """Return ``(scaled_noise, gain)`` such that clean + scaled_noise hits the target SNR."""
    clean = np.asarray(clean, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if clean.size == 0:
        raise EvalError("clean signal is empty")
    if clean_rate is not None and noise_rate is not None and clean_rate != noise_rate:
        raise EvalError(f"sample-rate mismatch: clean {clean_rate} Hz, noise {noise_rate} Hz")
    if spec.is_clean:
        return np.zeros_like(clean), 0.0
    if noise.size == 0:
        raise EvalError("noise signal is empty")
    segment = noise_segment(noise, clean.size, spec.seed)
    p_noise = power(segment)
    if p_noise == 0.0:
        raise EvalError("noise segment is silent; cannot reach a finite SNR")
    gain = math.sqrt(power(clean) / (p_noise * 10.0 ** (spec.target_snr_db / 10.0)))
    return gain * segment, gain


def mix_at_snr(clean, noise, spec: SnrSpec, clean_rate: int | None = None,
               noise_rate: int | None = None, clip: bool = True) -> np.ndarray:
    """Add noise to ``clean`` at ``spec.target_snr_db``; "clean" passes the input through.

    Power is the mean square over the whole signal. The sum is clipped to
    [-1, 1] unless ``clip=False``; clipping is logged as a warning.
    """
    if spec.is_clean:
        mix_components(clean, noise, spec, clean_rate, noise_rate)
        return clean
    scaled, _ = mix_components(clean, noise, spec, clean_rate, noise_rate)
    mixed = np.asarray(clean, dtype=np.float64) + scaled
    if clip:
        n_clipped = int(np.count_nonzero(np.abs(mixed) > 1.0))
        if n_clipped:
            log.warning("clipped %d of %d samples after mixing at %g dB", n_clipped, mixed.size, spec.target_snr_db)
            mixed = np.clip(mixed, -1.0, 1.0)
    return mixed


def white_noise(length: int, seed: int, level: float = 0.1) -> np.ndarray:
    return level * np.random.default_rng(seed).standard_normal(length)
