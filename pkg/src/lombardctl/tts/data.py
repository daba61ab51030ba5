"""ToyMel containers, text symbols, masking, augmentation and the synthetic task."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError, TTSError

FILLER = 0
SPACE = 27
UNKNOWN = 28
VOCAB = 29

FORMANT_LIMITS = (0.8, 1.25)


@dataclass(frozen=True)
class ToyMel:
    values: np.ndarray  # (T, C)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise TTSError(f"ToyMel needs shape (T>=1, C>=1), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise TTSError("ToyMel values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]


def save_mel_csv(mel, path) -> None:
    values = getattr(mel, "values", mel)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in values:
            w.writerow([repr(float(x)) for x in row])


def load_mel_csv(path) -> ToyMel:
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return ToyMel(np.array([[float(x) for x in r] for r in rows]))
    except (ValueError, TTSError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def text_to_symbols(text: str) -> list[int]:
    out = []
    for ch in text.lower():
        if "a" <= ch <= "z":
            out.append(ord(ch) - ord("a") + 1)
        elif ch.isspace():
            out.append(SPACE)
        else:
            out.append(UNKNOWN)
    return out


def pad_symbols(symbols, frames: int) -> np.ndarray:
    """Pad with the filler id (or truncate) to exactly ``frames`` entries."""
    out = np.full(frames, FILLER, dtype=np.int64)
    n = min(len(symbols), frames)
    out[:n] = symbols[:n]
    return out


def mask_spans(T: int, ratio: float, seed) -> np.ndarray:
    """One contiguous masked span of round(ratio*T) frames at a seeded start."""
    if not 0.0 <= ratio <= 1.0:
        raise TTSError(f"mask ratio {ratio} outside [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    length = int(np.floor(ratio * T + 0.5))
    start = int(rng.integers(0, T - length + 1))
    mask = np.zeros(T, dtype=bool)
    mask[start:start + length] = True
    return mask


def warp_channels(values: np.ndarray, factor: float) -> np.ndarray:
    """Resample the channel axis at positions j / factor with edge clamping."""
    if not factor > 0:
        raise TTSError("warp factor must be positive")
    values = np.asarray(values, dtype=np.float64)
    C = values.shape[-1]
    grid = np.arange(C, dtype=np.float64)
    pos = grid / factor
    flat = values.reshape(-1, C)
    out = np.stack([np.interp(pos, grid, row) for row in flat])
    return out.reshape(values.shape)


def formant_shift_augment(mel, factor: float | None = None, seed=None, limits=FORMANT_LIMITS):
    """Frequency-axis warp standing in for a formant shift.

    With ``factor=None`` a factor is drawn uniformly from ``limits`` using ``seed``.
    Pass ``limits=None`` to skip range validation.
    """
    values = getattr(mel, "values", mel)
    if factor is None:
        if limits is None:
            raise TTSError("need either a factor or limits to draw one from")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        factor = float(rng.uniform(*limits))
    if limits is not None and not limits[0] <= factor <= limits[1]:
        raise TTSError(f"formant factor {factor} outside [{limits[0]}, {limits[1]}]")
    out = warp_channels(values, factor)
    return ToyMel(out) if isinstance(mel, ToyMel) else out


# -- synthetic conditional task ----------------------------------------------

WORDS = (
    "the a speech loud soft clear voice noise signal sound quiet room talk "
    "listen people hear word phrase simple model test level style better "
    "very normal every over under station window yellow river garden letter"
).split()


@dataclass(frozen=True)
class SyntheticTask:
    """Targets are a closed-form function of (symbols, loudness s, clarity q).

    frame[t, c] = s + symbol_gain * P[symbol_t, c] + clarity_gain * q * tilt[c] + noise

    Rows of P and the tilt are zero-mean over channels, so the mean of a frame
    is ``s`` up to noise.
    """

    channels: int = 8
    symbol_gain: float = 0.5
    clarity_gain: float = 0.4
    noise: float = 0.05
    style_range: float = 1.25
    task_seed: int = 20240917

    def patterns(self) -> np.ndarray:
        rng = np.random.default_rng(self.task_seed)
        p = rng.standard_normal((VOCAB, self.channels))
        return p - p.mean(axis=1, keepdims=True)

    def tilt(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.channels)

    def random_text(self, rng: np.random.Generator, max_chars: int) -> str:
        words: list[str] = []
        while True:
            w = WORDS[int(rng.integers(len(WORDS)))]
            candidate = " ".join(words + [w])
            if len(candidate) > max_chars:
                break
            words.append(w)
        return " ".join(words) or WORDS[0][:max_chars]

    def render(self, chars: np.ndarray, s, q, rng: np.random.Generator) -> np.ndarray:
        """Targets for (N, T) symbol ids and per-utterance s, q."""
        chars = np.atleast_2d(chars)
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        q = np.atleast_1d(np.asarray(q, dtype=np.float64))
        base = self.symbol_gain * self.patterns()[chars]
        out = base + s[:, None, None] + self.clarity_gain * q[:, None, None] * self.tilt()
        return out + self.noise * rng.standard_normal(out.shape)

    def sample(self, rng: np.random.Generator, batch: int, frames: int):
        """Returns x1, chars, reference mels (same style, other text), s, q."""
        s = rng.uniform(-self.style_range, self.style_range, batch)
        q = rng.uniform(-self.style_range, self.style_range, batch)
        chars = np.empty((batch, frames), dtype=np.int64)
        ref_chars = np.empty_like(chars)
        for i in range(batch):
            lo = max(1, frames // 2)
            chars[i] = pad_symbols(text_to_symbols(self.random_text(rng, int(rng.integers(lo, frames + 1)))), frames)
            ref_chars[i] = pad_symbols(text_to_symbols(self.random_text(rng, int(rng.integers(lo, frames + 1)))), frames)
        x1 = self.render(chars, s, q, rng)
        ref = self.render(ref_chars, s, q, rng)
        return x1, chars, ref, s, q

    def reference(self, s: float, q: float, frames: int, seed) -> np.ndarray:
        """One (frames, C) reference mel with the given style."""
        rng = np.random.default_rng(seed)
        chars = pad_symbols(text_to_symbols(self.random_text(rng, frames)), frames)
        return self.render(chars[None], s, q, rng)[0]
