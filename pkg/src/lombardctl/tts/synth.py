"""Reference-free synthesis by Euler integration of the learned field."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..duration import DEFAULT_RATE, count_syllables, target_duration
from ..errors import TTSError
from .data import ToyMel, pad_symbols, text_to_symbols
from .model import TTSModel

FieldFn = Callable[[np.ndarray, float], np.ndarray]


def euler_sample(field: FieldFn, x0: np.ndarray, steps: int) -> np.ndarray:
    """Integrate dx/dt = field(x, t) from t=0 to t=1 with ``steps`` Euler steps."""
    if steps < 1:
        raise TTSError("need at least one Euler step")
    dt = 1.0 / steps
    x = np.array(x0, dtype=np.float64)
    for k in range(steps):
        x = x + dt * field(x, k * dt)
    return x


def synthesize(
    model: TTSModel | None,
    text: str,
    style,
    speed: float = 1.0,
    seed: int = 0,
    steps: int = 32,
    frame_rate: float = 50.0,
    rate: float = DEFAULT_RATE,
    field: FieldFn | None = None,
) -> ToyMel:
    """Generate a ToyMel for ``text`` conditioned only on a style vector.

    The frame count comes from the syllable-rate duration rule. No reference mel
    or transcript is used: the conditioning context is all zeros.
    """
    syllables = count_syllables(text)
    if syllables == 0:
        raise TTSError("text has no syllables")
    frames = target_duration(syllables, speed, rate, frame_rate).frames
    channels = model.config.channels if model is not None else np.asarray(style).size
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((frames, channels))
    if field is None:
        if model is None:
            raise TTSError("need a model or an explicit field")
        chars = pad_symbols(text_to_symbols(text), frames)
        cond = np.zeros((frames, channels))
        style_vec = None if style is None else np.asarray(getattr(style, "values", style), dtype=np.float64)
        if model.conditioned and style_vec is None:
            raise TTSError("conditioned model needs a style embedding")

        def field(x, t):
            return model.velocity(x, t, cond, chars, style_vec if model.conditioned else None)

    return ToyMel(euler_sample(field, x0, steps))


def render_waveform(mel, sample_rate: int = 16000, frame_rate: float = 50.0,
                    base_hz: float = 250.0, level: float = 0.04) -> np.ndarray:
    """Additive-sine rendering of a ToyMel for the evaluation demo (not a vocoder).

    Channel c drives a sinusoid at (c + 1) * base_hz with per-frame amplitude
    level * exp(0.5 * value); amplitudes are linearly interpolated between frames.
    """
    values = np.asarray(getattr(mel, "values", mel), dtype=np.float64)
    T, C = values.shape
    hop = sample_rate / frame_rate
    n = int(round(T * hop))
    frame_pos = (np.arange(T) + 0.5) * hop
    sample_pos = np.arange(n)
    amps = level * np.exp(0.5 * np.clip(values, -6.0, 6.0))
    out = np.zeros(n)
    for c in range(C):
        env = np.interp(sample_pos, frame_pos, amps[:, c])
        out += env * np.sin(2.0 * np.pi * (c + 1) * base_hz * sample_pos / sample_rate)
    return np.clip(out, -1.0, 1.0)
