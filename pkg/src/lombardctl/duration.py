"""Syllable counting and speaking-rate based duration targets."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .errors import DurationError

DEFAULT_RATE = 4.0  # syllables per second, English

_VOWEL_GROUP = re.compile(r"[aeiouy]+")
_CONSONANT_LE = re.compile(r"[^aeiouy]le$")


def _word_syllables(word: str) -> int:
    letters = "".join(ch for ch in word.lower() if "a" <= ch <= "z")
    if not letters:
        return 0
    count = len(_VOWEL_GROUP.findall(letters))
    # Terminal silent "e"; consonant + "le" (table, little) stays voiced.
    if letters.endswith("e") and count > 1 and not _CONSONANT_LE.search(letters):
        count -= 1
    return max(count, 1)


def count_syllables(text: str) -> int:
    """Heuristic English syllable count, summed over whitespace-separated words."""
    return sum(_word_syllables(w) for w in text.split())


@dataclass(frozen=True)
class DurationSpec:
    syllables: int
    rate_base: float
    speed: float
    seconds: float
    frames: int
    frame_rate: float


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def target_duration(
    syllables: int,
    speed: float = 1.0,
    rate_base: float = DEFAULT_RATE,
    frame_rate: float = 50.0,
) -> DurationSpec:
    """seconds = syllables / (rate_base * speed); speed < 1 gives longer speech."""
    if syllables < 1:
        raise DurationError("need at least one syllable (empty text?)")
    if not speed > 0:
        raise DurationError(f"speed must be positive, got {speed}")
    if not (rate_base > 0 and frame_rate > 0):
        raise DurationError("rate and frame rate must be positive")
    seconds = syllables / (rate_base * speed)
    frames = max(1, round_half_up(seconds * frame_rate))
    return DurationSpec(syllables, rate_base, speed, seconds, frames, frame_rate)
