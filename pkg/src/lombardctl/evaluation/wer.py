"""Word error rate by minimal-edit alignment."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from ..errors import EvalError

_PUNCT = re.compile(r"[^\w\s]")


def normalize(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT.sub("", text.lower()).split()


@dataclass(frozen=True)
class WerResult:
    substitutions: int
    deletions: int
    insertions: int
    reference_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.reference_words


def align_counts(ref: Sequence, hyp: Sequence) -> tuple[int, int, int]:
    """(S, D, I) of a minimal unit-cost alignment.

    Among equal-cost alignments the one with the most substitutions wins, i.e. a
    substitution is preferred over a deletion + insertion pair.
    """
    n, m = len(ref), len(hyp)
    # Each cell: (cost, -S, S, D, I); tuple order gives the tie-break.
    prev = [(j, 0, 0, 0, j) for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [(i, 0, 0, i, 0)]
        for j in range(1, m + 1):
            c, ns, s, d, ins = prev[j - 1]
            if ref[i - 1] == hyp[j - 1]:
                diag = (c, ns, s, d, ins)
            else:
                diag = (c + 1, ns - 1, s + 1, d, ins)
            c, ns, s, d, ins = prev[j]
            up = (c + 1, ns, s, d + 1, ins)
            c, ns, s, d, ins = cur[j - 1]
            left = (c + 1, ns, s, d, ins + 1)
            cur.append(min(diag, up, left))
        prev = cur
    _, _, s, d, ins = prev[m]
    return s, d, ins


def word_error_rate(reference, hypothesis) -> WerResult:
    """WER of ``hypothesis`` against ``reference``.

    Both may be strings (normalized here) or token lists (used as given).
    """
    ref = normalize(reference) if isinstance(reference, str) else list(reference)
    hyp = normalize(hypothesis) if isinstance(hypothesis, str) else list(hypothesis)
    if not ref:
        raise EvalError("reference is empty after normalization")
    s, d, i = align_counts(ref, hyp)
    return WerResult(s, d, i, len(ref))


def relative_wer(wer_noisy: float, wer_clean: float) -> float | None:
    """Noisy-over-clean WER ratio; None (undefined) when the clean WER is zero."""
    if wer_clean == 0:
        return None
    if wer_clean < 0 or wer_noisy < 0:
        raise EvalError("WER values must be non-negative")
    return wer_noisy / wer_clean
