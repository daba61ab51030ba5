"""Speaker-similarity scores as cosine similarity between embeddings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EvalError


@dataclass(frozen=True)
class SimilarityResult:
    cosine: float

    @property
    def percentage(self) -> float:
        return 100.0 * self.cosine


def cosine_similarity(a, b) -> SimilarityResult:
    a = np.asarray(getattr(a, "values", a), dtype=np.float64)
    b = np.asarray(getattr(b, "values", b), dtype=np.float64)
    if a.shape != b.shape:
        raise EvalError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise EvalError("cosine similarity of a zero vector is undefined")
    return SimilarityResult(float(np.clip(np.dot(a / na, b / nb), -1.0, 1.0)))


def relative_ssim(manipulated, normal) -> SimilarityResult:
    """Similarity of a Lombardness-manipulated embedding to its normal-style counterpart."""
    return cosine_similarity(manipulated, normal)
