"""PCA over style-embedding corpora and component/attribute correlation."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingCorpus, StyleEmbedding
from .errors import FormatError, PcaError

PCAM_MAGIC = b"PCAM"
ORTHONORMAL_TOL_LOAD = 1e-6


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (D,)
    components: np.ndarray  # (K, D), orthonormal rows
    sigma: np.ndarray  # (K,) score standard deviations, non-increasing
    explained_variance_ratio: np.ndarray  # (K,)

    def __post_init__(self):
        for name in ("mean", "components", "sigma", "explained_variance_ratio"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def dimension(self) -> int:
        return self.mean.size

    def orthonormality_error(self) -> float:
        gram = self.components @ self.components.T
        return float(np.max(np.abs(gram - np.eye(self.k)))) if self.k else 0.0


@dataclass(frozen=True)
class ComponentCorrelation:
    component_index: int
    pearson_r: float | None  # None when the component's scores have zero variance
    sample_count: int

    @property
    def defined(self) -> bool:
        return self.pearson_r is not None


def _canonical_signs(components: np.ndarray) -> np.ndarray:
    """Flip rows so the largest-magnitude entry (lowest index on ties) is positive."""
    out = components.copy()
    for i, row in enumerate(out):
        mags = np.abs(row)
        peak = mags.max()
        if peak == 0.0:
            continue
        j = int(np.flatnonzero(mags >= peak * (1.0 - 1e-9))[0])
        if row[j] < 0:
            out[i] = -row
    return out


def fit_pca(corpus: EmbeddingCorpus | np.ndarray, k: int | str = "max") -> PcaModel:
    """Fit by SVD of the centered data matrix.

    ``k="max"`` keeps min(N-1, D) components. sigma uses the n-1 normalization.
    """
    X = corpus.matrix() if isinstance(corpus, EmbeddingCorpus) else np.atleast_2d(
        np.asarray(corpus, dtype=np.float64)
    )
    n, d = X.shape
    if n < 2:
        raise PcaError(f"need at least 2 embeddings to fit PCA, got {n}")
    if not np.all(np.isfinite(X)):
        raise PcaError("non-finite input")
    kmax = min(n - 1, d)
    if k == "max":
        k = kmax
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 1 <= k <= kmax:
        raise PcaError(f"k={k!r} out of range [1, {kmax}] (N={n}, D={d})")
    k = int(k)

    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    # Same cutoff as numpy's matrix_rank: anything below is rounding noise.
    s = np.where(s > s.max(initial=0.0) * max(n, d) * np.finfo(float).eps, s, 0.0)
    components = _canonical_signs(vt[:k])
    sigma = s[:k] / np.sqrt(n - 1)
    total = float(np.sum(s**2))
    ratio = s[:k] ** 2 / total if total > 0 else np.zeros(k)
    return PcaModel(mean, components, sigma, ratio)


def _vector(e) -> np.ndarray:
    if isinstance(e, StyleEmbedding):
        return e.values
    return np.asarray(e, dtype=np.float64)


def project(model: PcaModel, e) -> np.ndarray:
    v = _vector(e)
    if v.shape[-1] != model.dimension:
        raise PcaError(f"dimension mismatch: embedding has {v.shape[-1]}, model expects {model.dimension}")
    return (v - model.mean) @ model.components.T


def inverse_project(model: PcaModel, score) -> np.ndarray:
    score = np.asarray(score, dtype=np.float64)
    if score.shape[-1] != model.k:
        raise PcaError(f"score length {score.shape[-1]} does not match K={model.k}")
    return model.mean + score @ model.components


def pearson(x: np.ndarray, y: np.ndarray) -> float | None:
    x = x - x.mean()
    y = y - y.mean()
    sx = np.sqrt(np.dot(x, x))
    sy = np.sqrt(np.dot(y, y))
    if sx == 0.0 or sy == 0.0:
        return None
    return float(np.clip(np.dot(x, y) / (sx * sy), -1.0, 1.0))


def correlate_components(
    model: PcaModel, pairs: Sequence[tuple[StyleEmbedding, float]]
) -> list[ComponentCorrelation]:
    if len(pairs) < 3:
        raise PcaError(f"need at least 3 labeled embeddings, got {len(pairs)}")
    attr = np.array([float(v) for _, v in pairs])
    if np.ptp(attr) == 0.0:
        raise PcaError("attribute has zero variance")
    scores = project(model, np.stack([_vector(e) for e, _ in pairs]))
    # Scores that are pure rounding noise count as zero variance.
    scale = max(float(np.max(np.abs(scores))), 1.0) * 1e-12
    out = []
    for k in range(model.k):
        col = scores[:, k]
        r = pearson(col, attr) if np.ptp(col) > scale else None
        out.append(ComponentCorrelation(k, r, len(pairs)))
    return out


def save_pca(model: PcaModel, path) -> None:
    parts = [
        PCAM_MAGIC,
        struct.pack("<II", model.k, model.dimension),
        model.mean.astype("<f8").tobytes(),
        model.sigma.astype("<f8").tobytes(),
        model.explained_variance_ratio.astype("<f8").tobytes(),
        model.components.astype("<f8").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_pca(path) -> PcaModel:
    data = Path(path).read_bytes()
    if data[:4] != PCAM_MAGIC:
        raise FormatError(f"{path}: bad magic")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    k, d = struct.unpack_from("<II", data, 4)
    expected = 12 + 8 * (d + 2 * k + k * d)
    if len(data) < expected:
        raise FormatError(f"{path}: truncated payload")
    if len(data) > expected:
        raise FormatError(f"{path}: {len(data) - expected} trailing bytes")
    flat = np.frombuffer(data, dtype="<f8", offset=12).astype(np.float64)
    mean, rest = flat[:d], flat[d:]
    sigma, rest = rest[:k], rest[k:]
    ratio, rest = rest[:k], rest[k:]
    components = rest.reshape(k, d)
    model = PcaModel(mean, components, sigma, ratio)
    if not np.all(np.isfinite(flat)):
        raise FormatError(f"{path}: non-finite values")
    if model.orthonormality_error() > ORTHONORMAL_TOL_LOAD:
        raise FormatError(f"{path}: orthonormality violated ({model.orthonormality_error():.3g})")
    if np.any(sigma < 0) or np.any(np.diff(sigma) > 0):
        raise FormatError(f"{path}: sigma must be non-negative and non-increasing")
    return model
