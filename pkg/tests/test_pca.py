import math

import numpy as np
import pytest

from lombardctl.embeddings import EmbeddingCorpus, StyleEmbedding
from lombardctl.errors import FormatError, PcaError
from lombardctl.pca import (
    PcaModel,
    correlate_components,
    fit_pca,
    inverse_project,
    load_pca,
    project,
    save_pca,
)
from oracles import covariance, jacobi_eigh


def test_hand_example_collinear():
    model = fit_pca(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))
    np.testing.assert_allclose(model.mean, [2.0, 2.0], atol=1e-12)
    np.testing.assert_allclose(model.components[0], [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-12)
    np.testing.assert_allclose(model.sigma, [math.sqrt(2), 0.0], atol=1e-12)
    np.testing.assert_allclose(model.explained_variance_ratio, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(project(model, [3.0, 3.0])[0], math.sqrt(2), atol=1e-12)


def test_hand_example_axis_aligned():
    # Scores along x are (-2, 0, 2) and along y (-1, 0, 1) after centering.
    model = fit_pca(np.array([[0.0, 4.0], [2.0, 5.0], [4.0, 6.0], [2.0, 5.0]]), k=1)
    np.testing.assert_allclose(model.mean, [2.0, 5.0])
    expected_dir = np.array([2.0, 1.0]) / math.sqrt(5)
    np.testing.assert_allclose(model.components[0], expected_dir, atol=1e-12)
    np.testing.assert_allclose(model.sigma[0], math.sqrt(10 / 3), atol=1e-12)


def _random_corpus(rng):
    n = int(rng.integers(2, 13))
    d = int(rng.integers(1, 7))
    return rng.standard_normal((n, d)) * rng.uniform(0.1, 3.0, size=d) + rng.standard_normal(d)


def test_matches_jacobi_oracle(rng):
    for _ in range(40):
        x = _random_corpus(rng)
        model = fit_pca(x)
        vals, vecs = jacobi_eigh(covariance(x))
        k = model.k
        np.testing.assert_allclose(model.sigma**2, vals[:k], atol=1e-8)
        for i in range(k):
            # Only compare directions for well-separated eigenvalues.
            gaps = np.abs(vals - vals[i])
            gaps[i] = np.inf
            if gaps.min() < 1e-6 or vals[i] < 1e-10:
                continue
            v = vecs[i] * np.sign(vecs[i] @ model.components[i])
            np.testing.assert_allclose(model.components[i], v, atol=1e-8)


def test_invariants(rng):
    for _ in range(30):
        x = _random_corpus(rng)
        model = fit_pca(x)
        assert model.k == min(x.shape[0] - 1, x.shape[1])
        assert model.orthonormality_error() < 1e-10
        assert np.all(np.diff(model.sigma) <= 1e-12)
        assert np.all(model.sigma >= 0)
        assert model.explained_variance_ratio.sum() <= 1 + 1e-12
        scores = project(model, x)
        np.testing.assert_allclose(scores.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(scores.std(axis=0, ddof=1), model.sigma, atol=1e-9)


def test_full_rank_roundtrip_is_identity(rng):
    x = rng.standard_normal((8, 4))
    model = fit_pca(x)
    assert model.k == 4
    np.testing.assert_allclose(inverse_project(model, project(model, x)), x, atol=1e-12)


def test_sign_convention_largest_entry_positive(rng):
    model = fit_pca(rng.standard_normal((10, 5)))
    for row in model.components:
        j = int(np.argmax(np.abs(row)))
        assert row[j] > 0


def test_sign_tie_uses_lowest_index():
    # Direction (-1, 1)/sqrt2 has equal magnitudes, so the first entry must become positive.
    model = fit_pca(np.array([[1.0, -1.0], [-1.0, 1.0], [0.0, 0.0]]), k=1)
    assert model.components[0, 0] > 0
    assert model.components[0, 1] < 0


def test_fit_accepts_corpus():
    corpus = EmbeddingCorpus.from_arrays(["a", "b", "c"], [[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    assert fit_pca(corpus).k == 2


@pytest.mark.parametrize("k", [0, 3, "all", 1.5, True])
def test_fit_rejects_bad_k(k):
    with pytest.raises(PcaError):
        fit_pca(np.arange(6.0).reshape(3, 2) ** 2, k=k)


def test_fit_rejects_single_row():
    with pytest.raises(PcaError):
        fit_pca(np.array([[1.0, 2.0]]))


def test_project_dimension_mismatch():
    model = fit_pca(np.eye(3))
    with pytest.raises(PcaError, match="dimension"):
        project(model, [1.0, 2.0])
    with pytest.raises(PcaError):
        inverse_project(model, [1.0, 2.0, 3.0])


def test_pcam_roundtrip_bitwise(tmp_path, rng):
    model = fit_pca(rng.standard_normal((9, 4)), k=3)
    save_pca(model, tmp_path / "m.pcam")
    data = (tmp_path / "m.pcam").read_bytes()
    assert len(data) == 12 + 8 * (4 + 3 + 3 + 12)
    back = load_pca(tmp_path / "m.pcam")
    for name in ("mean", "components", "sigma", "explained_variance_ratio"):
        assert getattr(back, name).tobytes() == getattr(model, name).tobytes()


def test_pcam_rejects_non_orthonormal(tmp_path):
    bad = PcaModel(np.zeros(2), np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([1.0, 0.5]), np.array([0.5, 0.5]))
    save_pca(bad, tmp_path / "m.pcam")
    with pytest.raises(FormatError, match="orthonormality"):
        load_pca(tmp_path / "m.pcam")


def test_pcam_rejects_increasing_sigma(tmp_path):
    bad = PcaModel(np.zeros(2), np.eye(2), np.array([0.5, 1.0]), np.array([0.2, 0.8]))
    save_pca(bad, tmp_path / "m.pcam")
    with pytest.raises(FormatError, match="sigma"):
        load_pca(tmp_path / "m.pcam")


def test_pcam_truncated_and_magic(tmp_path, rng):
    save_pca(fit_pca(rng.standard_normal((5, 3))), tmp_path / "m.pcam")
    data = (tmp_path / "m.pcam").read_bytes()
    (tmp_path / "t.pcam").write_bytes(data[:-1])
    with pytest.raises(FormatError, match="truncated"):
        load_pca(tmp_path / "t.pcam")
    (tmp_path / "b.pcam").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="magic"):
        load_pca(tmp_path / "b.pcam")


def _pairs(x, attr):
    return [(StyleEmbedding(f"u{i}", row), float(a)) for i, (row, a) in enumerate(zip(x, attr))]


def test_correlate_linear_attribute(rng):
    x = rng.standard_normal((30, 4)) * np.array([5.0, 2.0, 1.0, 0.5])
    model = fit_pca(x)
    scores = project(model, x)
    corr = correlate_components(model, _pairs(x, 3.0 * scores[:, 0] + 1.0))
    assert corr[0].pearson_r == pytest.approx(1.0, abs=1e-12)
    assert all(c.sample_count == 30 for c in corr)
    # Scores are uncorrelated by construction.
    for c in corr[1:]:
        assert abs(c.pearson_r) < 1e-9


def test_correlate_negative_direction(rng):
    x = rng.standard_normal((10, 3))
    model = fit_pca(x)
    corr = correlate_components(model, _pairs(x, -project(model, x)[:, 1]))
    assert corr[1].pearson_r == pytest.approx(-1.0)


def test_correlate_zero_score_variance_is_undefined():
    x = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    model = fit_pca(x)
    corr = correlate_components(model, _pairs(x, [1.0, 2.0, 2.5, 4.0]))
    assert corr[0].defined
    assert not corr[1].defined and corr[1].pearson_r is None


def test_correlate_requires_three_pairs_and_attribute_variance(rng):
    x = rng.standard_normal((4, 2))
    model = fit_pca(x)
    with pytest.raises(PcaError, match="at least 3"):
        correlate_components(model, _pairs(x[:2], [1.0, 2.0]))
    with pytest.raises(PcaError, match="zero variance"):
        correlate_components(model, _pairs(x, [1.0] * 4))
