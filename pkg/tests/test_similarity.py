import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lombardctl.errors import EvalError
from lombardctl.evaluation.similarity import cosine_similarity, relative_ssim


def test_examples():
    assert cosine_similarity([1.0, 2.0], [1.0, 2.0]).cosine == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 3.0]).cosine == 0.0
    a = [1.0, 0.0]
    b = [math.cos(math.pi / 3), math.sin(math.pi / 3)]
    assert cosine_similarity(a, b).cosine == pytest.approx(0.5, abs=1e-12)


def test_relative_ssim_percentages(rng):
    normal = rng.standard_normal(6)
    assert relative_ssim(normal, normal).percentage == pytest.approx(100.0)
    ortho = np.array([1.0, 0.0, 0.0])
    assert relative_ssim(ortho, [0.0, 2.0, 0.0]).percentage == 0.0
    for eps in (1e-3, 0.1, 0.5):
        u = rng.standard_normal(6)
        u -= (u @ normal) / (normal @ normal) * normal
        u *= eps * np.linalg.norm(normal) / np.linalg.norm(u)
        got = relative_ssim(normal + u, normal).percentage
        assert got == pytest.approx(100 * math.cos(math.atan(eps)), abs=1e-9)


def test_errors():
    with pytest.raises(EvalError):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(EvalError):
        cosine_similarity([1.0], [1.0, 0.0])


vec = st.lists(st.floats(-100, 100), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@given(vec, vec, st.floats(1e-3, 1e3))
def test_scale_invariance_and_bounds(a, b, k):
    c = cosine_similarity(a, b).cosine
    assert abs(c) <= 1.0 + 1e-9
    assert abs(cosine_similarity(np.multiply(k, a), b).cosine - c) <= 1e-12
