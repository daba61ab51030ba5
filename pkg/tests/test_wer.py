import pytest
from hypothesis import given
from hypothesis import strategies as st

from lombardctl.errors import EvalError
from lombardctl.evaluation.wer import align_counts, normalize, relative_wer, word_error_rate
from oracles import all_sequences, brute_force_alignments


def test_examples():
    assert word_error_rate("the cat sat", "the cat sat").wer == 0.0
    r = word_error_rate("the cat sat", "the cat")
    assert (r.substitutions, r.deletions, r.insertions) == (0, 1, 0)
    assert r.wer == pytest.approx(1 / 3)
    r = word_error_rate("a b", "b a")
    assert r.errors == 2 and r.wer == 1.0
    assert r.substitutions == 2


def test_substitution_preferred_over_delete_insert():
    assert align_counts(["x"], ["y"]) == (1, 0, 0)


def test_normalization():
    assert normalize("Hello, World!  it's") == ["hello", "world", "its"]
    assert word_error_rate("Hello, world.", "hello WORLD").wer == 0.0


def test_empty_reference():
    with pytest.raises(EvalError):
        word_error_rate(" ?! ", "a")
    assert word_error_rate("a b", "").deletions == 2


def test_matches_brute_force_short():
    for n in range(0, 4):
        for m in range(0, 4):
            refs, hyps = all_sequences(n), all_sequences(m)
            S, D, I = brute_force_alignments(refs, hyps)
            for a, ref in enumerate(refs):
                for b, hyp in enumerate(hyps):
                    assert align_counts(list(ref), list(hyp)) == (S[a, b], D[a, b], I[a, b])


@given(st.lists(st.sampled_from("abc"), max_size=8), st.lists(st.sampled_from("abc"), max_size=8))
def test_counts_consistent(ref, hyp):
    s, d, i = align_counts(ref, hyp)
    assert len(ref) - d + i == len(hyp)
    assert s + d + i <= max(len(ref), len(hyp))
    assert (s + d + i == 0) == (ref == hyp)


def test_relative_wer():
    assert round(relative_wer(12.11, 8.52), 2) == 1.42
    assert round(relative_wer(12.81, 7.23), 2) == 1.77
    assert relative_wer(3.3, 3.3) == 1.0
    assert relative_wer(5.0, 0.0) is None
    with pytest.raises(EvalError):
        relative_wer(-1.0, 2.0)


@given(st.floats(0, 100), st.floats(0.01, 100), st.floats(0.01, 100))
def test_relative_wer_scale_invariant(a, b, k):
    assert relative_wer(k * a, k * b) == pytest.approx(relative_wer(a, b), rel=1e-12, abs=1e-12)
