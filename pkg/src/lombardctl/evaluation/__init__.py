"""Objective evaluation: noise mixing, WER, speaker similarity, reports."""

from .audio import SnrSpec, mix_at_snr
from .report import EvalRecord, EvalReport, build_report
from .similarity import SimilarityResult, cosine_similarity, relative_ssim
from .wer import WerResult, relative_wer, word_error_rate

__all__ = [
    "EvalRecord",
    "EvalReport",
    "SimilarityResult",
    "SnrSpec",
    "WerResult",
    "build_report",
    "cosine_similarity",
    "mix_at_snr",
    "relative_ssim",
    "relative_wer",
    "word_error_rate",
]
