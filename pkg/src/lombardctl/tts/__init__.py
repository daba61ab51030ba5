"""Desk-scale conditional flow-matching synthesizer."""

from .data import ToyMel, formant_shift_augment, mask_spans
from .model import ModelConfig, TTSModel, cfm_loss, encode_style, film_apply
from .synth import synthesize
from .train import TrainConfig, train

__all__ = [
    "ModelConfig",
    "ToyMel",
    "TTSModel",
    "TrainConfig",
    "cfm_loss",
    "encode_style",
    "film_apply",
    "formant_shift_augment",
    "mask_spans",
    "synthesize",
    "train",
]
