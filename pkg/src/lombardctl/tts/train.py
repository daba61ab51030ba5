"""Two-stage training: unconditioned pretraining, then FiLM fine-tuning with
the early blocks frozen and the style encoder learned jointly."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TTSError
from .data import FORMANT_LIMITS, SyntheticTask, mask_spans, warp_channels
from .model import (
    ModelConfig,
    TTSModel,
    add_film_heads,
    cfm_loss,
    encoder_backward,
    encoder_forward,
    frozen_keys,
    init_style_encoder,
    init_vector_field,
)

log = logging.getLogger(__name__)

STAGES = ("pretrain", "finetune")


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    stage: str = "pretrain"
    learning_rate: float = 2e-3
    epochs: int = 6
    steps_per_epoch: int = 250
    batch_size: int = 16
    frames: tuple[int, int] = (12, 32)
    mask_ratio: tuple[float, float] = (0.7, 1.0)
    formant_range: tuple[float, float] = (0.8, 1.25)
    euler_steps: int = 32
    grad_clip: float = 1.0
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.seed is None:
            raise TTSError("seed is mandatory")
        if self.stage not in STAGES:
            raise TTSError(f"stage must be one of {STAGES}, got {self.stage!r}")
        lo, hi = self.mask_ratio
        if not 0.0 < lo <= hi <= 1.0:
            raise TTSError(f"mask ratio range {self.mask_ratio} must satisfy 0 < lo <= hi <= 1")
        lo, hi = self.formant_range
        if not FORMANT_LIMITS[0] <= lo <= hi <= FORMANT_LIMITS[1]:
            raise TTSError(f"formant range {self.formant_range} must lie within {FORMANT_LIMITS}")
        if not 2 <= self.frames[0] <= self.frames[1]:
            raise TTSError("frame range must satisfy 2 <= lo <= hi")
        if self.epochs < 0 or self.steps_per_epoch < 0 or self.batch_size < 1:
            raise TTSError("epochs/steps must be >= 0 and batch_size >= 1")
        if not self.learning_rate > 0 or self.euler_steps < 1:
            raise TTSError("learning_rate must be positive and euler_steps >= 1")


def shipped_configs(seed: int = 7) -> tuple[TrainConfig, TrainConfig]:
    """The reference pretrain / finetune pair used by the acceptance suite."""
    pre = TrainConfig(seed=seed, stage="pretrain", epochs=4, steps_per_epoch=250)
    fine = TrainConfig(seed=seed + 1, stage="finetune", epochs=8, steps_per_epoch=250)
    return pre, fine


def demo_configs(seed: int = 7) -> tuple[TrainConfig, TrainConfig]:
    """A faster pair for the end-to-end demo pipeline."""
    pre = TrainConfig(seed=seed, stage="pretrain", epochs=2, steps_per_epoch=150)
    fine = TrainConfig(seed=seed + 1, stage="finetune", epochs=4, steps_per_epoch=150)
    return pre, fine


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float | None = None) -> None:
        self.t += 1
        lr = self.lr if lr is None else lr
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            params[k] = params[k] - lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    model: TTSModel
    losses: list[float]
    steps_per_epoch: int

    def smoothed(self, window: int = 10) -> np.ndarray:
        x = np.asarray(self.losses)
        if x.size < window:
            return x.copy()
        return np.convolve(x, np.ones(window) / window, mode="valid")

    def epoch_smoothed(self, window: int = 10) -> list[float]:
        """Smoothed loss at the end of each epoch."""
        x = np.asarray(self.losses)
        out = []
        for end in range(self.steps_per_epoch, x.size + 1, self.steps_per_epoch):
            out.append(float(x[max(0, end - window):end].mean()))
        return out


def _to_f32_precision(params: dict) -> dict:
    return {k: v.astype(np.float32).astype(np.float64) for k, v in params.items()}


def _clip(grads: dict, limit: float) -> float:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if limit > 0 and norm > limit:
        scale = limit / norm
        for k in grads:
            grads[k] = grads[k] * scale
    return norm


def train(config: TrainConfig, task: SyntheticTask | None = None,
          checkpoint: TTSModel | None = None) -> TrainResult:
    """Train one stage on the synthetic task; deterministic per ``config.seed``.

    Fine-tuning requires ``checkpoint`` (a pretrained model). Its first
    ``freeze_boundary`` blocks are excluded from every update.
    """
    task = task or SyntheticTask(channels=config.model.channels)
    if task.channels != config.model.channels:
        raise TTSError("task and model channel counts differ")
    rng = np.random.default_rng(config.seed)
    cfg = config.model

    if config.stage == "pretrain":
        field_params = init_vector_field(cfg, rng)
        encoder = None
        frozen: set[str] = set()
    else:
        if checkpoint is None:
            raise TTSError("finetune stage needs a pretrained checkpoint")
        if checkpoint.conditioned:
            raise TTSError("checkpoint already carries FiLM heads")
        cfg = checkpoint.config
        field_params = add_film_heads(checkpoint.field, cfg)
        encoder = init_style_encoder(cfg, rng)
        frozen = set(frozen_keys(field_params, cfg))

    params = dict(field_params)
    if encoder is not None:
        params.update(encoder)
    opt = Adam(config.learning_rate)
    total = config.epochs * config.steps_per_epoch
    losses: list[float] = []

    for step in range(total):
        T = int(rng.integers(config.frames[0], config.frames[1] + 1))
        x1, chars, ref, _, _ = task.sample(rng, config.batch_size, T)
        masks = np.stack([mask_spans(T, rng.uniform(*config.mask_ratio), rng) for _ in range(config.batch_size)])
        cond = x1 * (~masks)[..., None]
        lo, hi = config.formant_range
        if hi > lo:
            cond = np.stack([warp_channels(c, rng.uniform(lo, hi)) for c in cond])
        x0 = rng.standard_normal(x1.shape)
        t = np.clip(rng.uniform(0.0, 1.0, config.batch_size), 1e-4, 1.0 - 1e-4)

        field_view = {k: params[k] for k in field_params}
        style = enc_cache = None
        if encoder is not None:
            enc_view = {k: params[k] for k in encoder}
            style, enc_cache = encoder_forward(enc_view, ref)
        loss, grads, d_style = cfm_loss(field_view, cfg, x1, cond, chars, style, masks, x0, t, grads=True)
        if encoder is not None:
            grads.update(encoder_backward(enc_view, enc_cache, d_style))
        if not math.isfinite(loss):
            raise TTSError(f"non-finite loss at step {step} (T={T}, last finite loss "
                           f"{losses[-1] if losses else 'n/a'})")
        for k in frozen:
            grads.pop(k, None)
        _clip(grads, config.grad_clip)
        lr = config.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + math.cos(math.pi * step / max(total, 1))))
        opt.step(params, grads, lr)
        losses.append(loss)
        if config.steps_per_epoch and (step + 1) % config.steps_per_epoch == 0:
            log.info("%s epoch %d: loss %.4f", config.stage, (step + 1) // config.steps_per_epoch,
                     float(np.mean(losses[-10:])))

    params = _to_f32_precision(params)
    if checkpoint is not None:
        for k in frozen:
            params[k] = checkpoint.field[k]
    model = TTSModel(
        cfg,
        {k: params[k] for k in field_params},
        None if encoder is None else {k: params[k] for k in encoder},
    )
    return TrainResult(model, losses, config.steps_per_epoch)
