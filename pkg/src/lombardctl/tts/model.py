"""Desk-scale flow-matching vector field with FiLM style conditioning.

Everything is plain numpy with hand-written backward passes. Parameters live in
flat ``dict[str, ndarray]`` maps so checkpoints and optimizers can treat them
uniformly.

Vector field, per frame::

    h0 = [x_t | cond | text_emb[char]] @ W_in + b_in + time_proj(phi(t))
    h_{i+1} = h_i + W2 tanh(W1 h_i + b1) + b2
    h_{i+1} = gamma_i(e) * h_{i+1} + beta_i(e)       (blocks >= freeze_boundary)
    v = h_B @ W_out + b_out

with gamma_i(e) = 1 + e @ Wg + bg and beta_i(e) = e @ Wb + bb.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import TTSError

Params = dict


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 8
    hidden: int = 64
    text_dim: int = 16
    time_dim: int = 16
    style_dim: int = 16
    encoder_hidden: int = 16
    blocks: int = 4
    freeze_boundary: int = 2
    vocab: int = 29

    def __post_init__(self):
        if self.time_dim % 2:
            raise TTSError("time_dim must be even")
        if not 0 <= self.freeze_boundary <= self.blocks:
            raise TTSError("freeze_boundary must lie in [0, blocks]")

    @property
    def input_dim(self) -> int:
        return 2 * self.channels + self.text_dim


def _glorot(rng, fan_in, fan_out):
    return rng.standard_normal((fan_in, fan_out)) * np.sqrt(1.0 / fan_in)


def init_vector_field(cfg: ModelConfig, rng: np.random.Generator) -> Params:
    p = {
        "text.embedding": rng.standard_normal((cfg.vocab, cfg.text_dim)) * 0.5,
        "input.weight": _glorot(rng, cfg.input_dim, cfg.hidden),
        "input.bias": np.zeros(cfg.hidden),
        "time.weight": _glorot(rng, cfg.time_dim, cfg.hidden),
        "time.bias": np.zeros(cfg.hidden),
    }
    for i in range(cfg.blocks):
        p[f"blocks.{i}.fc1.weight"] = _glorot(rng, cfg.hidden, cfg.hidden)
        p[f"blocks.{i}.fc1.bias"] = np.zeros(cfg.hidden)
        p[f"blocks.{i}.fc2.weight"] = _glorot(rng, cfg.hidden, cfg.hidden) * 0.5
        p[f"blocks.{i}.fc2.bias"] = np.zeros(cfg.hidden)
    p["output.weight"] = _glorot(rng, cfg.hidden, cfg.channels)
    p["output.bias"] = np.zeros(cfg.channels)
    return p


def film_keys(i: int) -> tuple[str, str, str, str]:
    base = f"blocks.{i}.film"
    return (f"{base}.gamma.weight", f"{base}.gamma.bias", f"{base}.beta.weight", f"{base}.beta.bias")


def has_film(params: Params, i: int) -> bool:
    return film_keys(i)[0] in params


def add_film_heads(params: Params, cfg: ModelConfig) -> Params:
    """Return a copy with zero-initialised FiLM heads on blocks >= freeze_boundary.

    Zero weights give gamma = 1 and beta = 0 for every style input, so the
    extended model reproduces the original exactly.
    """
    out = dict(params)
    for i in range(cfg.freeze_boundary, cfg.blocks):
        gw, gb, bw, bb = film_keys(i)
        out[gw] = np.zeros((cfg.style_dim, cfg.hidden))
        out[gb] = np.zeros(cfg.hidden)
        out[bw] = np.zeros((cfg.style_dim, cfg.hidden))
        out[bb] = np.zeros(cfg.hidden)
    return out


def frozen_keys(params: Params, cfg: ModelConfig) -> list[str]:
    prefixes = tuple(f"blocks.{i}." for i in range(cfg.freeze_boundary))
    return sorted(k for k in params if k.startswith(prefixes))


def film_apply(block_output, gamma, beta) -> np.ndarray:
    """Feature-wise affine modulation: ``gamma[c] * x[..., c] + beta[c]``.

    ``block_output`` is (T, C) or (N, T, C); gamma/beta are (C,) or (N, C).
    """
    x = np.asarray(block_output, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if gamma.shape != beta.shape or gamma.shape[-1] != x.shape[-1]:
        raise TTSError(f"FiLM shape mismatch: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    if gamma.ndim == 2:
        if x.ndim != 3 or gamma.shape[0] != x.shape[0]:
            raise TTSError(f"FiLM batch mismatch: x {x.shape}, gamma {gamma.shape}")
        return gamma[:, None, :] * x + beta[:, None, :]
    return gamma * x + beta


def time_features(t, dim: int) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = np.pi * np.arange(1, dim // 2 + 1)
    ang = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


@dataclass
class _Cache:
    inputs: np.ndarray
    chars: np.ndarray
    tfeat: np.ndarray
    style: np.ndarray | None
    hs: list = field(default_factory=list)  # block inputs
    acts: list = field(default_factory=list)  # tanh activations
    pre_film: list = field(default_factory=list)  # residual outputs before FiLM
    gammas: list = field(default_factory=list)
    final: np.ndarray | None = None


def vf_forward(params: Params, cfg: ModelConfig, xt, cond, chars, t, style=None):
    """Batched forward pass. Shapes: xt/cond (N,T,C), chars (N,T), t (N,), style (N,D)."""
    xt = np.asarray(xt, dtype=np.float64)
    if xt.ndim != 3 or xt.shape[-1] != cfg.channels:
        raise TTSError(f"expected x_t of shape (N, T, {cfg.channels}), got {xt.shape}")
    chars = np.asarray(chars, dtype=np.int64)
    text = params["text.embedding"][chars]
    inputs = np.concatenate([xt, cond, text], axis=-1)
    tfeat = time_features(t, cfg.time_dim)
    h = inputs @ params["input.weight"] + params["input.bias"]
    h = h + (tfeat @ params["time.weight"] + params["time.bias"])[:, None, :]
    cache = _Cache(inputs, chars, tfeat, style)
    for i in range(cfg.blocks):
        cache.hs.append(h)
        a = np.tanh(h @ params[f"blocks.{i}.fc1.weight"] + params[f"blocks.{i}.fc1.bias"])
        cache.acts.append(a)
        y = h + a @ params[f"blocks.{i}.fc2.weight"] + params[f"blocks.{i}.fc2.bias"]
        if has_film(params, i):
            if style is None:
                raise TTSError("model has FiLM heads but no style embedding was given")
            gw, gb, bw, bb = film_keys(i)
            gamma = 1.0 + style @ params[gw] + params[gb]
            beta = style @ params[bw] + params[bb]
            cache.pre_film.append(y)
            cache.gammas.append(gamma)
            y = film_apply(y, gamma, beta)
        else:
            cache.pre_film.append(None)
            cache.gammas.append(None)
        h = y
    cache.final = h
    v = h @ params["output.weight"] + params["output.bias"]
    return v, cache


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def vf_backward(params: Params, cfg: ModelConfig, cache: _Cache, dv):
    """Gradients of a scalar loss w.r.t. every parameter, given dL/dv.

    Returns ``(grads, d_style)``; ``d_style`` is None when no FiLM head is present.
    """
    g = {}
    g["output.weight"] = _flat(cache.final).T @ _flat(dv)
    g["output.bias"] = dv.sum(axis=(0, 1))
    dh = dv @ params["output.weight"].T
    d_style = None
    for i in reversed(range(cfg.blocks)):
        if cache.gammas[i] is not None:
            gw, gb, bw, bb = film_keys(i)
            y = cache.pre_film[i]
            dgamma = np.einsum("ntc,ntc->nc", dh, y)
            dbeta = dh.sum(axis=1)
            g[gw] = cache.style.T @ dgamma
            g[gb] = dgamma.sum(axis=0)
            g[bw] = cache.style.T @ dbeta
            g[bb] = dbeta.sum(axis=0)
            ds = dgamma @ params[gw].T + dbeta @ params[bw].T
            d_style = ds if d_style is None else d_style + ds
            dh = dh * cache.gammas[i][:, None, :]
        h, a = cache.hs[i], cache.acts[i]
        g[f"blocks.{i}.fc2.weight"] = _flat(a).T @ _flat(dh)
        g[f"blocks.{i}.fc2.bias"] = dh.sum(axis=(0, 1))
        du = (dh @ params[f"blocks.{i}.fc2.weight"].T) * (1.0 - a * a)
        g[f"blocks.{i}.fc1.weight"] = _flat(h).T @ _flat(du)
        g[f"blocks.{i}.fc1.bias"] = du.sum(axis=(0, 1))
        dh = dh + du @ params[f"blocks.{i}.fc1.weight"].T
    g["time.weight"] = cache.tfeat.T @ dh.sum(axis=1)
    g["time.bias"] = dh.sum(axis=(0, 1))
    g["input.weight"] = _flat(cache.inputs).T @ _flat(dh)
    g["input.bias"] = dh.sum(axis=(0, 1))
    dinputs = dh @ params["input.weight"].T
    dtext = dinputs[..., 2 * cfg.channels:]
    demb = np.zeros_like(params["text.embedding"])
    np.add.at(demb, cache.chars.reshape(-1), _flat(dtext))
    g["text.embedding"] = demb
    return g, d_style


# -- style encoder ----------------------------------------------------------

def init_style_encoder(cfg: ModelConfig, rng: np.random.Generator) -> Params:
    return {
        "encoder.frame.weight": _glorot(rng, cfg.channels, cfg.encoder_hidden),
        "encoder.frame.bias": np.zeros(cfg.encoder_hidden),
        "encoder.pool.weight": _glorot(rng, 2 * cfg.encoder_hidden, cfg.style_dim),
        "encoder.pool.bias": np.zeros(cfg.style_dim),
    }


def statistics_pool(z: np.ndarray):
    """Concatenate mean and unbiased std over the time axis (axis -2).

    Frames are sorted per channel first so the result does not depend on
    summation order, and offset by the smallest frame so a constant channel
    gets a std of exactly zero.
    """
    T = z.shape[-2]
    zs = np.sort(z, axis=-2)
    d = zs - zs[..., :1, :]
    dmean = d.mean(axis=-2)
    var = ((d - dmean[..., None, :]) ** 2).sum(axis=-2) / (T - 1)
    mean = zs[..., 0, :] + dmean
    std = np.sqrt(var)
    return np.concatenate([mean, std], axis=-1), mean, std


def encoder_forward(enc: Params, mel):
    mel = np.asarray(mel, dtype=np.float64)
    if mel.shape[-2] < 2:
        raise TTSError("style encoder needs at least 2 frames")
    z = mel @ enc["encoder.frame.weight"] + enc["encoder.frame.bias"]
    pooled, mean, std = statistics_pool(z)
    e = pooled @ enc["encoder.pool.weight"] + enc["encoder.pool.bias"]
    return e, (mel, z, pooled, mean, std)


def encoder_backward(enc: Params, cache, de):
    mel, z, pooled, mean, std = cache
    T = z.shape[-2]
    S = mean.shape[-1]
    g = {
        "encoder.pool.weight": _flat(pooled).T @ _flat(de),
        "encoder.pool.bias": _flat(de).sum(axis=0),
    }
    dpooled = de @ enc["encoder.pool.weight"].T
    dmean, dstd = dpooled[..., :S], dpooled[..., S:]
    dvar = np.divide(dstd, 2.0 * std, out=np.zeros_like(std), where=std > 0)
    dz = dmean[..., None, :] / T + dvar[..., None, :] * 2.0 * (z - mean[..., None, :]) / (T - 1)
    g["encoder.frame.weight"] = _flat(mel).T @ _flat(dz)
    g["encoder.frame.bias"] = _flat(dz).sum(axis=0)
    return g


def encode_style(enc: Params, mel) -> np.ndarray:
    """Style vector for one (T, C) mel; invariant to frame order."""
    mel = np.asarray(mel, dtype=np.float64)
    if mel.ndim != 2:
        raise TTSError(f"expected a (T, C) mel, got shape {mel.shape}")
    return encoder_forward(enc, mel)[0]


# -- loss -------------------------------------------------------------------

def masked_mse(pred, target, mask):
    """Mean squared error over masked frames; returns (loss, dL/dpred)."""
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum()) * pred.shape[-1]
    if count == 0:
        raise TTSError("mask selects no frames")
    diff = (pred - target) * mask[..., None]
    loss = float(np.sum(diff * diff) / count)
    return loss, 2.0 * diff / count


def cfm_loss(params: Params, cfg: ModelConfig, x1, cond, chars, style, mask, x0, t,
             grads: bool = False, predictor=None):
    """Conditional flow-matching loss on the linear path.

    x_t = (1 - t) x0 + t x1, target velocity x1 - x0, MSE over masked frames.
    ``predictor(xt, t)`` overrides the vector field (used for oracle checks).
    With ``grads=True`` returns ``(loss, grads, d_style)``.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any((t <= 0) | (t >= 1)):
        raise TTSError("t must lie in (0, 1)")
    if x1.shape != x0.shape:
        raise TTSError(f"x0 {x0.shape} and x1 {x1.shape} differ")
    xt = (1.0 - t)[:, None, None] * x0 + t[:, None, None] * x1
    target = x1 - x0
    if predictor is not None:
        loss, _ = masked_mse(predictor(xt, t), target, mask)
        return loss
    v, cache = vf_forward(params, cfg, xt, cond, chars, t, style)
    loss, dv = masked_mse(v, target, mask)
    if not grads:
        return loss
    g, d_style = vf_backward(params, cfg, cache, dv)
    return loss, g, d_style


@dataclass
class TTSModel:
    config: ModelConfig
    field: Params
    encoder: Params | None = None

    @property
    def conditioned(self) -> bool:
        return any(has_film(self.field, i) for i in range(self.config.blocks))

    def velocity(self, x, t, cond, chars, style=None) -> np.ndarray:
        """Single-utterance field evaluation; x/cond (T, C), chars (T,)."""
        n = np.full(1, t, dtype=np.float64)
        s = None if style is None else np.asarray(style, dtype=np.float64)[None, :]
        v, _ = vf_forward(self.field, self.config, x[None], cond[None], np.asarray(chars)[None], n, s)
        return v[0]

    def with_config(self, **changes) -> "TTSModel":
        return replace(self, config=replace(self.config, **changes))
