"""Deterministic stand-ins for an ASR system and a speaker-verification embedder.

Used by the demo pipeline and the tests through the same command-template
interface as real tools::

    python -m lombardctl.stubs asr WAV TRANSCRIPT [--drop-rate P]
    python -m lombardctl.stubs embed WAV

The ASR stub echoes the reference transcript and deletes words with a
probability that grows as the estimated SNR of the audio falls. The SNR is
estimated from how much spectral energy sits on the harmonic grid used by
``render_waveform``. Decisions are keyed by a hash of the audio bytes, so the
same file always yields the same hypothesis.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from .evaluation.audio import read_wav

HARMONIC_HZ = 250.0


def estimate_snr_db(samples: np.ndarray, rate: int, base_hz: float = HARMONIC_HZ) -> float:
    spec = np.abs(np.fft.rfft(samples)) ** 2
    freqs = np.fft.rfftfreq(samples.size, 1.0 / rate)
    harmonic = np.abs(freqs / base_hz - np.round(freqs / base_hz)) * base_hz < 4.0
    harmonic &= freqs > base_hz / 2
    if not harmonic.any() or harmonic.all():
        return 60.0
    on, off = spec[harmonic], spec[~harmonic]
    noise_density = off.mean()
    noise = noise_density * spec.size
    signal = max(on.sum() - noise_density * on.size, 1e-20)
    return float(10.0 * np.log10(signal / max(noise, 1e-20)))


def word_drop_probability(snr: float, base: float) -> float:
    return float(min(0.9, base + 0.6 * 10.0 ** (-snr / 10.0)))


def stub_transcribe(wav: Path, transcript: Path, drop_rate: float = 0.03) -> str:
    samples, rate = read_wav(wav)
    words = transcript.read_text(encoding="utf-8").split()
    if drop_rate <= 0:
        return " ".join(words)
    p = word_drop_probability(estimate_snr_db(samples, rate), drop_rate)
    digest = hashlib.sha256(Path(wav).read_bytes()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    keep = rng.uniform(size=len(words)) >= p
    return " ".join(w for w, k in zip(words, keep) if k)


def stub_embed(wav: Path, bands: int = 8, frame: int = 320) -> np.ndarray:
    """Mean and std over frames of log energy at the first ``bands`` harmonics."""
    samples, rate = read_wav(wav)
    n = samples.size // frame
    if n < 2:
        raise ValueError("audio too short to embed")
    frames = samples[: n * frame].reshape(n, frame) * np.hanning(frame)
    spec = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    freqs = np.fft.rfftfreq(frame, 1.0 / rate)
    idx = [int(np.argmin(np.abs(freqs - (b + 1) * HARMONIC_HZ))) for b in range(bands)]
    loge = np.log(spec[:, idx] + 1e-10)
    return np.concatenate([loge.mean(axis=0), loge.std(axis=0)])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="python -m lombardctl.stubs")
    sub = parser.add_subparsers(dest="cmd", required=True)
    asr = sub.add_parser("asr")
    asr.add_argument("wav", type=Path)
    asr.add_argument("transcript", type=Path)
    asr.add_argument("--drop-rate", type=float, default=0.03)
    asr.add_argument("--fail", action="store_true", help="exit non-zero (failure injection)")
    emb = sub.add_parser("embed")
    emb.add_argument("wav", type=Path)
    args = parser.parse_args(argv)
    if args.cmd == "asr":
        if args.fail:
            print("stub asr: injected failure", file=sys.stderr)
            return 1
        print(stub_transcribe(args.wav, args.transcript, args.drop_rate))
    else:
        print(" ".join(format(x, ".9g") for x in stub_embed(args.wav)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
