"""Batch evaluation over a manifest, calling external ASR / embedding commands."""

from __future__ import annotations

import csv
import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import EvalError, FormatError
from .audio import CLEAN, SnrSpec, mix_at_snr, noise_label, read_wav, white_noise, write_wav
from .report import EvalRecord
from .similarity import cosine_similarity
from .wer import word_error_rate

log = logging.getLogger(__name__)

NORMAL_LEVEL = "normal"


class ExternalCommandError(EvalError):
    pass


@dataclass(frozen=True)
class ManifestRow:
    id: str
    level: str
    system: str = "tts"
    wav: Path | None = None
    transcript: Path | None = None
    reference_wav: Path | None = None
    noise: str | None = None
    wer: float | None = None  # precomputed, percent

    @property
    def precomputed(self) -> bool:
        return self.wer is not None


def read_manifest(path) -> list[ManifestRow]:
    path = Path(path)
    base = path.parent
    try:
        fh = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise FormatError(f"cannot read manifest {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or ())
        if not {"id", "level"} <= cols:
            raise FormatError(f"{path}: manifest needs at least id and level columns")
        rows = []
        for rowno, raw in enumerate(reader, start=2):
            def opt_path(key):
                value = (raw.get(key) or "").strip()
                return (base / value) if value else None

            wer_raw = (raw.get("wer") or "").strip()
            noise_raw = (raw.get("noise") or "").strip()
            try:
                wer = float(wer_raw) if wer_raw else None
                noise = noise_label(SnrSpec.parse(noise_raw)) if noise_raw else None
            except ValueError as exc:
                raise FormatError(f"{path}: row {rowno}: {exc}") from None
            row = ManifestRow(
                id=raw["id"].strip(), level=raw["level"].strip(),
                system=(raw.get("system") or "tts").strip(),
                wav=opt_path("wav"), transcript=opt_path("transcript"),
                reference_wav=opt_path("reference_wav"), noise=noise, wer=wer,
            )
            if row.precomputed and row.noise is None:
                raise FormatError(f"{path}: row {rowno}: precomputed wer needs a noise column")
            if not row.precomputed and (row.wav is None or row.transcript is None):
                raise FormatError(f"{path}: row {rowno}: needs wav and transcript (or a precomputed wer)")
            rows.append(row)
    if not rows:
        raise FormatError(f"{path}: manifest has no rows")
    return rows


def run_command(template: str, timeout: float = 120.0, **values) -> str:
    """Run a command template with ``{name}`` placeholders; returns stdout."""
    argv = [arg.format(**{k: str(v) for k, v in values.items()}) for arg in shlex.split(template)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout, check=False)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ExternalCommandError(f"{argv[0]}: {exc}") from None
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-1:] or [""]
        raise ExternalCommandError(f"{argv[0]} exited with {proc.returncode}: {tail[0]}")
    return proc.stdout


def parse_vector(text: str) -> np.ndarray:
    values = [float(x) for x in text.replace(",", " ").split()]
    if not values:
        raise ExternalCommandError("embedder printed no values")
    return np.array(values)


@dataclass
class Evaluator:
    transcriber: str | None
    out_dir: Path
    noise_levels: Sequence[str] = (CLEAN, "10", "5", "1")
    noise_wav: Path | None = None
    embedder: str | None = None
    seed: int = 0
    jobs: int = 1

    def _noise(self, rate: int, length: int) -> np.ndarray:
        if self.noise_wav is None:
            return white_noise(max(length, rate), self.seed)
        noise, noise_rate = read_wav(self.noise_wav)
        if noise_rate != rate:
            raise EvalError(f"sample-rate mismatch: noise {noise_rate} Hz, speech {rate} Hz")
        return noise

    def _transcribe_row(self, index: int, row: ManifestRow) -> list[EvalRecord]:
        if row.precomputed:
            return [EvalRecord(row.id, row.level, row.noise, wer=row.wer, system=row.system)]
        reference = row.transcript.read_text(encoding="utf-8")
        clean, rate = read_wav(row.wav)
        noise = None
        records = []
        mixed_dir = self.out_dir / "mixed"
        for j, label in enumerate(self.noise_levels):
            spec = SnrSpec.parse(label, seed=self.seed + 1000 * index + j)
            tag = noise_label(spec)
            try:
                if spec.is_clean:
                    wav_path = row.wav
                else:
                    if noise is None:
                        noise = self._noise(rate, clean.size)
                    wav_path = mixed_dir / f"{row.system}_{row.id}_{row.level}_snr{tag}.wav"
                    write_wav(wav_path, mix_at_snr(clean, noise, spec), rate)
                if self.transcriber is None:
                    raise ExternalCommandError("no transcriber configured")
                hyp = run_command(self.transcriber, wav=wav_path, transcript=row.transcript)
                wer = 100.0 * word_error_rate(reference, hyp).wer
                records.append(EvalRecord(row.id, row.level, tag, wer=wer, system=row.system))
            except (EvalError, OSError) as exc:
                log.warning("row %d (%s/%s, %s): %s", index + 1, row.id, row.level, tag, exc)
                records.append(EvalRecord(row.id, row.level, tag, system=row.system, error=str(exc)))
        return records

    def _embed(self, path: Path):
        try:
            return parse_vector(run_command(self.embedder, wav=path))
        except (EvalError, ValueError) as exc:
            log.warning("embedding %s failed: %s", path, exc)
            return None

    def _similarities(self, rows: Sequence[ManifestRow]) -> dict[int, tuple[float | None, float | None]]:
        audio = [(i, r) for i, r in enumerate(rows) if not r.precomputed]
        paths = list(dict.fromkeys([r.wav for _, r in audio] + [r.reference_wav for _, r in audio if r.reference_wav]))
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            embs = dict(zip(paths, pool.map(self._embed, paths)))
        normals = {(r.system, r.id): r.wav for _, r in audio if r.level == NORMAL_LEVEL}
        out = {}
        for i, r in audio:
            ssim = delta = None
            e = embs.get(r.wav)
            if e is not None and r.reference_wav is not None and embs.get(r.reference_wav) is not None:
                ssim = cosine_similarity(e, embs[r.reference_wav]).percentage
            normal = normals.get((r.system, r.id))
            if e is not None and r.level != NORMAL_LEVEL and normal is not None and embs.get(normal) is not None:
                delta = cosine_similarity(e, embs[normal]).percentage
            out[i] = (ssim, delta)
        return out

    def run(self, rows: Sequence[ManifestRow]) -> list[EvalRecord]:
        """Evaluate every row; results come back in manifest order.

        Raises ExternalCommandError only when every audio row failed.
        """
        (self.out_dir / "mixed").mkdir(parents=True, exist_ok=True)
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            per_row = list(pool.map(self._transcribe_row, range(len(rows)), rows))
        sims = self._similarities(rows) if self.embedder else {}
        records = []
        for i, recs in enumerate(per_row):
            ssim, delta = sims.get(i, (None, None))
            for rec in recs:
                if rec.noise == CLEAN and (ssim is not None or delta is not None):
                    rec = EvalRecord(rec.id, rec.level, rec.noise, rec.wer, ssim, delta, rec.system, rec.error)
                records.append(rec)
        audio = [r for row, recs in zip(rows, per_row) if not row.precomputed for r in recs]
        if audio and all(not r.ok for r in audio):
            raise ExternalCommandError(f"all {len(audio)} audio evaluations failed; first: {audio[0].error}")
        return records
