"""End-to-end synthetic pipeline: train -> corpora -> PCA -> presets -> synth -> evaluate.

Every step goes through the CLI so the demo doubles as an integration run.
All paths written into artifacts are relative, so two runs with the same seed
give byte-identical trees regardless of where they are written.
"""

from __future__ import annotations

import csv
import shlex
import sys
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingCorpus, load_corpus, save_corpus
from .errors import LombardError
from .evaluation.audio import write_wav
from .style import format_presets, load_presets
from .tts.data import SyntheticTask, pad_symbols, text_to_symbols
from .duration import count_syllables, target_duration
from .tts.synth import render_waveform
from .tts.train import demo_configs, shipped_configs

SENTENCES = (
    "the river runs under the old station",
    "every voice in the garden sounds clear",
    "people listen better when the signal is loud",
)

# Closed-form (loudness, clarity) of the synthetic ground-truth recordings.
LEVEL_STYLE = {"soft": (-1.0, -0.5), "normal": (0.0, 0.0), "loud": (0.5, 0.5), "very_loud": (1.0, 1.0)}


def _run(*argv) -> None:
    from .cli import main

    code = main([str(a) for a in argv])
    if code != 0:
        raise LombardError(f"demo step failed ({code}): lombardctl {' '.join(map(str, argv))}")


def run_demo(out: Path, seed: int, quick: bool = True, speakers: int = 2) -> None:
    out = Path(out)
    for sub in ("models", "corpora", "pca", "style", "synth", "eval_inputs"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    pre, fine = demo_configs(seed) if quick else shipped_configs(seed)
    _run("tts", "train", "--stage", "pretrain", "--seed", pre.seed, "--epochs", pre.epochs,
         "--steps-per-epoch", pre.steps_per_epoch, "--out", out / "models/pretrain.ttts",
         "--losses", out / "models/pretrain_losses.csv")
    _run("tts", "train", "--stage", "finetune", "--seed", fine.seed, "--epochs", fine.epochs,
         "--steps-per-epoch", fine.steps_per_epoch, "--checkpoint", out / "models/pretrain.ttts",
         "--out", out / "models/finetune.ttts", "--losses", out / "models/finetune_losses.csv")
    ckpt = out / "models/finetune.ttts"

    # Analysis corpora, plus held-out speakers for evaluation.
    for kind, offset in (("loudness", 11), ("clarity", 12)):
        _run("tts", "corpus", "--checkpoint", ckpt, "--kind", kind, "--speakers", 12,
             "--seed", seed + offset, "--out", out / f"corpora/{kind}.semb",
             "--attributes", out / f"corpora/{kind}_attributes.csv")
    _run("tts", "corpus", "--checkpoint", ckpt, "--kind", "loudness", "--speakers", speakers,
         "--seed", seed + 13, "--out", out / "corpora/heldout.semb")
    heldout = load_corpus(out / "corpora/heldout.semb")
    normal = [e for e in heldout if e.id.endswith("_normal")]
    save_corpus(EmbeddingCorpus(tuple(normal)), out / "corpora/heldout_normal.semb")

    for kind, attribute, n_bind in (("loudness", "spl_db", 2), ("clarity", "clarity", 1)):
        _run("pca", "fit", "--corpus", out / f"corpora/{kind}.semb", "--out", out / f"pca/{kind}.pcam")
        _run("pca", "correlate", "--model", out / f"pca/{kind}.pcam", "--corpus", out / f"corpora/{kind}.semb",
             "--attributes", out / f"corpora/{kind}_attributes.csv", "--attribute", attribute,
             "--out-dir", out / "pca", "--prefix", kind, "--bind-axis", kind, "--bind-count", n_bind,
             "--model-ref", kind)

    # Shipped presets with bindings derived from the correlation analysis.
    shipped, _ = load_presets()
    preset_text = format_presets(shipped.values())
    preset_text += "".join((out / f"pca/{k}_binding.ini").read_text(encoding="utf-8") for k in ("loudness", "clarity"))
    (out / "style/presets.ini").write_text(preset_text, encoding="utf-8")
    presets, _ = load_presets(out / "style/presets.ini")

    models = [f"loudness={out / 'pca/loudness.pcam'}", f"clarity={out / 'pca/clarity.pcam'}"]
    model_args = [x for m in models for x in ("--model", m)]
    for name in presets:
        _run("style", "apply", "--embeddings", out / "corpora/heldout_normal.semb", "--preset", name,
             "--presets", out / "style/presets.ini", *model_args, "--out", out / f"style/{name}.semb")

    task = SyntheticTask()
    rows = []
    rng = np.random.default_rng(seed + 14)
    for level, preset in presets.items():
        styled = load_corpus(out / f"style/{level}.semb")
        for e in styled:
            spk = e.id.split("_")[0]
            for j, text in enumerate(SENTENCES):
                uid = f"{spk}_s{j}"
                tpath = out / f"eval_inputs/{uid}.txt"
                tpath.write_text(text + "\n", encoding="utf-8")
                tts_mel = out / f"synth/{uid}_{level}.csv"
                tts_wav = out / f"synth/{uid}_{level}.wav"
                _run("tts", "synth", "--text", text, "--style", out / f"style/{level}.semb", "--style-id", e.id,
                     "--speed", preset.speed, "--checkpoint", ckpt, "--seed", seed + 100 + j,
                     "--out", tts_mel, "--wav", tts_wav)
                # Ground truth: the task's closed form at this level, same duration rule.
                frames = target_duration(count_syllables(text), preset.speed).frames
                s, q = LEVEL_STYLE.get(level, (preset.loudness, preset.clarity))
                chars = pad_symbols(text_to_symbols(text), frames)
                gt = task.render(chars[None], s, q, rng)[0]
                gt_wav = out / f"eval_inputs/{uid}_{level}_gt.wav"
                write_wav(gt_wav, render_waveform(gt), 16000)
                rows.append(("gt", uid, level, f"{uid}_{level}_gt.wav", f"{uid}.txt", ""))
                rows.append(("tts", uid, level, f"../synth/{uid}_{level}.wav", f"{uid}.txt", f"{uid}_{level}_gt.wav"))

    manifest = out / "eval_inputs/manifest.csv"
    with manifest.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["system", "id", "level", "wav", "transcript", "reference_wav"])
        w.writerows(rows)

    py = shlex.quote(sys.executable)
    _run("eval", "run", "--manifest", manifest, "--out-dir", out / "eval",
         "--transcriber", f"{py} -m lombardctl.stubs asr {{wav}} {{transcript}}",
         "--embedder", f"{py} -m lombardctl.stubs embed {{wav}}",
         "--noise-levels", "clean,10,5,1", "--seed", seed)
    _run("report", "--records", out / "eval/records.csv", "--out-dir", out / "report")
