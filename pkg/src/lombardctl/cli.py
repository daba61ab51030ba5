"""Command-line entry point: ``lombardctl <command> ...``.

Exit codes: 0 success, 2 usage or validation error, 3 external-command
failure affecting every row.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import duration as dur
from .config import RunConfig, atomic_output_dir, load_config, resolve_seed
from .embeddings import (
    CLARITY_ORDINALS,
    AttributeTable,
    EmbeddingCorpus,
    join_attributes,
    load_attributes_csv,
    load_corpus,
    save_attributes_csv,
    save_corpus,
)
from .errors import LombardError
from .evaluation.audio import SnrSpec, mix_at_snr, read_wav, write_wav
from .evaluation.report import build_report, read_records, write_records, write_report
from .evaluation.runner import Evaluator, ExternalCommandError, read_manifest
from .evaluation.wer import word_error_rate
from .pca import correlate_components, fit_pca, load_pca, project, save_pca
from .style import (
    LombardPreset,
    apply_preset,
    bindings_from_correlations,
    format_bindings,
    load_presets,
    shift_embedding,
)
from .tts.checkpoint import load_checkpoint, save_checkpoint
from .tts.data import SyntheticTask, save_mel_csv
from .tts.model import encode_style
from .tts.synth import render_waveform, synthesize
from .tts.train import TrainConfig, train

log = logging.getLogger("lombardctl")

EXIT_USAGE = 2
EXIT_EXTERNAL = 3

LOUDNESS_LEVELS = {"soft": -1.0, "normal": -1.0 / 3.0, "loud": 1.0 / 3.0, "very_loud": 1.0}


class UsageError(LombardError):
    pass


def _existing(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"file not found: {path}")
    return path


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


# -- pca ----------------------------------------------------------------------

def cmd_pca_fit(args, cfg: RunConfig) -> int:
    corpus = load_corpus(_existing(args.corpus))
    k = "max" if args.k in (None, "max") else int(args.k)
    model = fit_pca(corpus, k)
    save_pca(model, args.out)
    print(f"K={model.k} D={model.dimension} N={len(corpus)}")
    print("sigma=" + ",".join(_fmt(s) for s in model.sigma))
    print("explained_variance_ratio=" + ",".join(_fmt(r) for r in model.explained_variance_ratio))
    return 0


def cmd_pca_correlate(args, cfg: RunConfig) -> int:
    model = load_pca(_existing(args.model))
    corpus = load_corpus(_existing(args.corpus))
    table = load_attributes_csv(_existing(args.attributes))
    pairs = join_attributes(corpus, table, args.attribute)
    corr = correlate_components(model, pairs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = args.prefix or args.attribute
    with (out / f"{stem}_correlations.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["component", "pearson_r", "n"])
        for c in corr:
            w.writerow([c.component_index, "undefined" if c.pearson_r is None else _fmt(c.pearson_r), c.sample_count])
    with (out / f"{stem}_scatter.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "component", "score", "attribute"])
        for emb, value in pairs:
            for k, s in enumerate(project(model, emb)):
                w.writerow([emb.id, k, _fmt(s), _fmt(value)])
    for c in corr:
        print(f"PC{c.component_index}: r={'undefined' if c.pearson_r is None else format(c.pearson_r, '.4f')} n={c.sample_count}")
    if args.bind_axis:
        binding = bindings_from_correlations(args.bind_axis, args.model_ref or args.bind_axis, corr, args.bind_count)
        (out / f"{stem}_binding.ini").write_text(format_bindings([binding]), encoding="utf-8")
    return 0


# -- style --------------------------------------------------------------------

def _models(specs, cfg: RunConfig) -> dict:
    paths = dict(cfg.models)
    for spec in specs or []:
        ref, sep, path = spec.partition("=")
        if not sep:
            raise UsageError(f"--model expects REF=PATH, got {spec!r}")
        paths[ref] = Path(path)
    return {ref: load_pca(_existing(p)) for ref, p in paths.items()}


def cmd_style_apply(args, cfg: RunConfig) -> int:
    corpus = load_corpus(_existing(args.embeddings))
    models = _models(args.model, cfg)
    presets, bindings = load_presets(args.presets or cfg.presets)
    if bool(args.preset) == bool(args.shift):
        raise UsageError("give exactly one of --preset or --shift")
    if args.preset:
        if args.preset not in presets:
            raise UsageError(f"unknown preset {args.preset!r}; available: {', '.join(sorted(presets))}")
        preset: LombardPreset = presets[args.preset]
        results = [apply_preset(e, preset, bindings, models)[0] for e in corpus]
        speed = preset.speed
    else:
        shifts: dict[str, dict[int, float]] = {}
        for spec in args.shift:
            try:
                ref_idx, coef = spec.split("=")
                ref, idx = ref_idx.split(":")
                shifts.setdefault(ref, {})[int(idx)] = float(coef)
            except ValueError:
                raise UsageError(f"--shift expects MODEL:INDEX=COEF, got {spec!r}") from None
        for ref in shifts:
            if ref not in models:
                raise UsageError(f"unknown model {ref!r}; loaded: {sorted(models)}")
        results = []
        for e in corpus:
            v = e.values
            for ref, s in shifts.items():
                v = shift_embedding(v, models[ref], s)
            results.append(v)
        speed = args.speed
    save_corpus(EmbeddingCorpus.from_arrays(corpus.ids, np.stack(results)), args.out)
    print(f"speed={_fmt(speed)}")
    return 0


# -- duration -----------------------------------------------------------------

def cmd_duration(args, cfg: RunConfig) -> int:
    syll = dur.count_syllables(args.text)
    spec = dur.target_duration(syll, args.speed, args.rate, args.frame_rate or cfg.frame_rate)
    print(f"syllables={spec.syllables}")
    print(f"seconds={_fmt(spec.seconds)}")
    print(f"frames={spec.frames}")
    return 0


# -- tts ----------------------------------------------------------------------

def cmd_tts_train(args, cfg: RunConfig) -> int:
    seed = resolve_seed(args.seed, cfg)
    config = TrainConfig(
        seed=seed, stage=args.stage, learning_rate=args.lr, epochs=args.epochs,
        steps_per_epoch=args.steps_per_epoch, batch_size=args.batch_size,
    )
    checkpoint = load_checkpoint(_existing(args.checkpoint)) if args.checkpoint else None
    result = train(config, checkpoint=checkpoint)
    save_checkpoint(result.model, args.out)
    if args.losses:
        with Path(args.losses).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss"])
            for i, loss in enumerate(result.losses):
                w.writerow([i, _fmt(loss)])
    smoothed = result.epoch_smoothed()
    if smoothed:
        print(f"loss first_epoch={_fmt(smoothed[0])} final={_fmt(smoothed[-1])}")
    return 0


def _style_vector(args) -> np.ndarray:
    corpus = load_corpus(_existing(args.style))
    if args.style_id:
        try:
            return corpus.get(args.style_id).values
        except KeyError:
            raise UsageError(f"id {args.style_id!r} not in {args.style}") from None
    return corpus.embeddings[0].values


def cmd_tts_synth(args, cfg: RunConfig) -> int:
    if dur.count_syllables(args.text) == 0:
        raise UsageError("text is empty (no syllables)")
    model = load_checkpoint(_existing(args.checkpoint))
    style = _style_vector(args)
    seed = resolve_seed(args.seed, cfg)
    frame_rate = args.frame_rate or cfg.frame_rate
    mel = synthesize(model, args.text, style, args.speed, seed, args.steps, frame_rate)
    save_mel_csv(mel, args.out)
    if args.wav:
        write_wav(args.wav, render_waveform(mel, args.sample_rate, frame_rate), args.sample_rate)
    print(f"frames={mel.frames}")
    return 0


def cmd_tts_corpus(args, cfg: RunConfig) -> int:
    """Encode synthetic reference utterances into a labeled style corpus."""
    model = load_checkpoint(_existing(args.checkpoint))
    if model.encoder is None:
        raise UsageError("checkpoint has no style encoder (use a fine-tuned checkpoint)")
    seed = resolve_seed(args.seed, cfg)
    rng = np.random.default_rng(seed)
    task = SyntheticTask(channels=model.config.channels)
    ids, rows = [], []
    table = AttributeTable()
    levels = LOUDNESS_LEVELS if args.kind == "loudness" else CLARITY_ORDINALS
    for spk in range(args.speakers):
        spk_s, spk_q = 0.15 * rng.standard_normal(), 0.3 * rng.standard_normal()
        for level, value in levels.items():
            if args.kind == "loudness":
                s, q = value + spk_s, spk_q
            else:
                s, q = 0.3 * spk_s, value + 0.3 * spk_q
            ref = task.reference(s, q, args.frames, seed=rng)
            uid = f"spk{spk:02d}_{level}"
            ids.append(uid)
            rows.append(encode_style(model.encoder, ref))
            if args.kind == "loudness":
                table.add(uid, "spl_db", 65.0 + 9.0 * s + rng.normal(0.0, 1.0))
            else:
                table.add(uid, "clarity", value)
    save_corpus(EmbeddingCorpus.from_arrays(ids, np.stack(rows)), args.out)
    if args.attributes:
        save_attributes_csv(table, args.attributes)
    print(f"embeddings={len(ids)} dimension={model.config.style_dim}")
    return 0


# -- evaluation ---------------------------------------------------------------

def cmd_mix_noise(args, cfg: RunConfig) -> int:
    clean, rate = read_wav(_existing(args.clean))
    noise, noise_rate = read_wav(_existing(args.noise))
    spec = SnrSpec.parse(args.snr, seed=resolve_seed(args.seed, cfg))
    write_wav(args.out, mix_at_snr(clean, noise, spec, rate, noise_rate), rate)
    return 0


def _text_arg(value: str) -> str:
    if value.startswith("@"):
        return _existing(value[1:]).read_text(encoding="utf-8")
    return value


def cmd_eval_wer(args, cfg: RunConfig) -> int:
    res = word_error_rate(_text_arg(args.ref), _text_arg(args.hyp))
    print(f"S={res.substitutions} D={res.deletions} I={res.insertions} N={res.reference_words} wer={_fmt(res.wer)}")
    return 0


def cmd_eval_run(args, cfg: RunConfig) -> int:
    rows = read_manifest(_existing(args.manifest))
    out = Path(args.out_dir or cfg.output_dir or "eval_out")
    levels = tuple(x.strip() for x in args.noise_levels.split(",")) if args.noise_levels else cfg.noise_levels
    seed = resolve_seed(args.seed, cfg)
    with atomic_output_dir(out) as tmp:
        evaluator = Evaluator(
            transcriber=args.transcriber or cfg.transcriber, out_dir=tmp, noise_levels=levels,
            noise_wav=Path(args.noise_wav) if args.noise_wav else cfg.noise_wav,
            embedder=args.embedder or cfg.embedder, seed=seed, jobs=args.jobs or cfg.jobs,
        )
        records = evaluator.run(rows)
        write_records(records, tmp / "records.csv")
        write_report(build_report(records), tmp)
    failed = sum(not r.ok for r in records)
    print(f"records={len(records)} failed={failed} out={out}")
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    records = read_records(_existing(args.records))
    report = build_report(records)
    write_report(report, args.out_dir)
    print(report.to_text())
    return 0


def cmd_demo(args, cfg: RunConfig) -> int:
    from .demo import run_demo

    seed = resolve_seed(args.seed, cfg)
    with atomic_output_dir(args.out_dir) as tmp:
        run_demo(tmp, seed, quick=not args.full)
    print(f"demo written to {args.out_dir}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lombardctl", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="INI-style run configuration")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    pca = sub.add_parser("pca", help="fit PCA models and correlate components").add_subparsers(dest="pca_cmd", required=True)
    f = pca.add_parser("fit")
    f.add_argument("--corpus", required=True)
    f.add_argument("--k", default="max")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_pca_fit)
    c = pca.add_parser("correlate")
    c.add_argument("--model", required=True)
    c.add_argument("--corpus", required=True)
    c.add_argument("--attributes", required=True)
    c.add_argument("--attribute", required=True)
    c.add_argument("--out-dir", required=True)
    c.add_argument("--prefix")
    c.add_argument("--bind-axis", choices=("loudness", "clarity"))
    c.add_argument("--bind-count", type=int, default=1)
    c.add_argument("--model-ref")
    c.set_defaults(func=cmd_pca_correlate)

    style = sub.add_parser("style", help="manipulate style embeddings").add_subparsers(dest="style_cmd", required=True)
    a = style.add_parser("apply")
    a.add_argument("--embeddings", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--preset")
    a.add_argument("--shift", action="append", help="MODEL:INDEX=COEF (repeatable)")
    a.add_argument("--speed", type=float, default=1.0, help="speed reported with --shift")
    a.add_argument("--presets", help="preset/binding file (default: shipped presets)")
    a.add_argument("--model", action="append", help="REF=PATH to a PCAM model (repeatable)")
    a.set_defaults(func=cmd_style_apply)

    d = sub.add_parser("duration", help="syllable count and target duration")
    d.add_argument("--text", required=True)
    d.add_argument("--speed", type=float, default=1.0)
    d.add_argument("--rate", type=float, default=dur.DEFAULT_RATE)
    d.add_argument("--frame-rate", type=float)
    d.set_defaults(func=cmd_duration)

    tts = sub.add_parser("tts", help="train / run the toy synthesizer").add_subparsers(dest="tts_cmd", required=True)
    t = tts.add_parser("train")
    t.add_argument("--stage", choices=("pretrain", "finetune"), default="pretrain")
    t.add_argument("--checkpoint", help="pretrained checkpoint (finetune stage)")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int, default=6)
    t.add_argument("--steps-per-epoch", type=int, default=250)
    t.add_argument("--batch-size", type=int, default=16)
    t.add_argument("--lr", type=float, default=2e-3)
    t.add_argument("--losses", help="write per-step losses to this CSV")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tts_train)
    s = tts.add_parser("synth")
    s.add_argument("--text", required=True)
    s.add_argument("--style", required=True, help="embedding file (SEMB or CSV)")
    s.add_argument("--style-id")
    s.add_argument("--speed", type=float, default=1.0)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--steps", type=int, default=32)
    s.add_argument("--frame-rate", type=float)
    s.add_argument("--out", required=True)
    s.add_argument("--wav")
    s.add_argument("--sample-rate", type=int, default=16000)
    s.set_defaults(func=cmd_tts_synth)
    k = tts.add_parser("corpus", help="encode synthetic reference utterances")
    k.add_argument("--checkpoint", required=True)
    k.add_argument("--kind", choices=("loudness", "clarity"), required=True)
    k.add_argument("--speakers", type=int, default=12)
    k.add_argument("--frames", type=int, default=40)
    k.add_argument("--seed", type=int)
    k.add_argument("--out", required=True)
    k.add_argument("--attributes")
    k.set_defaults(func=cmd_tts_corpus)

    m = sub.add_parser("mix-noise", help="mix noise into a WAV at a target SNR")
    m.add_argument("--clean", required=True)
    m.add_argument("--noise", required=True)
    m.add_argument("--snr", required=True, help='dB value or "clean"')
    m.add_argument("--seed", type=int)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_mix_noise)

    ev = sub.add_parser("eval", help="evaluation").add_subparsers(dest="eval_cmd", required=True)
    w = ev.add_parser("wer")
    w.add_argument("--ref", required=True, help="text, or @file")
    w.add_argument("--hyp", required=True, help="text, or @file")
    w.set_defaults(func=cmd_eval_wer)
    r = ev.add_parser("run")
    r.add_argument("--manifest", required=True)
    r.add_argument("--out-dir")
    r.add_argument("--transcriber", help="command template; {wav} and {transcript} are substituted")
    r.add_argument("--embedder", help="command template printing an embedding for {wav}")
    r.add_argument("--noise-levels", help='comma list, e.g. "clean,10,5,1"')
    r.add_argument("--noise-wav")
    r.add_argument("--seed", type=int)
    r.add_argument("--jobs", type=int)
    r.set_defaults(func=cmd_eval_run)

    rp = sub.add_parser("report", help="aggregate a records CSV into report tables")
    rp.add_argument("--records", required=True)
    rp.add_argument("--out-dir", required=True)
    rp.set_defaults(func=cmd_report)

    dm = sub.add_parser("demo", help="run the end-to-end synthetic pipeline")
    dm.add_argument("--out-dir", required=True)
    dm.add_argument("--seed", type=int)
    dm.add_argument("--full", action="store_true", help="use the full training schedule")
    dm.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except ExternalCommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (LombardError, OSError) as exc:
        if isinstance(exc, OSError) and exc.filename:
            msg = f"{exc.strerror}: {exc.filename}"
        else:
            msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
