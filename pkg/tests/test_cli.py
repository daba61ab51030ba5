import numpy as np
import pytest

import reference_tables as tables
from helpers import ECHO_ASR, FAILING_ASR, make_manifest, selective_transcriber
from lombardctl.cli import main
from lombardctl.embeddings import EmbeddingCorpus, load_corpus, save_corpus
from lombardctl.evaluation.audio import read_wav, snr_db, write_wav
from lombardctl.pca import fit_pca, save_pca
from lombardctl.tts.checkpoint import save_checkpoint
from lombardctl.tts.data import load_mel_csv

TWELVE = "the river runs under the old station today"  # 12 syllables


@pytest.fixture
def corpus_file(tmp_path, rng):
    path = tmp_path / "c.semb"
    save_corpus(EmbeddingCorpus.from_arrays([f"u{i}" for i in range(10)], rng.standard_normal((10, 4))), path)
    return path


@pytest.fixture
def models(tmp_path, corpus_file):
    model = fit_pca(load_corpus(corpus_file))
    save_pca(model, tmp_path / "m.pcam")
    return ["--model", f"loudness={tmp_path / 'm.pcam'}", "--model", f"clarity={tmp_path / 'm.pcam'}"]


@pytest.fixture
def checkpoint(tmp_path, tiny_models):
    path = tmp_path / "fine.ttts"
    save_checkpoint(tiny_models[1].model, path)
    return path


def test_pca_fit_summary(tmp_path, corpus_file, capsys):
    assert main(["pca", "fit", "--corpus", str(corpus_file), "--k", "3", "--out", str(tmp_path / "o.pcam")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("K=3 D=4 N=10")
    assert "sigma=" in out and "explained_variance_ratio=" in out


def test_missing_file_exit_2_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.semb"
    assert main(["pca", "fit", "--corpus", str(missing), "--out", str(tmp_path / "o.pcam")]) == 2
    assert str(missing) in capsys.readouterr().err


def test_k_too_large_exit_2(tmp_path, corpus_file):
    assert main(["pca", "fit", "--corpus", str(corpus_file), "--k", "5", "--out", str(tmp_path / "o.pcam")]) == 2


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["pca", "frobnicate"])
    assert exc.value.code == 2


def _correlate(tmp_path, corpus_file, values, out="corr"):
    attrs = tmp_path / "a.csv"
    attrs.write_text("id,attribute,value\n" + "".join(f"u{i},spl_db,{float(v)!r}\n" for i, v in enumerate(values)))
    save_pca(fit_pca(load_corpus(corpus_file)), tmp_path / "m.pcam")
    return main(["pca", "correlate", "--model", str(tmp_path / "m.pcam"), "--corpus", str(corpus_file),
                 "--attributes", str(attrs), "--attribute", "spl_db", "--out-dir", str(tmp_path / out),
                 "--bind-axis", "loudness", "--bind-count", "2"])


def test_pca_correlate_linear_attribute(tmp_path, corpus_file):
    from lombardctl.pca import project

    model = fit_pca(load_corpus(corpus_file))
    scores = project(model, load_corpus(corpus_file).matrix())
    assert _correlate(tmp_path, corpus_file, 60 + 4 * scores[:, 0]) == 0
    lines = (tmp_path / "corr/spl_db_correlations.csv").read_text().splitlines()
    assert lines[0] == "component,pearson_r,n"
    assert float(lines[1].split(",")[1]) > 0.999
    scatter = (tmp_path / "corr/spl_db_scatter.csv").read_text().splitlines()
    assert scatter[0] == "id,component,score,attribute" and len(scatter) == 1 + 10 * 4
    assert "[binding.loudness]" in (tmp_path / "corr/spl_db_binding.ini").read_text()
    first = (tmp_path / "corr/spl_db_correlations.csv").read_bytes()
    assert _correlate(tmp_path, corpus_file, 60 + 4 * scores[:, 0], out="corr2") == 0
    assert (tmp_path / "corr2/spl_db_correlations.csv").read_bytes() == first


def test_pca_correlate_constant_attribute_exit_2(tmp_path, corpus_file):
    assert _correlate(tmp_path, corpus_file, [60.0] * 10) == 2


def test_style_apply_normal_and_very_loud(tmp_path, corpus_file, models, capsys):
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--preset", "normal", *models,
                 "--out", str(tmp_path / "n.semb")]) == 0
    assert "speed=1" in capsys.readouterr().out
    src, out = load_corpus(corpus_file).matrix(), load_corpus(tmp_path / "n.semb").matrix()
    # SEMB stores float32.
    np.testing.assert_allclose(out, src, atol=1e-6 * (1 + np.abs(src).max()))
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--preset", "very_loud", *models,
                 "--out", str(tmp_path / "v.semb")]) == 0
    assert "speed=0.9" in capsys.readouterr().out


def test_style_apply_unknown_preset_lists_names(tmp_path, corpus_file, models, capsys):
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--preset", "shouty", *models,
                 "--out", str(tmp_path / "x.semb")]) == 2
    err = capsys.readouterr().err
    assert "loud" in err and "very_loud" in err and "soft" in err


def test_style_apply_explicit_shift(tmp_path, corpus_file, models):
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--shift", "loudness:0=1.5", *models,
                 "--out", str(tmp_path / "s.semb")]) == 0
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--shift", "nope:0=1", *models,
                 "--out", str(tmp_path / "s.semb")]) == 2
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--shift", "garbage", *models,
                 "--out", str(tmp_path / "s.semb")]) == 2


def test_style_apply_unbound_axis(tmp_path, corpus_file, models):
    presets = tmp_path / "p.ini"
    presets.write_text("[preset.x]\nclarity = 1\n[binding.loudness]\nmodel = loudness\ncomponents = 0\n")
    assert main(["style", "apply", "--embeddings", str(corpus_file), "--preset", "x", "--presets", str(presets),
                 *models, "--out", str(tmp_path / "x.semb")]) == 2


def test_duration_command(capsys):
    assert main(["duration", "--text", TWELVE, "--speed", "0.9"]) == 0
    assert capsys.readouterr().out.splitlines() == ["syllables=12", "seconds=3.333333333", "frames=167"]
    assert main(["duration", "--text", "!!", "--speed", "1"]) == 2


def test_synth_frame_count_and_determinism(tmp_path, checkpoint, tiny_models, capsys):
    style = tmp_path / "style.csv"
    dim = tiny_models[1].model.config.style_dim
    style.write_text("id," + ",".join(f"v{i}" for i in range(dim)) + "\nx," + ",".join(["0.1"] * dim) + "\n")
    args = ["tts", "synth", "--text", TWELVE, "--style", str(style), "--checkpoint", str(checkpoint),
            "--seed", "5", "--steps", "4", "--frame-rate", "50"]
    assert main(args + ["--out", str(tmp_path / "a.csv"), "--wav", str(tmp_path / "a.wav")]) == 0
    assert "frames=150" in capsys.readouterr().out
    assert load_mel_csv(tmp_path / "a.csv").frames == 150
    assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert read_wav(tmp_path / "a.wav")[0].size == 3 * 16000
    assert main(["tts", "synth", "--text", " ", "--style", str(style), "--checkpoint", str(checkpoint),
                 "--seed", "1", "--out", str(tmp_path / "c.csv")]) == 2


def test_seed_is_mandatory(tmp_path, checkpoint, monkeypatch, capsys):
    monkeypatch.delenv("LOMBARDCTL_SEED", raising=False)
    assert main(["tts", "corpus", "--checkpoint", str(checkpoint), "--kind", "loudness", "--speakers", "1",
                 "--out", str(tmp_path / "c.semb")]) == 2
    assert "seed" in capsys.readouterr().err


def test_seed_from_environment(tmp_path, checkpoint, monkeypatch):
    args = ["tts", "corpus", "--checkpoint", str(checkpoint), "--kind", "clarity", "--speakers", "2"]
    monkeypatch.setenv("LOMBARDCTL_SEED", "9")
    assert main(args + ["--out", str(tmp_path / "env.semb")]) == 0
    monkeypatch.delenv("LOMBARDCTL_SEED")
    assert main(args + ["--seed", "9", "--out", str(tmp_path / "flag.semb")]) == 0
    assert (tmp_path / "env.semb").read_bytes() == (tmp_path / "flag.semb").read_bytes()


def test_mix_noise_command(tmp_path, rng):
    write_wav(tmp_path / "c.wav", rng.uniform(-0.3, 0.3, 8000), 16000)
    write_wav(tmp_path / "n.wav", rng.uniform(-0.3, 0.3, 3000), 16000)
    assert main(["mix-noise", "--clean", str(tmp_path / "c.wav"), "--noise", str(tmp_path / "n.wav"),
                 "--snr", "5", "--seed", "1", "--out", str(tmp_path / "m.wav")]) == 0
    clean, _ = read_wav(tmp_path / "c.wav")
    mixed, _ = read_wav(tmp_path / "m.wav")
    assert abs(snr_db(clean, mixed - clean) - 5.0) < 0.1
    write_wav(tmp_path / "n8.wav", rng.uniform(-0.3, 0.3, 3000), 8000)
    assert main(["mix-noise", "--clean", str(tmp_path / "c.wav"), "--noise", str(tmp_path / "n8.wav"),
                 "--snr", "5", "--seed", "1", "--out", str(tmp_path / "m.wav")]) == 2


def test_eval_wer_command(capsys):
    assert main(["eval", "wer", "--ref", "the cat sat", "--hyp", "the cat"]) == 0
    assert capsys.readouterr().out.strip() == "S=0 D=1 I=0 N=3 wer=0.3333333333"


def test_eval_run_identity_transcriber(tmp_path, capsys):
    manifest = make_manifest(tmp_path)
    assert main(["eval", "run", "--manifest", str(manifest), "--out-dir", str(tmp_path / "out"),
                 "--transcriber", ECHO_ASR, "--seed", "1"]) == 0
    rows = (tmp_path / "out/report.csv").read_text().splitlines()[1:]
    assert rows and all(r.split(",")[3] == "0" and r.split(",")[4] == "n/a" for r in rows)


def test_eval_run_flags_failing_row(tmp_path):
    manifest = make_manifest(tmp_path, bad={("u1", "normal")})
    assert main(["eval", "run", "--manifest", str(manifest), "--out-dir", str(tmp_path / "out"),
                 "--transcriber", selective_transcriber(tmp_path), "--noise-levels", "clean", "--seed", "1"]) == 0
    records = (tmp_path / "out/records.csv").read_text().splitlines()
    flagged = [r for r in records[1:] if r.split(",")[-1]]
    assert len(flagged) == 1 and flagged[0].startswith("u1,normal")


def test_eval_run_all_failing_exit_3(tmp_path):
    manifest = make_manifest(tmp_path)
    out = tmp_path / "out"
    assert main(["eval", "run", "--manifest", str(manifest), "--out-dir", str(out),
                 "--transcriber", FAILING_ASR, "--seed", "1"]) == 3
    assert not out.exists()
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".out.")]


def test_report_from_precomputed_table(tmp_path, capsys):
    manifest = tmp_path / "m.csv"
    lines = ["system,id,level,noise,wer"]
    lines += [f"{r.system},{r.id},{r.level},{r.noise},{r.wer}" for r in tables.records()]
    manifest.write_text("\n".join(lines) + "\n")
    assert main(["eval", "run", "--manifest", str(manifest), "--out-dir", str(tmp_path / "o"), "--seed", "0"]) == 0
    assert main(["report", "--records", str(tmp_path / "o/records.csv"), "--out-dir", str(tmp_path / "r")]) == 0
    assert "gt relative WER" in capsys.readouterr().out
    rows = [r.split(",") for r in (tmp_path / "r/report.csv").read_text().splitlines()[1:]]
    cells = {(s, l, n): d for s, l, n, _, d, *_ in rows}
    for system, grid in tables.DELTA_WER.items():
        for level, row in grid.items():
            for noise, expected in zip(tables.NOISES[1:], row):
                assert abs(float(cells[(system, level, noise)]) - expected) <= 0.02


def test_config_file_supplies_seed_and_templates(tmp_path):
    manifest = make_manifest(tmp_path, ids=("u1",), levels=("normal",))
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\nseed = 3\n[paths]\noutput_dir = cfg_out\n[external]\ntranscriber = {ECHO_ASR}\n"
                   "[eval]\nnoise_levels = clean, 10\n")
    assert main(["--config", str(cfg), "eval", "run", "--manifest", str(manifest)]) == 0
    assert len((tmp_path / "cfg_out/records.csv").read_text().splitlines()) == 1 + 2
