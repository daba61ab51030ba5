"""Small fixtures shared by the runner and CLI tests."""

from __future__ import annotations

import shlex
import sys
from pathlib import Path

import numpy as np

from lombardctl.evaluation.audio import write_wav
from lombardctl.tts.synth import render_waveform

PY = shlex.quote(sys.executable)
ECHO_ASR = f"{PY} -m lombardctl.stubs asr {{wav}} {{transcript}} --drop-rate 0"
FAILING_ASR = f"{PY} -m lombardctl.stubs asr {{wav}} {{transcript}} --fail"
STUB_EMBED = f"{PY} -m lombardctl.stubs embed {{wav}}"

FAIL_ON_NAME = """
import sys
from pathlib import Path
wav, transcript = sys.argv[1], sys.argv[2]
if "bad" in Path(wav).name:
    sys.exit("refusing " + wav)
print(Path(transcript).read_text())
"""


def selective_transcriber(tmp: Path) -> str:
    """Echoes the transcript, but exits non-zero for any wav with 'bad' in its name."""
    script = tmp / "asr_select.py"
    script.write_text(FAIL_ON_NAME, encoding="utf-8")
    return f"{PY} {shlex.quote(str(script))} {{wav}} {{transcript}}"


def make_manifest(tmp: Path, ids=("u1", "u2"), levels=("normal", "loud"), bad=()) -> Path:
    """Tiny audio manifest: one rendered wav and transcript per (id, level)."""
    rng = np.random.default_rng(0)
    rows = ["system,id,level,wav,transcript"]
    for uid in ids:
        (tmp / f"{uid}.txt").write_text("the river runs under the old station\n", encoding="utf-8")
        for level in levels:
            name = f"{uid}_{level}{'_bad' if (uid, level) in bad else ''}.wav"
            mel = rng.standard_normal((20, 8)) * 0.3
            write_wav(tmp / name, render_waveform(mel), 16000)
            rows.append(f"tts,{uid},{level},{name},{uid}.txt")
    path = tmp / "manifest.csv"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path
