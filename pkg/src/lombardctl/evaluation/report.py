"""Aggregate per-utterance results into WER / relative-WER / similarity tables."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import EvalError, FormatError
from .audio import CLEAN, SnrSpec, noise_label
from .wer import relative_wer

LEVEL_ORDER = ("soft", "normal", "loud", "very_loud")
UNAVAILABLE = "n/a"
REPORT_COLUMNS = ("system", "level", "noise", "wer", "delta_wer", "ssim", "delta_ssim", "n")


@dataclass(frozen=True)
class EvalRecord:
    """One utterance under one condition. WER and similarities are percentages."""

    id: str
    level: str
    noise: str
    wer: float | None = None
    ssim: float | None = None
    delta_ssim: float | None = None
    system: str = "tts"
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ReportCell:
    system: str
    level: str
    noise: str
    wer: float | None
    delta_wer: float | None
    ssim: float | None
    delta_ssim: float | None
    n: int
    note: str = ""


def _noise_key(label: str):
    if label == CLEAN:
        return (0, 0.0, "")
    try:
        return (1, -float(label), "")
    except ValueError:
        return (2, 0.0, label)


def _ordered(values: Iterable[str], preferred: Sequence[str]) -> list[str]:
    seen = list(dict.fromkeys(values))
    head = [v for v in preferred if v in seen]
    return head + [v for v in seen if v not in preferred]


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return (math.fsum(xs) / len(xs)) if xs else None


@dataclass
class EvalReport:
    cells: list[ReportCell]

    def cell(self, system: str, level: str, noise: str) -> ReportCell:
        for c in self.cells:
            if (c.system, c.level, c.noise) == (system, level, noise):
                return c
        raise KeyError((system, level, noise))

    @property
    def systems(self) -> list[str]:
        return list(dict.fromkeys(c.system for c in self.cells))

    def levels(self, system: str) -> list[str]:
        return list(dict.fromkeys(c.level for c in self.cells if c.system == system))

    def noises(self, system: str) -> list[str]:
        return list(dict.fromkeys(c.noise for c in self.cells if c.system == system))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for c in self.cells:
            w.writerow([c.system, c.level, c.noise, _fmt(c.wer), _fmt(c.delta_wer),
                        _fmt(c.ssim), _fmt(c.delta_ssim), c.n])
        return buf.getvalue()

    def to_text(self) -> str:
        out = []
        for system in self.systems:
            levels, noises = self.levels(system), self.noises(system)
            noisy = [n for n in noises if n != CLEAN]
            out.append(_table(f"{system} WER (%)", levels, noises,
                              lambda lv, nz: self.cell(system, lv, nz).wer))
            if noisy:
                out.append(_table(f"{system} relative WER", levels, noisy,
                                  lambda lv, nz: self.cell(system, lv, nz).delta_wer))
            if any(c.ssim is not None or c.delta_ssim is not None for c in self.cells if c.system == system):
                ref = CLEAN if CLEAN in noises else noises[0]
                rows = {"SSIM (%)": lambda lv: self.cell(system, lv, ref).ssim,
                        "relative SSIM (%)": lambda lv: self.cell(system, lv, ref).delta_ssim}
                out.append(_transposed(f"{system} speaker similarity", levels, rows))
        return "\n".join(out)


def _fmt(x, spec=".10g") -> str:
    return UNAVAILABLE if x is None else format(x, spec)


def _table(title, rows, cols, get) -> str:
    head = [""] + list(cols)
    body = [[r] + [_fmt(get(r, c), ".2f") for c in cols] for r in rows]
    return _align(title, head, body)


def _transposed(title, cols, rows) -> str:
    head = [""] + list(cols)
    body = [[name] + [_fmt(get(c), ".1f") for c in cols] for name, get in rows.items()]
    return _align(title, head, body)


def _align(title, head, body) -> str:
    widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
    lines = [title]
    for row in [head] + body:
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                               for i, (cell, w) in enumerate(zip(row, widths))).rstrip())
    return "\n".join(lines) + "\n"


def build_report(records: Iterable[EvalRecord], levels: Sequence[str] | None = None,
                 noises: Sequence[str] | None = None) -> EvalReport:
    """Per-(system, level, noise) means; relative WER from per-level mean WERs.

    Relative WER is left unavailable when the clean cell for that level is
    missing or has zero mean WER. Records carrying an error are excluded.
    """
    groups: dict[tuple[str, str, str], list[EvalRecord]] = defaultdict(list)
    order = []
    for rec in records:
        if not rec.ok:
            continue
        key = (rec.system, rec.level, rec.noise)
        if key not in groups:
            order.append(key)
        groups[key].append(rec)
    if not groups:
        raise EvalError("no valid records to report")

    cells = []
    for system in dict.fromkeys(k[0] for k in order):
        keys = [k for k in order if k[0] == system]
        lv = list(levels) if levels else _ordered((k[1] for k in keys), LEVEL_ORDER)
        nz = list(noises) if noises else sorted(dict.fromkeys(k[2] for k in keys), key=_noise_key)
        for level in lv:
            clean = groups.get((system, level, CLEAN), [])
            clean_wer = _mean(r.wer for r in clean)
            for noise in nz:
                recs = groups.get((system, level, noise), [])
                wer = _mean(r.wer for r in recs)
                delta, note = None, ""
                if noise != CLEAN and wer is not None:
                    if clean_wer is None:
                        note = "missing clean counterpart"
                    elif clean_wer == 0:
                        note = "clean WER is zero"
                    else:
                        delta = relative_wer(wer, clean_wer)
                cells.append(ReportCell(system, level, noise, wer, delta,
                                        _mean(r.ssim for r in recs),
                                        _mean(r.delta_ssim for r in recs), len(recs), note))
    return EvalReport(cells)


def write_report(report: EvalReport, out_dir) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path, txt_path = out_dir / "report.csv", out_dir / "report.txt"
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    txt_path.write_text(report.to_text(), encoding="utf-8")
    return csv_path, txt_path


# -- record files -----------------------------------------------------------

RECORD_COLUMNS = tuple(f.name for f in fields(EvalRecord))


def _opt_float(raw: str | None) -> float | None:
    if raw is None or raw.strip() in ("", UNAVAILABLE):
        return None
    return float(raw)


def write_records(records: Sequence[EvalRecord], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.id, r.level, r.noise,
                        "" if r.wer is None else format(r.wer, ".10g"),
                        "" if r.ssim is None else format(r.ssim, ".10g"),
                        "" if r.delta_ssim is None else format(r.delta_ssim, ".10g"),
                        r.system, r.error or ""])


def read_records(path) -> list[EvalRecord]:
    """Read a records CSV; ``id``, ``level``, ``noise`` are required columns."""
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"id", "level", "noise"} - set(reader.fieldnames or ())
        if missing:
            raise FormatError(f"{path}: missing columns {sorted(missing)}")
        out = []
        for rowno, row in enumerate(reader, start=2):
            try:
                out.append(EvalRecord(
                    id=row["id"], level=row["level"], noise=noise_label(SnrSpec.parse(row["noise"])),
                    wer=_opt_float(row.get("wer")), ssim=_opt_float(row.get("ssim")),
                    delta_ssim=_opt_float(row.get("delta_ssim")),
                    system=row.get("system") or "tts", error=row.get("error") or None,
                ))
            except ValueError as exc:
                raise FormatError(f"{path}: row {rowno}: {exc}") from None
    return out
