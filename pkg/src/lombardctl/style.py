"""Shift style embeddings along PCA components; Lombardness presets."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import StyleError
from .pca import ComponentCorrelation, PcaModel, inverse_project, project

AXES = ("loudness", "clarity")


@dataclass(frozen=True)
class ShiftDirective:
    model_ref: str
    component_index: int
    coefficient: float


@dataclass(frozen=True)
class LombardPreset:
    name: str
    loudness: float
    clarity: float
    speed: float

    def __post_init__(self):
        if not (0.0 < self.speed <= 4.0):
            raise StyleError(f"preset {self.name!r}: speed {self.speed} outside (0, 4]")
        for axis in AXES:
            if not math.isfinite(getattr(self, axis)):
                raise StyleError(f"preset {self.name!r}: non-finite {axis}")

    def axis_value(self, axis: str) -> float:
        return getattr(self, axis)


@dataclass(frozen=True)
class AxisBinding:
    axis: str
    directives_template: tuple[tuple[str, int, float], ...]

    def __post_init__(self):
        if self.axis not in AXES:
            raise StyleError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        if not self.directives_template:
            raise StyleError(f"binding for {self.axis!r} has no components")
        for _, idx, weight in self.directives_template:
            if idx < 0 or not math.isfinite(weight):
                raise StyleError(f"binding for {self.axis!r}: invalid entry ({idx}, {weight})")


def _check_shifts(model: PcaModel, shifts) -> list[tuple[int, float]]:
    items = list(shifts.items()) if isinstance(shifts, Mapping) else list(shifts)
    seen = set()
    out = []
    for idx, coef in items:
        idx = int(idx)
        if not 0 <= idx < model.k:
            raise StyleError(f"component index {idx} out of range for K={model.k}")
        if idx in seen:
            raise StyleError(f"duplicate component index {idx}")
        if not math.isfinite(coef):
            raise StyleError(f"non-finite coefficient for component {idx}")
        seen.add(idx)
        out.append((idx, float(coef)))
    return out


def score_delta(model: PcaModel, shifts) -> np.ndarray:
    """Score-space displacement: coefficient times that component's sigma."""
    delta = np.zeros(model.k)
    for idx, coef in _check_shifts(model, shifts):
        delta[idx] = coef * model.sigma[idx]
    return delta


def shift_embedding(e, model: PcaModel, shifts) -> np.ndarray:
    """Move the listed PCA scores of ``e`` by ``coefficient * sigma`` and map back.

    ``shifts`` is a mapping or a sequence of ``(component_index, coefficient)``.
    Components that are not listed keep their scores; any part of ``e`` outside
    the retained subspace is dropped by the inverse projection.
    """
    delta = score_delta(model, shifts)
    return inverse_project(model, project(model, e) + delta)


def roundtrip(e, model: PcaModel) -> np.ndarray:
    return inverse_project(model, project(model, e))


def displacement_norm(model: PcaModel, shifts) -> float:
    return float(np.linalg.norm(score_delta(model, shifts)))


def instantiate(
    preset: LombardPreset, bindings: Sequence[AxisBinding]
) -> list[tuple[str, dict[int, float]]]:
    """Resolve a preset into per-model shift maps, in binding order.

    Coefficients from several axes landing on the same (model, component) add up.
    """
    bound = {b.axis for b in bindings}
    for axis in AXES:
        if preset.axis_value(axis) != 0.0 and axis not in bound:
            raise StyleError(f"preset {preset.name!r} sets {axis}={preset.axis_value(axis)} but no {axis} binding exists")
    grouped: dict[str, dict[int, float]] = {}
    for binding in bindings:
        value = preset.axis_value(binding.axis)
        for model_ref, idx, weight in binding.directives_template:
            shifts = grouped.setdefault(model_ref, {})
            shifts[idx] = shifts.get(idx, 0.0) + value * weight
    return list(grouped.items())


def apply_preset(
    e,
    preset: LombardPreset,
    bindings: Sequence[AxisBinding],
    models: Mapping[str, PcaModel],
) -> tuple[np.ndarray, float]:
    """Apply a preset; returns the manipulated vector and the preset's speed."""
    plan = instantiate(preset, bindings)
    for model_ref, _ in plan:
        if model_ref not in models:
            raise StyleError(f"unknown model {model_ref!r}; loaded: {sorted(models)}")
    out = np.asarray(getattr(e, "values", e), dtype=np.float64)
    for model_ref, shifts in plan:
        out = shift_embedding(out, models[model_ref], shifts)
    return out, preset.speed


def preset_displacement(
    preset: LombardPreset, bindings: Sequence[AxisBinding], models: Mapping[str, PcaModel]
) -> float:
    """Sum of per-model displacement norms for a preset."""
    return sum(displacement_norm(models[ref], shifts) for ref, shifts in instantiate(preset, bindings))


def bindings_from_correlations(
    axis: str,
    model_ref: str,
    correlations: Iterable[ComponentCorrelation],
    n_components: int,
) -> AxisBinding:
    """Bind ``axis`` to the ``n_components`` most correlated components.

    Weights are +-1 following the sign of r, so a positive axis value always moves
    toward a higher attribute value.
    """
    ranked = sorted(
        (c for c in correlations if c.defined),
        key=lambda c: (-abs(c.pearson_r), c.component_index),
    )
    if len(ranked) < n_components:
        raise StyleError(f"only {len(ranked)} defined correlations, need {n_components}")
    chosen = sorted(ranked[:n_components], key=lambda c: c.component_index)
    return AxisBinding(
        axis, tuple((model_ref, c.component_index, 1.0 if c.pearson_r >= 0 else -1.0) for c in chosen)
    )


# -- preset files -----------------------------------------------------------

def _floats(raw: str) -> list[float]:
    return [float(x) for x in raw.replace(" ", "").split(",") if x]


def parse_preset_text(text: str, source: str = "<presets>") -> tuple[dict[str, LombardPreset], list[AxisBinding]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise StyleError(f"{source}: {exc}") from None
    presets: dict[str, LombardPreset] = {}
    bindings: list[AxisBinding] = []
    for section in parser.sections():
        kind, _, name = section.partition(".")
        sec = parser[section]
        try:
            if kind == "preset":
                presets[name] = LombardPreset(
                    name,
                    loudness=sec.getfloat("loudness", 0.0),
                    clarity=sec.getfloat("clarity", 0.0),
                    speed=sec.getfloat("speed", 1.0),
                )
            elif kind == "binding":
                model = sec.get("model", name)
                comps = [int(c) for c in _floats(sec["components"])]
                weights = _floats(sec.get("weights", ",".join("1" for _ in comps)))
                if len(weights) != len(comps):
                    raise StyleError(f"[{section}]: components and weights differ in length")
                bindings.append(AxisBinding(name, tuple((model, c, w) for c, w in zip(comps, weights))))
            else:
                raise StyleError(f"unknown section [{section}]")
        except (KeyError, ValueError) as exc:
            if isinstance(exc, StyleError):
                raise
            raise StyleError(f"{source}: [{section}]: {exc}") from None
    return presets, bindings


def load_presets(path=None) -> tuple[dict[str, LombardPreset], list[AxisBinding]]:
    """Load a preset/binding file; ``None`` loads the shipped defaults."""
    if path is None:
        text = resources.files("lombardctl.data").joinpath("presets.ini").read_text(encoding="utf-8")
        return parse_preset_text(text, "presets.ini")
    return parse_preset_text(Path(path).read_text(encoding="utf-8"), str(path))


def format_presets(presets: Iterable[LombardPreset]) -> str:
    lines = []
    for p in presets:
        lines += [f"[preset.{p.name}]", f"loudness = {p.loudness!r}", f"clarity = {p.clarity!r}",
                  f"speed = {p.speed!r}", ""]
    return "\n".join(lines)


def format_bindings(bindings: Sequence[AxisBinding]) -> str:
    lines = []
    for b in bindings:
        refs = {ref for ref, _, _ in b.directives_template}
        if len(refs) != 1:
            raise StyleError("preset files hold one model per binding section")
        lines.append(f"[binding.{b.axis}]")
        lines.append(f"model = {refs.pop()}")
        lines.append("components = " + ", ".join(str(i) for _, i, _ in b.directives_template))
        lines.append("weights = " + ", ".join(repr(w) for _, _, w in b.directives_template))
        lines.append("")
    return "\n".join(lines)
