"""Run configuration: INI-style file, environment override, atomic output dirs."""

from __future__ import annotations

import configparser
import contextlib
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LombardError

SEED_ENV = "LOMBARDCTL_SEED"
DEFAULT_NOISE_LEVELS = ("clean", "10", "5", "1")


@dataclass
class RunConfig:
    seed: int | None = None
    frame_rate: float = 50.0
    jobs: int = 1
    output_dir: Path | None = None
    presets: Path | None = None
    noise_wav: Path | None = None
    models: dict[str, Path] = field(default_factory=dict)
    transcriber: str | None = None
    embedder: str | None = None
    noise_levels: tuple[str, ...] = DEFAULT_NOISE_LEVELS

    def __post_init__(self):
        if not self.noise_levels:
            raise LombardError("noise level list must not be empty")


def load_config(path=None) -> RunConfig:
    """Read ``key = value`` / ``[section]`` config; relative paths resolve against the file."""
    if path is None:
        return RunConfig()
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise LombardError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise LombardError(f"{path}: {exc}") from None
    base = path.parent

    def p(section, key):
        value = parser.get(section, key, fallback="").strip()
        return (base / value) if value else None

    try:
        seed = parser.get("run", "seed", fallback="").strip()
        levels = parser.get("eval", "noise_levels", fallback=",".join(DEFAULT_NOISE_LEVELS))
        return RunConfig(
            seed=int(seed) if seed else None,
            frame_rate=parser.getfloat("run", "frame_rate", fallback=50.0),
            jobs=parser.getint("run", "jobs", fallback=1),
            output_dir=p("paths", "output_dir"),
            presets=p("paths", "presets"),
            noise_wav=p("paths", "noise_wav"),
            models={k: base / v for k, v in parser.items("models")} if parser.has_section("models") else {},
            transcriber=parser.get("external", "transcriber", fallback=None),
            embedder=parser.get("external", "embedder", fallback=None),
            noise_levels=tuple(x.strip() for x in levels.split(",") if x.strip()),
        )
    except ValueError as exc:
        raise LombardError(f"{path}: {exc}") from None


def resolve_seed(flag: int | None, config: RunConfig | None = None) -> int:
    """Seed precedence: command-line flag, then $LOMBARDCTL_SEED, then config."""
    if flag is not None:
        return int(flag)
    env = os.environ.get(SEED_ENV, "").strip()
    if env:
        try:
            return int(env)
        except ValueError:
            raise LombardError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    if config is not None and config.seed is not None:
        return config.seed
    raise LombardError(f"a seed is required (--seed, ${SEED_ENV}, or [run] seed in the config)")


@contextlib.contextmanager
def atomic_output_dir(path):
    """Build into a sibling temp dir and move it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{path.name}.", dir=path.parent))
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if path.exists():
        old = path.with_name(f".{path.name}.old")
        shutil.rmtree(old, ignore_errors=True)
        path.rename(old)
        tmp.rename(path)
        shutil.rmtree(old, ignore_errors=True)
    else:
        tmp.rename(path)
