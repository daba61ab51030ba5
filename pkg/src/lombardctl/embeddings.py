"""Style-embedding corpora: CSV / SEMB persistence and attribute joins."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, LombardError

SEMB_MAGIC = b"SEMB"

# Ordinal encoding of ALBA-style articulation categories.
CLARITY_ORDINALS = {"fast": -1.0, "normal": 0.0, "clear": 1.0}


@dataclass(frozen=True)
class StyleEmbedding:
    id: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise LombardError(f"embedding {self.id!r}: expected a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise LombardError(f"embedding {self.id!r}: non-finite value")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class EmbeddingCorpus:
    embeddings: tuple[StyleEmbedding, ...]
    dimension: int = field(init=False)

    def __post_init__(self):
        embeddings = tuple(self.embeddings)
        if not embeddings:
            raise LombardError("empty corpus")
        dim = embeddings[0].dimension
        seen = set()
        for i, emb in enumerate(embeddings):
            if emb.dimension != dim:
                raise LombardError(
                    f"embedding {i} ({emb.id!r}) has dimension {emb.dimension}, expected {dim}"
                )
            if emb.id in seen:
                raise LombardError(f"duplicate id {emb.id!r}")
            seen.add(emb.id)
        object.__setattr__(self, "embeddings", embeddings)
        object.__setattr__(self, "dimension", dim)

    @classmethod
    def from_arrays(cls, ids: Sequence[str], matrix) -> "EmbeddingCorpus":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if len(ids) != matrix.shape[0]:
            raise LombardError("ids and matrix rows differ in length")
        return cls(tuple(StyleEmbedding(i, row) for i, row in zip(ids, matrix)))

    def __len__(self) -> int:
        return len(self.embeddings)

    def __iter__(self):
        return iter(self.embeddings)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.embeddings]

    def matrix(self) -> np.ndarray:
        return np.stack([e.values for e in self.embeddings])

    def get(self, id: str) -> StyleEmbedding:
        for emb in self.embeddings:
            if emb.id == id:
                return emb
        raise KeyError(id)


@dataclass(frozen=True)
class AttributeRow:
    id: str
    attribute: str
    value: float


class AttributeTable:
    """(id, attribute) -> value, unique per pair."""

    def __init__(self, rows: Iterable[AttributeRow] = ()):
        self._rows: dict[tuple[str, str], float] = {}
        for row in rows:
            self.add(row.id, row.attribute, row.value)

    def add(self, id: str, attribute: str, value: float) -> None:
        key = (id, attribute)
        if key in self._rows:
            raise LombardError(f"duplicate attribute {attribute!r} for id {id!r}")
        value = float(value)
        if not math.isfinite(value):
            raise LombardError(f"non-finite value for {id!r}/{attribute!r}")
        self._rows[key] = value

    def rows(self) -> list[AttributeRow]:
        return [AttributeRow(i, a, v) for (i, a), v in self._rows.items()]

    def attributes(self) -> set[str]:
        return {a for _, a in self._rows}

    def value(self, id: str, attribute: str) -> float | None:
        return self._rows.get((id, attribute))

    def __len__(self) -> int:
        return len(self._rows)

    def check_ids(self, corpus: EmbeddingCorpus) -> None:
        known = set(corpus.ids)
        missing = sorted({i for i, _ in self._rows if i not in known})
        if missing:
            raise LombardError(f"attribute table references unknown ids: {missing[:5]}")


def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def load_corpus_csv(path) -> EmbeddingCorpus:
    rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: missing header")
    header = rows[0]
    if len(header) < 2 or header[0] != "id":
        raise FormatError(f"{path}: row 1: malformed header, expected id,v0,v1,...")
    for j, name in enumerate(header[1:]):
        if name != f"v{j}":
            raise FormatError(f"{path}: row 1: malformed header column {name!r}, expected v{j}")
    dim = len(header) - 1

    embeddings = []
    seen: set[str] = set()
    for rowno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != dim + 1:
            raise FormatError(f"{path}: row {rowno}: expected {dim} values, got {len(row) - 1}")
        id_ = row[0]
        if id_ in seen:
            raise FormatError(f"{path}: row {rowno}: duplicate id {id_!r}")
        seen.add(id_)
        try:
            values = [float(cell) for cell in row[1:]]
        except ValueError:
            raise FormatError(f"{path}: row {rowno}: non-numeric cell") from None
        if not all(math.isfinite(v) for v in values):
            raise FormatError(f"{path}: row {rowno}: non-finite value")
        embeddings.append(StyleEmbedding(id_, np.array(values)))
    if not embeddings:
        raise FormatError(f"{path}: empty corpus")
    return EmbeddingCorpus(tuple(embeddings))


def save_corpus_csv(corpus: EmbeddingCorpus, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id"] + [f"v{j}" for j in range(corpus.dimension)])
        for emb in corpus:
            writer.writerow([emb.id] + [format(v, ".17g") for v in emb.values])


def save_corpus_binary(corpus: EmbeddingCorpus, path) -> None:
    """Write SEMB. Values are narrowed to float32."""
    parts = [SEMB_MAGIC, struct.pack("<II", len(corpus), corpus.dimension)]
    for emb in corpus:
        raw = emb.id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise LombardError(f"id too long: {emb.id[:32]!r}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(corpus.matrix().astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_corpus_binary(path) -> EmbeddingCorpus:
    data = Path(path).read_bytes()
    if data[:4] != SEMB_MAGIC:
        raise FormatError(f"{path}: bad magic")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    count, dim = struct.unpack_from("<II", data, 4)
    if count == 0 or dim == 0:
        raise FormatError(f"{path}: count/dim mismatch (count={count}, dim={dim})")
    offset = 12
    ids = []
    for _ in range(count):
        if offset + 2 > len(data):
            raise FormatError(f"{path}: truncated id table")
        (n,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + n > len(data):
            raise FormatError(f"{path}: truncated id table")
        ids.append(data[offset:offset + n].decode("utf-8"))
        offset += n
    expected = count * dim * 4
    payload = data[offset:]
    if len(payload) < expected:
        raise FormatError(f"{path}: truncated payload")
    if len(payload) > expected:
        raise FormatError(f"{path}: count/dim mismatch ({len(payload) - expected} trailing bytes)")
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim).astype(np.float64)
    try:
        return EmbeddingCorpus.from_arrays(ids, matrix)
    except LombardError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_corpus(path) -> EmbeddingCorpus:
    """Dispatch on extension: .csv is text, anything else is SEMB."""
    if str(path).lower().endswith(".csv"):
        return load_corpus_csv(path)
    return load_corpus_binary(path)


def save_corpus(corpus: EmbeddingCorpus, path) -> None:
    if str(path).lower().endswith(".csv"):
        save_corpus_csv(corpus, path)
    else:
        save_corpus_binary(corpus, path)


def load_attributes_csv(path) -> AttributeTable:
    rows = _read_rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["id", "attribute", "value"]:
        raise FormatError(f"{path}: row 1: expected header id,attribute,value")
    table = AttributeTable()
    for rowno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise FormatError(f"{path}: row {rowno}: expected 3 cells, got {len(row)}")
        id_, attr, raw = row
        raw = raw.strip()
        if attr == "clarity" and raw.lower() in CLARITY_ORDINALS:
            value = CLARITY_ORDINALS[raw.lower()]
        else:
            try:
                value = float(raw)
            except ValueError:
                raise FormatError(f"{path}: row {rowno}: non-numeric value {raw!r}") from None
        try:
            table.add(id_, attr, value)
        except LombardError as exc:
            raise FormatError(f"{path}: row {rowno}: {exc}") from None
    return table


def save_attributes_csv(table: AttributeTable, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "attribute", "value"])
        for row in table.rows():
            writer.writerow([row.id, row.attribute, format(row.value, ".17g")])


def join_attributes(
    corpus: EmbeddingCorpus, table: AttributeTable, attribute: str
) -> list[tuple[StyleEmbedding, float]]:
    """Pair embeddings with one attribute, in corpus order, skipping unlabeled ids."""
    if attribute not in table.attributes():
        raise LombardError(f"attribute {attribute!r} not present in table")
    table.check_ids(corpus)
    pairs = []
    for emb in corpus:
        value = table.value(emb.id, attribute)
        if value is not None:
            pairs.append((emb, value))
    return pairs
