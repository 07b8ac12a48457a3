"""Image-record data model and line-delimited manifest persistence.

A manifest is a UTF-8 file with one JSON object per line.  The canonical
writer emits keys in a fixed order so that write(load(f)) is byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

SOURCES = ("public-real", "public-synthetic", "private", "text-synthetic")

FIELD_ORDER = ("id", "path", "width", "height", "source", "caption", "scores", "embedding_ref")
_REQUIRED = ("id", "path", "width", "height", "source", "caption")


class ManifestError(ValueError):
    """Base class for manifest problems."""


class ManifestParseError(ManifestError):
    """A line could not be parsed into a record."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ManifestIntegrityError(ManifestError):
    """Records parse individually but violate a manifest-wide invariant."""


@dataclass
class ImageRecord:
    id: str
    path: str
    width: int
    height: int
    source: str
    caption: str
    scores: dict[str, float] = field(default_factory=dict)
    embedding_ref: int | None = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ManifestError(f"record {self.id!r}: width and height must be >= 1")
        if self.source not in SOURCES:
            raise ManifestError(
                f"record {self.id!r}: source {self.source!r} not one of {SOURCES}"
            )


@dataclass
class Manifest:
    records: list[ImageRecord] = field(default_factory=list)
    provenance: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ManifestIntegrityError(f"duplicate id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ImageRecord]:
        return iter(self.records)

    def ids(self) -> list[str]:
        return [rec.id for rec in self.records]


def record_from_obj(obj: dict, line_no: int = 0) -> ImageRecord:
    if not isinstance(obj, dict):
        raise ManifestParseError(line_no, "record is not an object")
    unknown = set(obj) - set(FIELD_ORDER)
    if unknown:
        raise ManifestParseError(line_no, f"unknown keys {sorted(unknown)}")
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise ManifestParseError(line_no, f"missing keys {missing}")
    try:
        return ImageRecord(
            id=obj["id"],
            path=obj["path"],
            width=int(obj["width"]),
            height=int(obj["height"]),
            source=obj["source"],
            caption=obj["caption"],
            scores={str(k): float(v) for k, v in obj.get("scores", {}).items()},
            embedding_ref=obj.get("embedding_ref"),
        )
    except ManifestError as exc:
        raise ManifestParseError(line_no, str(exc)) from exc
    except (TypeError, AttributeError) as exc:
        raise ManifestParseError(line_no, f"bad field value: {exc}") from exc


def record_to_obj(rec: ImageRecord) -> dict:
    obj: dict = {
        "id": rec.id,
        "path": rec.path,
        "width": rec.width,
        "height": rec.height,
        "source": rec.source,
        "caption": rec.caption,
    }
    if rec.scores:
        obj["scores"] = {k: rec.scores[k] for k in sorted(rec.scores)}
    if rec.embedding_ref is not None:
        obj["embedding_ref"] = rec.embedding_ref
    return obj


def iter_records(path: str | Path) -> Iterator[ImageRecord]:
    """Stream records from a manifest file, one per line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(line_no, f"invalid JSON: {exc.msg}") from exc
            yield record_from_obj(obj, line_no)


def load_manifest(path: str | Path) -> Manifest:
    return Manifest(records=list(iter_records(path)), provenance=str(path))


def write_manifest(m: Manifest | Iterable[ImageRecord], path: str | Path) -> None:
    """Canonical writer: fixed key order, compact separators, UTF-8."""
    records = m.records if isinstance(m, Manifest) else m
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_obj(rec), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")


def caption_word_count(caption: str) -> int:
    """Number of maximal whitespace-separated tokens."""
    return len(caption.split())


@dataclass
class ManifestStats:
    records: int
    mean_caption_words: float | None
    per_source: dict[str, int]

    def to_obj(self) -> dict:
        return {
            "records": self.records,
            "mean_caption_words": self.mean_caption_words,
            "per_source": self.per_source,
        }


def manifest_stats(m: Manifest) -> ManifestStats:
    per_source = {s: 0 for s in SOURCES}
    total_words = 0
    for rec in m:
        per_source[rec.source] += 1
        total_words += caption_word_count(rec.caption)
    mean = total_words / len(m.records) if m.records else None
    return ManifestStats(records=len(m.records), mean_caption_words=mean, per_source=per_source)
