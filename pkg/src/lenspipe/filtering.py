"""Nine-stage corpus cleaning pipeline.

Stage order is fixed: decode, area, nsfw, aesthetic, watermark, clarity,
entropy, luminance, dedup.  The model-based stages (nsfw, aesthetic,
watermark) are scorer contracts; this package never ships classifiers.
Per-record stages are pure functions of (pixels, config) and may run in
parallel; kept order always equals input order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from . import dedup as dedup_mod
from . import metrics
from .manifest import ImageRecord, Manifest

STAGES = ("decode", "area", "nsfw", "aesthetic", "watermark", "clarity", "entropy", "luminance", "dedup")

MODEL_STAGES = ("nsfw", "aesthetic", "watermark")
PIXEL_STAGES = ("decode", "nsfw", "aesthetic", "watermark", "clarity", "entropy", "luminance")


class FilterConfigError(ValueError):
    pass


class Scorer(Protocol):
    name: str
    score_range: tuple[float, float]

    def evaluate(self, pixels: np.ndarray) -> float: ...


@dataclass
class ScorerContract:
    name: str
    score_range: tuple[float, float]
    evaluate: Callable[[np.ndarray], float]


@dataclass
class FilterConfig:
    min_area: int = 384 * 384
    nsfw_max: float = 0.5
    aesthetic_min: float = 3.0
    watermark_max: float = 0.5
    clarity_min: float = 100.0
    entropy_min: float = 4.0
    luminance_range: tuple[float, float] = (0.05, 0.98)
    dup_threshold: float = 0.985
    stage_toggles: dict[str, bool] = field(default_factory=lambda: {s: True for s in STAGES})

    def __post_init__(self):
        if not 0.0 <= self.dup_threshold <= 1.0:
            raise FilterConfigError("dup_threshold must be in [0, 1]")
        lo, hi = self.luminance_range
        if not (0.0 <= lo <= hi <= 1.0):
            raise FilterConfigError("luminance_range must be an interval within [0, 1]")
        for name in ("min_area", "nsfw_max", "aesthetic_min", "watermark_max",
                     "clarity_min", "entropy_min"):
            if not math.isfinite(getattr(self, name)):
                raise FilterConfigError(f"{name} must be finite")
        unknown = set(self.stage_toggles) - set(STAGES)
        if unknown:
            raise FilterConfigError(f"unknown stages {sorted(unknown)}")

    def enabled(self, stage: str) -> bool:
        return self.stage_toggles.get(stage, False)

    def enabled_stages(self) -> tuple[str, ...]:
        return tuple(s for s in STAGES if self.enabled(s))


@dataclass
class StageCount:
    name: str
    input: int
    removed: int
    kept: int


@dataclass
class FilterReport:
    stages: list[StageCount]

    def __post_init__(self):
        for prev, cur in zip(self.stages, self.stages[1:]):
            if prev.kept != cur.input:
                raise FilterConfigError(f"stage chain broken at {cur.name}")
        for s in self.stages:
            if s.removed + s.kept != s.input:
                raise FilterConfigError(f"stage counts inconsistent at {s.name}")

    def to_obj(self) -> dict:
        return {
            "stages": [
                {"name": s.name, "input": s.input, "removed": s.removed, "kept": s.kept}
                for s in self.stages
            ]
        }


def area_keep(width: int, height: int, min_area: int) -> bool:
    """Keep iff the pixel area is at least ``min_area`` (strictly smaller removed)."""
    if width < 1 or height < 1:
        raise FilterConfigError("width and height must be >= 1")
    return width * height >= min_area


def _validate_inputs(
    cfg: FilterConfig,
    scorers: dict[str, Scorer],
    image_loader: Callable[[ImageRecord], bytes] | None,
    embeddings: np.ndarray | None,
) -> None:
    for stage in MODEL_STAGES:
        if cfg.enabled(stage) and stage not in scorers:
            raise FilterConfigError(f"stage {stage!r} enabled but no scorer provided")
    if image_loader is None and any(cfg.enabled(s) for s in PIXEL_STAGES):
        needed = [s for s in PIXEL_STAGES if cfg.enabled(s)]
        raise FilterConfigError(f"stages {needed} need an image loader")
    if cfg.enabled("dedup") and embeddings is None:
        raise FilterConfigError("stage 'dedup' enabled but no embeddings provided")


def _run_record(
    rec: ImageRecord,
    cfg: FilterConfig,
    scorers: dict[str, Scorer],
    image_loader: Callable[[ImageRecord], bytes] | None,
) -> tuple[dict[str, float], str | None]:
    """Run the per-record stages in order; returns (scores, first failing stage)."""
    scores: dict[str, float] = {}
    pixels: np.ndarray | None = None
    gray: np.ndarray | None = None

    def need_pixels() -> np.ndarray | None:
        nonlocal pixels
        if pixels is None and image_loader is not None:
            data = image_loader(rec)
            pixels = metrics.decode_and_validate(data)
        return pixels

    def need_gray() -> np.ndarray:
        nonlocal gray
        if gray is None:
            gray = metrics.to_grayscale(need_pixels())
        return gray

    for stage in cfg.enabled_stages():
        if stage == "decode":
            ok = need_pixels() is not None
            scores["decode"] = 1.0 if ok else 0.0
            if not ok:
                return scores, "decode"
        elif stage == "area":
            scores["area"] = float(rec.width * rec.height)
            if not area_keep(rec.width, rec.height, cfg.min_area):
                return scores, "area"
        elif stage in MODEL_STAGES:
            px = need_pixels()
            if px is None:
                return scores, stage
            value = float(scorers[stage].evaluate(px))
            scores[stage] = value
            if stage == "nsfw" and value > cfg.nsfw_max:
                return scores, stage
            if stage == "aesthetic" and value < cfg.aesthetic_min:
                return scores, stage
            if stage == "watermark" and value > cfg.watermark_max:
                return scores, stage
        elif stage == "clarity":
            px = need_pixels()
            if px is None:
                return scores, stage
            try:
                value = metrics.laplacian_variance(metrics.scale_normalize(need_gray()))
            except ValueError:  # thinner than the kernel after normalization
                return scores, stage
            scores["clarity"] = value
            if value < cfg.clarity_min:
                return scores, stage
        elif stage == "entropy":
            px = need_pixels()
            if px is None:
                return scores, stage
            value = metrics.shannon_entropy(need_gray())
            scores["entropy"] = value
            if value < cfg.entropy_min:
                return scores, stage
        elif stage == "luminance":
            px = need_pixels()
            if px is None:
                return scores, stage
            value = metrics.mean_luminance(px)
            scores["luminance"] = value
            lo, hi = cfg.luminance_range
            if not lo <= value <= hi:
                return scores, stage
    return scores, None


def run_pipeline(
    m: Manifest,
    cfg: FilterConfig,
    scorers: dict[str, Scorer] | None = None,
    *,
    image_loader: Callable[[ImageRecord], bytes] | None = None,
    embeddings: np.ndarray | None = None,
    jobs: int = 1,
    removed_sink: Callable[[ImageRecord, str], None] | None = None,
) -> tuple[Manifest, FilterReport]:
    """Apply the enabled stages in order; returns the kept manifest and report.

    ``embeddings`` must be row-aligned with the input manifest when the dedup
    stage is enabled.  Removed records (with their stage scores retained) are
    passed to ``removed_sink`` together with the removing stage.
    """
    scorers = scorers or {}
    _validate_inputs(cfg, scorers, image_loader, embeddings)
    enabled = cfg.enabled_stages()

    def work(rec: ImageRecord) -> tuple[dict[str, float], str | None]:
        return _run_record(rec, cfg, scorers, image_loader)

    if jobs > 1 and len(m.records) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, m.records))
    else:
        outcomes = [work(rec) for rec in m.records]

    fate: dict[str, str | None] = {}
    for rec, (scores, failed) in zip(m.records, outcomes):
        rec.scores.update(scores)
        fate[rec.id] = failed

    per_record_stages = [s for s in enabled if s != "dedup"]
    alive = list(m.records)
    counts: list[StageCount] = []
    for stage in per_record_stages:
        removed_here = [rec for rec in alive if fate[rec.id] == stage]
        kept_here = [rec for rec in alive if fate[rec.id] != stage]
        counts.append(StageCount(stage, len(alive), len(removed_here), len(kept_here)))
        if removed_sink is not None:
            for rec in removed_here:
                removed_sink(rec, stage)
        alive = kept_here

    if cfg.enabled("dedup"):
        vectors = np.asarray(embeddings)
        index_of = {rec.id: i for i, rec in enumerate(m.records)}
        alive_vectors = vectors[[index_of[rec.id] for rec in alive]]
        decision = dedup_mod.dedup_exact([rec.id for rec in alive], alive_vectors, cfg.dup_threshold)
        kept_here = []
        removed_n = 0
        for rec in alive:
            if rec.id in decision.removed_ids:
                removed_n += 1
                rec.scores["dedup"] = dedup_mod.cosine(
                    vectors[index_of[rec.id]],
                    vectors[index_of[decision.survivor_map[rec.id]]],
                )
                if removed_sink is not None:
                    removed_sink(rec, "dedup")
            else:
                kept_here.append(rec)
        counts.append(StageCount("dedup", len(alive), removed_n, len(kept_here)))
        alive = kept_here

    kept = Manifest(records=alive, provenance=m.provenance)
    return kept, FilterReport(stages=counts)
