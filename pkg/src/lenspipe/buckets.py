"""Resolution buckets: the canonical 27-entry table, assignment, and crop geometry.

The table is a transcribed constant rather than a generated one: no single
rounding rule reproduces every entry, so a formula would silently drift.
``generate_tier`` exists for building new tiers but is not the source of
truth for the canonical three.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

BASES = (512, 768, 1024)

ASPECTS = ((1, 2), (9, 16), (2, 3), (3, 4), (1, 1), (4, 3), (3, 2), (16, 9), (2, 1))

PATCH = 16  # pixels per latent-token side; 512x512 -> 1024 tokens

AREA_TOLERANCE = 0.06

_TABLE = {
    512: ((352, 704), (384, 672), (416, 640), (448, 608), (512, 512),
          (608, 448), (640, 416), (672, 384), (704, 352)),
    768: ((544, 1088), (576, 1024), (640, 960), (672, 896), (768, 768),
          (896, 672), (960, 640), (1024, 576), (1088, 544)),
    1024: ((736, 1472), (768, 1376), (832, 1248), (864, 1152), (1024, 1024),
           (1152, 864), (1248, 832), (1376, 768), (1472, 736)),
}


class BucketError(ValueError):
    pass


@dataclass(frozen=True)
class Bucket:
    base: int
    aspect: tuple[int, int]
    width: int
    height: int

    def __post_init__(self):
        if self.base not in BASES:
            raise BucketError(f"unknown base tier {self.base}")
        if self.width % 32 or self.height % 32:
            raise BucketError(f"{self.width}x{self.height}: dims must be multiples of 32")
        area = self.width * self.height
        base_area = self.base * self.base
        if abs(area - base_area) > AREA_TOLERANCE * base_area:
            raise BucketError(f"{self.width}x{self.height}: area outside +/-6% of {self.base}^2")

    @property
    def base_area(self) -> int:
        return self.base * self.base

    @property
    def aspect_ratio(self) -> float:
        return self.aspect[0] / self.aspect[1]

    def aspect_label(self) -> str:
        return f"{self.aspect[0]}:{self.aspect[1]}"

    def to_obj(self) -> dict:
        return {
            "base": self.base,
            "aspect": self.aspect_label(),
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True)
class BucketTable:
    buckets: tuple[Bucket, ...]

    def __post_init__(self):
        if len(self.buckets) != 27:
            raise BucketError(f"expected 27 buckets, got {len(self.buckets)}")

    def tier(self, base: int) -> tuple[Bucket, ...]:
        out = tuple(b for b in self.buckets if b.base == base)
        if not out:
            raise BucketError(f"unknown base tier {base}")
        return out

    def to_obj(self) -> list[dict]:
        return [b.to_obj() for b in self.buckets]


def canonical_table() -> BucketTable:
    buckets = tuple(
        Bucket(base=base, aspect=aspect, width=w, height=h)
        for base in BASES
        for aspect, (w, h) in zip(ASPECTS, _TABLE[base])
    )
    return BucketTable(buckets=buckets)


def assign_bucket(width: int, height: int, base: int, table: BucketTable) -> Bucket:
    """Nearest-aspect bucket in log space; ties broken toward the wider bucket."""
    if width < 1 or height < 1:
        raise BucketError("width and height must be >= 1")
    target = math.log(width / height)
    best: Bucket | None = None
    best_dist = math.inf
    for b in table.tier(base):
        dist = abs(target - math.log(b.aspect_ratio))
        if dist < best_dist or (dist == best_dist and best is not None
                                and b.aspect_ratio > best.aspect_ratio):
            best, best_dist = b, dist
    assert best is not None
    return best


@dataclass(frozen=True)
class CropPlan:
    scale: float
    crop: tuple[int, int, int, int]  # x, y, w, h in scaled-image pixels


def crop_plan(native: tuple[int, int], bucket: Bucket) -> CropPlan:
    """Cover-scale to the bucket, then center-crop to exact bucket dims."""
    nw, nh = native
    if nw < 1 or nh < 1:
        raise BucketError("native dims must be >= 1")
    scale = max(bucket.width / nw, bucket.height / nh)
    scaled_w = max(bucket.width, round(nw * scale))
    scaled_h = max(bucket.height, round(nh * scale))
    x = (scaled_w - bucket.width) // 2
    y = (scaled_h - bucket.height) // 2
    return CropPlan(scale=scale, crop=(x, y, bucket.width, bucket.height))


def token_count(bucket: Bucket) -> int:
    """Latent token count under the 16-px patch rule."""
    if bucket.width % PATCH or bucket.height % PATCH:
        raise BucketError(f"dims must be multiples of {PATCH}")
    return (bucket.width // PATCH) * (bucket.height // PATCH)


def select_tier(width: int, height: int, table: BucketTable) -> int:
    """Largest tier whose assigned bucket the native image covers without upscaling."""
    for base in sorted(BASES, reverse=True):
        b = assign_bucket(width, height, base, table)
        if max(b.width / width, b.height / height) <= 1.0:
            return base
    return min(BASES)


def generate_tier(base: int, aspects: Sequence[tuple[int, int]] = ASPECTS) -> list[tuple[int, int]]:
    """Round-to-32 bucket generator for new tiers (not the canonical source)."""
    out = []
    area = base * base
    for aw, ah in aspects:
        ratio = aw / ah
        w = round(math.sqrt(area * ratio) / 32) * 32
        h = round(math.sqrt(area / ratio) / 32) * 32
        out.append((max(32, w), max(32, h)))
    return out


def export_table(table: BucketTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table.to_obj(), fh, indent=2)
        fh.write("\n")
