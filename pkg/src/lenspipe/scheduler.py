"""Deterministic rank-aware batch planning over bucketed samples.

Plans are a pure function of (manifest, config, seed, epoch), so every rank
can compute them redundantly without coordination.  The PRNG is a named
counter-based generator recorded in the plan header; partitioning and batch
shuffles drop remainders so batch shapes stay fixed.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .buckets import Bucket, token_count

PRNG_NAME = "philox4x64-v1"

DEFAULT_BATCH_SIZES = {512: 24, 768: 10, 1024: 6}


class SchedulerError(ValueError):
    pass


@dataclass(frozen=True)
class RankSpec:
    rank: int
    world_size: int
    seed: int
    epoch: int

    def __post_init__(self):
        if self.world_size < 1:
            raise SchedulerError("world_size must be >= 1")
        if not 0 <= self.rank < self.world_size:
            raise SchedulerError("rank must be in [0, world_size)")
        if self.epoch < 0:
            raise SchedulerError("epoch must be >= 0")


@dataclass(frozen=True)
class CostModel:
    exponent: float = 1.0
    overhead: float = 0.0

    def __post_init__(self):
        if self.exponent < 1.0:
            raise SchedulerError("cost exponent must be >= 1")


@dataclass
class BatchPlan:
    rank: int
    step: int
    bucket: Bucket
    ids: list[str]

    def to_obj(self) -> dict:
        return {"rank": self.rank, "step": self.step, "bucket": self.bucket.to_obj(), "ids": self.ids}


def _rng(seed: int, epoch: int, *salt: object) -> np.random.Generator:
    material = repr((int(seed), int(epoch), salt)).encode("utf-8")
    digest = hashlib.blake2b(material, digest_size=16).digest()
    key = struct.unpack("<QQ", digest)
    return np.random.Generator(np.random.Philox(key=np.array(key, dtype=np.uint64)))


def partition(ids: Sequence[str], world_size: int, seed: int, epoch: int) -> list[list[str]]:
    """Seeded disjoint per-rank split; < world_size remainder ids are dropped."""
    if world_size < 1:
        raise SchedulerError("world_size must be >= 1")
    perm = _rng(seed, epoch, "partition").permutation(len(ids))
    per_rank = len(ids) // world_size
    out = []
    for rank in range(world_size):
        sl = perm[rank * per_rank:(rank + 1) * per_rank]
        out.append([ids[i] for i in sl])
    return out


def batch_size_for(base: int, overrides: dict[int, int] | None = None) -> int:
    sizes = dict(DEFAULT_BATCH_SIZES)
    if overrides:
        sizes.update(overrides)
    if base not in sizes:
        raise SchedulerError(f"no batch size for base tier {base}")
    return sizes[base]


def step_cost(bucket: Bucket, batch: int, cm: CostModel) -> float:
    """Cost units for one step: batch * tokens^p + overhead."""
    return batch * token_count(bucket) ** cm.exponent + cm.overhead


@dataclass
class EpochPlan:
    plans: list[list[BatchPlan]]  # indexed by rank
    dropped: list[int]  # tail ids dropped per rank
    seed: int
    epoch: int
    mode: str
    config_hash: str


def _config_hash(sizes: dict[int, int], mode: str, world_size: int) -> str:
    blob = json.dumps({"sizes": {str(k): sizes[k] for k in sorted(sizes)},
                       "mode": mode, "world_size": world_size}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def plan_epoch(
    assignments: list[list[tuple[str, Bucket]]],
    seed: int,
    epoch: int,
    batch_sizes: dict[int, int] | None = None,
    mode: str = "independent",
) -> EpochPlan:
    """Group each rank's (id, bucket) pairs into full, bucket-homogeneous batches.

    Incomplete tail batches are dropped and counted.  Batch order is a seeded
    shuffle: in ``independent`` mode each rank shuffles with its own stream;
    in ``synced`` mode all ranks order batches by one shared bucket priority,
    so ranks holding the same buckets align per step.
    """
    if mode not in ("independent", "synced"):
        raise SchedulerError(f"unknown mode {mode!r}")
    sizes = dict(DEFAULT_BATCH_SIZES)
    if batch_sizes:
        sizes.update(batch_sizes)
    world_size = len(assignments)
    plans: list[list[BatchPlan]] = []
    dropped: list[int] = []
    shared_priority: dict[Bucket, float] = {}
    if mode == "synced":
        all_buckets = sorted({bk for rank_pairs in assignments for _, bk in rank_pairs},
                             key=lambda b: (b.base, b.width, b.height))
        shared_priority = _bucket_priority(all_buckets, seed, epoch)
    for rank, pairs in enumerate(assignments):
        groups: dict[Bucket, list[str]] = {}
        for record_id, bucket in pairs:
            groups.setdefault(bucket, []).append(record_id)
        batches: list[tuple[Bucket, list[str]]] = []
        tail = 0
        for bucket in sorted(groups, key=lambda b: (b.base, b.width, b.height)):
            ids = groups[bucket]
            size = batch_size_for(bucket.base, sizes)
            full = len(ids) // size
            for k in range(full):
                batches.append((bucket, ids[k * size:(k + 1) * size]))
            tail += len(ids) - full * size
        if mode == "independent":
            order = _rng(seed, epoch, "order", rank).permutation(len(batches))
        else:
            order = np.array(sorted(range(len(batches)),
                                    key=lambda i: (shared_priority[batches[i][0]], i)), dtype=np.int64)
        plans.append([
            BatchPlan(rank=rank, step=step, bucket=batches[i][0], ids=batches[i][1])
            for step, i in enumerate(order)
        ])
        dropped.append(tail)
    return EpochPlan(plans=plans, dropped=dropped, seed=seed, epoch=epoch, mode=mode,
                     config_hash=_config_hash(sizes, mode, world_size))


def _bucket_priority(buckets: Sequence[Bucket], seed: int, epoch: int) -> dict[Bucket, float]:
    rng = _rng(seed, epoch, "order")
    vals = rng.random(len(buckets))
    return {b: float(v) for b, v in zip(buckets, vals)}


@dataclass
class ImbalanceReport:
    step_ratios: list[float]
    mean_ratio: float

    def to_obj(self) -> dict:
        return {"step_ratios": self.step_ratios, "mean_ratio": self.mean_ratio}


def imbalance_report(plans: list[list[BatchPlan]], cm: CostModel,
                     pad: bool = False) -> ImbalanceReport:
    """Per-step max/min cost ratio across ranks.

    Plans of unequal length are truncated to the shortest by default; with
    ``pad`` the shorter plans repeat from their start instead.
    """
    if not plans or any(len(p) == 0 for p in plans):
        return ImbalanceReport(step_ratios=[], mean_ratio=1.0)
    steps = max(len(p) for p in plans) if pad else min(len(p) for p in plans)
    ratios = []
    for s in range(steps):
        costs = [step_cost(p[s % len(p)].bucket, len(p[s % len(p)].ids), cm) for p in plans]
        ratios.append(max(costs) / min(costs))
    mean = sum(ratios) / len(ratios) if ratios else 1.0
    return ImbalanceReport(step_ratios=ratios, mean_ratio=mean)


def write_plan(plan: EpochPlan, path: str | Path) -> None:
    """Line-delimited plan file with a header line recording the PRNG."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"seed": plan.seed, "epoch": plan.epoch, "config_hash": plan.config_hash,
                  "prng": PRNG_NAME, "mode": plan.mode, "dropped": plan.dropped}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for rank_plans in plan.plans:
            for bp in rank_plans:
                fh.write(json.dumps(bp.to_obj(), separators=(",", ":")) + "\n")


def read_plan(path: str | Path) -> tuple[dict, list[dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if not lines:
        raise SchedulerError("empty plan file")
    return json.loads(lines[0]), [json.loads(line) for line in lines[1:]]
