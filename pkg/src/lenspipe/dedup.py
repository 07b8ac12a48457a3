"""Near-duplicate removal over embedding vectors.

Two paths with identical decision semantics: an exact greedy scan and an
inverted-file index (spherical k-means coarse quantizer with multi-probe
search).  Both use keep-first order: a record is removed iff its cosine
similarity to some earlier *kept* record is strictly above the threshold,
and the survivor is the earliest such record.  Every approximate candidate
is verified with an exact cosine before removal, so the index can only miss
duplicates, never remove falsely.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels

STORE_MAGIC = b"LNSE"
STORE_VERSION = 1


class DedupError(ValueError):
    pass


class StoreError(ValueError):
    pass


@dataclass
class DupDecision:
    removed_ids: set[str]
    survivor_map: dict[str, str]
    threshold: float

    def __post_init__(self):
        survivors = set(self.survivor_map.values())
        if survivors & self.removed_ids:
            raise DedupError("survivor_map targets must be kept ids")

    def kept_ids(self, ids: Sequence[str]) -> list[str]:
        return [i for i in ids if i not in self.removed_ids]

    def to_obj(self) -> dict:
        return {
            "threshold": self.threshold,
            "removed": sorted(self.removed_ids),
            "survivor_map": {k: self.survivor_map[k] for k in sorted(self.survivor_map)},
        }


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity in float64, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DedupError(f"dimension mismatch: {a.shape} vs {b.shape}")
    qa = float(a @ a)
    qb = float(b @ b)
    if qa == 0.0 or qb == 0.0:
        raise DedupError("cosine similarity undefined for zero vectors")
    # sqrt(qa * qb) keeps the self-similarity case exactly 1.0
    return float(np.clip(float(a @ b) / np.sqrt(qa * qb), -1.0, 1.0))


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2:
        raise DedupError("expected a 2-D (count, dim) array")
    if not np.all(np.isfinite(x)):
        raise DedupError("embeddings must be finite")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise DedupError("cosine similarity undefined for zero vectors")
    return x / norms[:, None]


def _check_ids(ids: Sequence[str], vectors: np.ndarray) -> None:
    if len(ids) != vectors.shape[0]:
        raise DedupError(f"{len(ids)} ids for {vectors.shape[0]} vectors")
    if len(set(ids)) != len(ids):
        raise DedupError("duplicate ids")


def dedup_exact(ids: Sequence[str], vectors: np.ndarray, threshold: float) -> DupDecision:
    """Exact keep-first scan over all pairs."""
    unit = _unit_rows(vectors)
    _check_ids(ids, unit)
    assign = kernels.dedup_scan(unit, float(threshold))
    removed = {ids[i] for i in np.nonzero(assign >= 0)[0]}
    survivor_map = {ids[i]: ids[assign[i]] for i in np.nonzero(assign >= 0)[0]}
    return DupDecision(removed_ids=removed, survivor_map=survivor_map, threshold=float(threshold))


def _kmeans(unit: np.ndarray, k: int, seed: int, iters: int = 15) -> np.ndarray:
    """Spherical k-means on unit rows; returns unit-norm centroids."""
    rng = np.random.default_rng(seed)
    n = unit.shape[0]
    centroids = unit[rng.choice(n, size=k, replace=False)].copy()
    for _ in range(iters):
        assign = np.argmax(unit @ centroids.T, axis=1)
        for c in range(k):
            members = unit[assign == c]
            if len(members) == 0:
                centroids[c] = unit[rng.integers(n)]
                continue
            mean = members.mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 0:
                centroids[c] = mean / norm
    return centroids


def default_centroid_count(n: int) -> int:
    return max(1, int(round(np.sqrt(n))))


def dedup_approx(
    ids: Sequence[str],
    vectors: np.ndarray,
    threshold: float,
    probes: int = 8,
    centroids: int | None = None,
    seed: int = 0,
) -> DupDecision:
    """Inverted-file accelerated scan; candidate pairs verified exactly."""
    if probes < 1:
        raise DedupError("probes must be >= 1")
    if centroids is not None and centroids < 1:
        raise DedupError("centroids must be >= 1")
    unit = _unit_rows(vectors)
    _check_ids(ids, unit)
    n = unit.shape[0]
    if n == 0:
        return DupDecision(set(), {}, float(threshold))
    k = centroids if centroids is not None else default_centroid_count(n)
    k = min(k, n)
    cents = _kmeans(unit, k, seed)
    probes = min(probes, k)

    lists: list[list[int]] = [[] for _ in range(k)]
    removed: set[str] = set()
    survivor_map: dict[str, str] = {}
    for i in range(n):
        scores = unit[i] @ cents.T
        if probes == k:
            probe_ids = np.arange(k)
        else:
            probe_ids = np.argpartition(scores, -probes)[-probes:]
        cands = np.sort(np.concatenate([lists[c] for c in probe_ids]).astype(np.int64)) \
            if any(len(lists[c]) for c in probe_ids) else np.empty(0, dtype=np.int64)
        if cands.size:
            sims = unit[cands] @ unit[i]
            hits = cands[sims > threshold]
        else:
            hits = cands
        if hits.size:
            removed.add(ids[i])
            survivor_map[ids[i]] = ids[int(hits[0])]
        else:
            lists[int(np.argmax(scores))].append(i)
    return DupDecision(removed_ids=removed, survivor_map=survivor_map, threshold=float(threshold))


def recall_vs_exact(approx: DupDecision, exact: DupDecision) -> float:
    """Fraction of exactly-detected removals the approximate pass also found."""
    if not exact.removed_ids:
        return 1.0
    return len(approx.removed_ids & exact.removed_ids) / len(exact.removed_ids)


def id_hash(record_id: str) -> int:
    """Stable 64-bit id hash used by the embedding store."""
    digest = hashlib.blake2b(record_id.encode("utf-8"), digest_size=8).digest()
    return struct.unpack("<Q", digest)[0]


def write_store(path: str | Path, ids: Sequence[str], vectors: np.ndarray) -> None:
    """Write the flat little-endian embedding store (bit-exact layout)."""
    x = np.ascontiguousarray(vectors, dtype="<f4")
    if x.ndim != 2:
        raise StoreError("expected a 2-D (count, dim) array")
    _check_ids(ids, x)
    count, dim = x.shape
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<IIQ", STORE_VERSION, dim, count))
        for i, record_id in enumerate(ids):
            fh.write(struct.pack("<Q", id_hash(record_id)))
            fh.write(x[i].tobytes())


def read_store(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Read an embedding store; returns (uint64 id hashes, float32 vectors)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != STORE_MAGIC:
            raise StoreError(f"bad magic {magic!r}")
        version, dim, count = struct.unpack("<IIQ", fh.read(16))
        if version != STORE_VERSION:
            raise StoreError(f"unsupported store version {version}")
        record = np.dtype([("hash", "<u8"), ("vec", "<f4", (dim,))])
        data = np.fromfile(fh, dtype=record, count=count)
    if len(data) != count:
        raise StoreError(f"store truncated: {len(data)} of {count} records")
    return data["hash"].copy(), data["vec"].copy()


def vectors_for_ids(path: str | Path, ids: Sequence[str]) -> np.ndarray:
    """Join manifest ids against a store by id hash."""
    hashes, vecs = read_store(path)
    index = {int(h): i for i, h in enumerate(hashes)}
    if len(index) != len(hashes):
        raise StoreError("id-hash collision in store")
    rows = []
    for record_id in ids:
        h = id_hash(record_id)
        if h not in index:
            raise StoreError(f"no embedding for id {record_id!r}")
        rows.append(vecs[index[h]])
    return np.asarray(rows, dtype=np.float32)
