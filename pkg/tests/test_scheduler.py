import pytest

from lenspipe.buckets import canonical_table
from lenspipe.scheduler import (
    PRNG_NAME,
    BatchPlan,
    CostModel,
    RankSpec,
    SchedulerError,
    batch_size_for,
    imbalance_report,
    partition,
    plan_epoch,
    read_plan,
    step_cost,
    write_plan,
)

TABLE = canonical_table()
B512 = next(b for b in TABLE.tier(512) if b.width == 512)
B768 = next(b for b in TABLE.tier(768) if b.width == 768)
B1024 = next(b for b in TABLE.tier(1024) if b.width == 1024)


def test_rank_spec_validation():
    RankSpec(rank=0, world_size=1, seed=0, epoch=0)
    with pytest.raises(SchedulerError):
        RankSpec(rank=1, world_size=1, seed=0, epoch=0)
    with pytest.raises(SchedulerError):
        RankSpec(rank=0, world_size=0, seed=0, epoch=0)


def test_partition_single_rank():
    ids = [f"i{k}" for k in range(17)]
    parts = partition(ids, 1, seed=7, epoch=0)
    assert len(parts) == 1
    assert sorted(parts[0]) == sorted(ids)


def test_partition_drops_remainder():
    ids = [f"i{k}" for k in range(10)]
    parts = partition(ids, 3, seed=7, epoch=0)
    assert [len(p) for p in parts] == [3, 3, 3]
    used = [i for p in parts for i in p]
    assert len(set(used)) == 9


def test_partition_deterministic():
    ids = [f"i{k}" for k in range(100)]
    assert partition(ids, 4, seed=1, epoch=2) == partition(ids, 4, seed=1, epoch=2)
    assert partition(ids, 4, seed=1, epoch=2) != partition(ids, 4, seed=1, epoch=3)


def test_partition_disjoint_coverage(rng):
    for world_size in range(1, 9):
        n = int(rng.integers(1, 2000))
        ids = [f"i{k}" for k in range(n)]
        parts = partition(ids, world_size, seed=3, epoch=1)
        used = [i for p in parts for i in p]
        assert len(used) == len(set(used))
        assert len(ids) - len(used) < world_size


def test_batch_sizes():
    assert batch_size_for(512) == 24
    assert batch_size_for(768) == 10
    assert batch_size_for(1024) == 6
    assert batch_size_for(512, {512: 48}) == 48
    with pytest.raises(SchedulerError):
        batch_size_for(640)


def test_step_cost_paper_sizes():
    cm = CostModel()
    assert step_cost(B512, 24, cm) == 24576
    assert step_cost(B768, 10, cm) == 23040
    assert step_cost(B1024, 6, cm) == 24576
    assert step_cost(B512, 24, CostModel(exponent=1.0, overhead=100.0)) == 24676


def test_plan_epoch_full_batches():
    ids = [(f"i{k}", B512) for k in range(48)]
    plan = plan_epoch([ids], seed=0, epoch=0)
    assert len(plan.plans[0]) == 2
    assert plan.dropped == [0]
    assert all(len(p.ids) == 24 for p in plan.plans[0])


def test_plan_epoch_drops_tail():
    ids = [(f"i{k}", B512) for k in range(25)]
    plan = plan_epoch([ids], seed=0, epoch=0)
    assert len(plan.plans[0]) == 1
    assert plan.dropped == [1]


def test_plan_epoch_empty():
    plan = plan_epoch([[]], seed=0, epoch=0)
    assert plan.plans == [[]]


def test_plan_epoch_bucket_homogeneous(rng):
    buckets = [B512, B768, B1024]
    pairs = [(f"i{k}", buckets[int(rng.integers(3))]) for k in range(500)]
    plan = plan_epoch([pairs], seed=9, epoch=1)
    for bp in plan.plans[0]:
        assert len(bp.ids) == batch_size_for(bp.bucket.base)
        assert len(set(bp.ids)) == len(bp.ids)


def test_plan_epoch_deterministic(rng):
    pairs = [(f"i{k}", B512 if k % 2 else B768) for k in range(200)]
    a = plan_epoch([pairs], seed=5, epoch=3)
    b = plan_epoch([pairs], seed=5, epoch=3)
    assert [(p.step, p.ids) for p in a.plans[0]] == [(p.step, p.ids) for p in b.plans[0]]
    c = plan_epoch([pairs], seed=6, epoch=3)
    assert [(p.step, p.ids) for p in a.plans[0]] != [(p.step, p.ids) for p in c.plans[0]]


def test_synced_mode_aligns_buckets():
    rank0 = [(f"a{k}", B512) for k in range(24)] + [(f"b{k}", B1024) for k in range(6)]
    rank1 = [(f"c{k}", B512) for k in range(24)] + [(f"d{k}", B1024) for k in range(6)]
    plan = plan_epoch([rank0, rank1], seed=0, epoch=0, mode="synced")
    seq0 = [p.bucket for p in plan.plans[0]]
    seq1 = [p.bucket for p in plan.plans[1]]
    assert seq0 == seq1


def test_imbalance_report():
    cm = CostModel()
    plans = [
        [BatchPlan(0, 0, B512, [f"x{k}" for k in range(24)])],
        [BatchPlan(1, 0, B512, [f"y{k}" for k in range(24)])],
    ]
    assert imbalance_report(plans, cm).step_ratios == [1.0]

    plans[1] = [BatchPlan(1, 0, B1024, [f"y{k}" for k in range(6)])]
    assert imbalance_report(plans, cm).step_ratios == [1.0]

    plans[1] = [BatchPlan(1, 0, B768, [f"y{k}" for k in range(10)])]
    ratio = imbalance_report(plans, cm).step_ratios[0]
    assert ratio == pytest.approx(24576 / 23040)


def test_imbalance_report_pad_mode():
    cm = CostModel()
    plans = [
        [BatchPlan(0, 0, B512, [f"x{k}" for k in range(24)]),
         BatchPlan(0, 1, B768, [f"x{k}" for k in range(10)])],
        [BatchPlan(1, 0, B512, [f"y{k}" for k in range(24)])],
    ]
    truncated = imbalance_report(plans, cm)
    assert len(truncated.step_ratios) == 1
    padded = imbalance_report(plans, cm, pad=True)
    assert len(padded.step_ratios) == 2
    assert padded.step_ratios[1] == pytest.approx(24576 / 23040)


def test_plan_file_roundtrip(tmp_path):
    pairs = [(f"i{k}", B512) for k in range(48)]
    plan = plan_epoch([pairs], seed=11, epoch=2)
    path = tmp_path / "plan.jsonl"
    write_plan(plan, path)
    header, rows = read_plan(path)
    assert header["prng"] == PRNG_NAME
    assert header["seed"] == 11 and header["epoch"] == 2
    assert len(rows) == 2
    assert rows[0]["bucket"]["width"] == 512
    assert all(r["rank"] == 0 for r in rows)
