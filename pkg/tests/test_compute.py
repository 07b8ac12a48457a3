import json

import pytest

from lenspipe.compute import (
    ComputeError,
    TrainingBudget,
    compute_ratio,
    format_percent,
    load_budgets,
    normalized_compute,
)

A100_RUN = TrainingBudget("a100-run", gpu_hours=192_000, peak_tflops=312.0)
H800_RUN = TrainingBudget("h800-run", gpu_hours=314_000, peak_tflops=989.5)


def test_normalized_compute():
    assert normalized_compute(A100_RUN) == 59_904_000
    assert normalized_compute(H800_RUN) == 310_703_000
    assert normalized_compute(TrainingBudget("idle", 0, 100.0)) == 0


def test_ratio_reproduces_headline_percentage():
    ratio = compute_ratio(A100_RUN, H800_RUN)
    assert ratio == pytest.approx(0.1928, abs=0.0005)
    assert format_percent(ratio) == "19.3%"


def test_ratio_identity_and_inverse():
    assert compute_ratio(A100_RUN, A100_RUN) == 1.0
    assert compute_ratio(A100_RUN, H800_RUN) * compute_ratio(H800_RUN, A100_RUN) \
        == pytest.approx(1.0, abs=1e-12)


def test_same_gpu_type_reduces_to_hour_ratio():
    a = TrainingBudget("a", 100.0, 312.0)
    b = TrainingBudget("b", 400.0, 312.0)
    assert compute_ratio(a, b) == 0.25


def test_scale_invariance():
    a = TrainingBudget("a", 100.0, 312.0 * 7)
    b = TrainingBudget("b", 400.0, 989.5 * 7)
    base = compute_ratio(TrainingBudget("a", 100.0, 312.0),
                         TrainingBudget("b", 400.0, 989.5))
    assert compute_ratio(a, b) == pytest.approx(base, rel=1e-12)


def test_validation():
    with pytest.raises(ComputeError):
        TrainingBudget("bad", -1.0, 312.0)
    with pytest.raises(ComputeError):
        TrainingBudget("bad", 1.0, 0.0)
    with pytest.raises(ComputeError):
        compute_ratio(A100_RUN, TrainingBudget("idle", 0.0, 100.0))


def test_load_budgets(tmp_path):
    path = tmp_path / "budgets.json"
    path.write_text(json.dumps([
        {"label": "a100-run", "gpu_hours": 192000, "peak_tflops": 312},
        {"label": "h800-run", "gpu_hours": 314000, "peak_tflops": 989.5},
    ]))
    budgets = load_budgets(path)
    assert [b.label for b in budgets] == ["a100-run", "h800-run"]
    path.write_text("[]")
    with pytest.raises(ComputeError):
        load_budgets(path)
    path.write_text('[{"label": "x"}]')
    with pytest.raises(ComputeError):
        load_budgets(path)
