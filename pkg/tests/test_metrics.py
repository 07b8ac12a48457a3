import numpy as np
import pytest

from lenspipe import metrics

from conftest import png_bytes


def brute_laplacian_variance(grid: np.ndarray) -> float:
    """Independent oracle: explicit single-loop 4-neighbour convolution."""
    g = np.asarray(grid, dtype=np.float64)
    h, w = g.shape
    responses = []
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            r = g[i - 1, j] + g[i + 1, j] + g[i, j - 1] + g[i, j + 1] - 4 * g[i, j]
            responses.append(r)
    mean = sum(responses) / len(responses)
    return sum((r - mean) ** 2 for r in responses) / len(responses)


def brute_entropy(grid: np.ndarray) -> float:
    """Independent oracle: dict-based histogram and explicit log sum."""
    counts: dict[int, int] = {}
    flat = [int(v) for v in np.asarray(grid).ravel()]
    for v in flat:
        counts[v] = counts.get(v, 0) + 1
    n = len(flat)
    return -sum((c / n) * np.log2(c / n) for c in counts.values())


def test_laplacian_constant_is_zero():
    assert metrics.laplacian_variance(np.full((16, 16), 37.0)) == 0.0


def test_laplacian_center_impulse_single_interior_pixel():
    g = np.zeros((3, 3))
    g[1, 1] = 1.0
    # single interior response (-4): population variance over one value is 0
    assert metrics.laplacian_variance(g) == 0.0


def test_laplacian_checkerboard_matches_brute_force():
    g = np.indices((8, 8)).sum(axis=0) % 2 * 255
    assert metrics.laplacian_variance(g) == pytest.approx(brute_laplacian_variance(g), rel=1e-12)


def test_laplacian_random_grids_match_oracle(rng):
    for _ in range(25):
        h, w = rng.integers(3, 33, size=2)
        g = rng.integers(0, 256, size=(h, w)).astype(np.float64)
        assert metrics.laplacian_variance(g) == pytest.approx(
            brute_laplacian_variance(g), rel=1e-9)


def test_laplacian_too_small_errors():
    with pytest.raises(ValueError):
        metrics.laplacian_variance(np.zeros((2, 5)))


def test_entropy_examples():
    assert metrics.shannon_entropy(np.full((10, 10), 128, dtype=np.uint8)) == 0.0
    two = np.array([[0, 255], [0, 255]], dtype=np.uint8)
    assert metrics.shannon_entropy(two) == pytest.approx(1.0)
    uniform = np.arange(256, dtype=np.uint8).reshape(16, 16)
    assert metrics.shannon_entropy(uniform) == pytest.approx(8.0)


def test_entropy_random_grids_match_oracle(rng):
    for _ in range(25):
        h, w = rng.integers(1, 33, size=2)
        g = rng.integers(0, 256, size=(h, w)).astype(np.uint8)
        assert metrics.shannon_entropy(g) == pytest.approx(brute_entropy(g), rel=1e-9)


def test_mean_luminance():
    assert metrics.mean_luminance(np.zeros((4, 4, 3), dtype=np.uint8)) == 0.0
    assert metrics.mean_luminance(np.full((4, 4, 3), 255, dtype=np.uint8)) == 1.0
    red = np.zeros((4, 4, 3), dtype=np.uint8)
    red[..., 0] = 255
    assert metrics.mean_luminance(red) == 1.0


def test_grayscale_bt601():
    rgb = np.array([[[100, 200, 50]]], dtype=np.uint8)
    expected = round(0.299 * 100 + 0.587 * 200 + 0.114 * 50)
    assert metrics.to_grayscale(rgb)[0, 0] == expected


def test_scale_normalize_geometry():
    g = np.zeros((100, 400), dtype=np.uint8)
    out = metrics.scale_normalize(g)
    assert out.shape == (128, 512)
    assert metrics.scale_normalize(np.zeros((512, 256), dtype=np.uint8)).shape == (512, 256)


def test_decode_valid_image():
    px = np.array([[[255, 0, 0], [0, 255, 0]], [[0, 0, 255], [255, 255, 255]]], dtype=np.uint8)
    out = metrics.decode_and_validate(png_bytes(px))
    assert out is not None
    assert out.shape == (2, 2, 3)
    np.testing.assert_array_equal(out, px)


def test_decode_zero_length_is_corrupted():
    assert metrics.decode_and_validate(b"") is None


def test_decode_truncated_payload_is_corrupted(rng):
    data = png_bytes(rng.integers(0, 256, size=(64, 64, 3)))
    assert metrics.decode_and_validate(data[: len(data) // 2]) is None
