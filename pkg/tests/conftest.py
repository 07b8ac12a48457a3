import io

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from PIL import Image

from lenspipe.manifest import ImageRecord, Manifest

settings.register_profile(
    "ci", derandomize=True, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_record(i: int, source: str = "public-real", caption: str = "a photo of a cat",
                width: int = 1024, height: int = 1024) -> ImageRecord:
    return ImageRecord(
        id=f"rec-{i:04d}",
        path=f"images/{i:04d}.png",
        width=width,
        height=height,
        source=source,
        caption=caption,
    )


def make_manifest(n: int, **kwargs) -> Manifest:
    return Manifest(records=[make_record(i, **kwargs) for i in range(n)])


def png_bytes(pixels: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels.astype(np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for status, marker in (("passed", "PASS"), ("failed", "FAIL"), ("error", "ERROR")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" not in nodeid:
                continue
            if getattr(rep, "when", "call") == "call" or marker == "ERROR":
                rows.append((nodeid.split("::")[-1], marker))
    if rows:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, marker in sorted(set(rows)):
            terminalreporter.write_line(f"{marker}  {name}")
