"""Checksummed prompt text assets.

Every system prompt the toolkit sends is loaded from a file here and
verified against a pinned sha256, so a built request can be asserted
byte-identical to its source asset.
"""

from __future__ import annotations

import hashlib
from importlib import resources

TASKS = (
    "general",
    "geneval",
    "oneig",
    "longtext-cvtg",
    "captioning",
    "rl-promptgen",
    "rubric",
    "reward",
)

_FILES = {
    "general": "general.txt",
    "geneval": "geneval.txt",
    "oneig": "oneig.txt",
    "longtext-cvtg": "longtext_cvtg.txt",
    "captioning": "captioning.txt",
    "rl-promptgen": "rl_promptgen.txt",
    "rubric": "rubric_gen.txt",
    "reward": "reward_system.txt",
    "reward-user-template": "reward_user.txt",
}

CHECKSUMS = {
    "captioning": "b6abb8ea53bb5dc57653fa1a31e81c05bccdfcc86d0f8799ead18f3813d51154",
    "general": "00d0153a34a93e07fa9fe5f134785150b2d4ba37f4e42bca6f5bc224c594835f",
    "geneval": "60b0f8579e059ce5272f91fbd99c6f76a85c19a18729c47735e3e5ebdec3b4cd",
    "longtext-cvtg": "459b4cfb38d950fbc9df578e03f8082601d753d94314c08417e530ce435b2f5c",
    "oneig": "d0f24a2218157adbf3039a2e5f8020c8977698250e18982ae91dd3e8a842277b",
    "reward": "42802af1d68463257b5c03bce7904d1a9f7bc4d6b6015a1d56c3ed018a713acb",
    "reward-user-template": "4623a3905e684bdda7cd1adf1d33a9f290feb81fce2985d737a952ee8be4a184",
    "rl-promptgen": "3b58b4563175ab31ed8351d4fac42d675c97b14471b87a390316f7dbf23e4142",
    "rubric": "37bf7c4b33503f1abe07d6efcbd3cc7977380673881fb7733b65e50819c10e4a",
}


class AssetError(ValueError):
    pass


def _read(name: str) -> bytes:
    return resources.files(__package__).joinpath("assets", _FILES[name]).read_bytes()


def load_asset(name: str) -> str:
    """Load an asset by internal name, verifying its checksum."""
    if name not in _FILES:
        raise AssetError(f"unknown asset {name!r}; known: {sorted(_FILES)}")
    raw = _read(name)
    digest = hashlib.sha256(raw).hexdigest()
    if digest != CHECKSUMS[name]:
        raise AssetError(f"asset {name!r} checksum mismatch: {digest}")
    return raw.decode("utf-8")


def reasoner_prompt_for(task: str) -> str:
    """Verbatim system prompt for a reasoner task."""
    if task not in TASKS:
        raise AssetError(f"unknown task {task!r}; known: {list(TASKS)}")
    return load_asset(task)
