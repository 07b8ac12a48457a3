"""Category -> sub-category -> item taxonomy and sampling for RL prompt construction.

The bundled taxonomy seeds only the handful of published example items; real
runs supply their own item set through the same JSON schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

CATEGORIES = (
    "Human",
    "Object",
    "Animal",
    "Plant",
    "Scene",
    "Food",
    "Event",
    "Fictional World",
    "Text",
    "UI and Graphic Design",
)

DIMENSIONS = ("Attribute", "Spatial Relationship", "Count", "Interaction", "Color")


class TaxonomyError(ValueError):
    pass


@dataclass
class Taxonomy:
    categories: dict[str, dict[str, list[str]]]

    def __post_init__(self):
        if tuple(self.categories) != CATEGORIES:
            raise TaxonomyError(f"categories must be exactly {CATEGORIES}, in order")
        for cat, subs in self.categories.items():
            for sub, items in subs.items():
                if len(set(items)) != len(items):
                    raise TaxonomyError(f"duplicate items in {cat}/{sub}")

    def items(self) -> list[str]:
        out = []
        for subs in self.categories.values():
            for items in subs.values():
                out.extend(items)
        return out

    def item_count(self) -> int:
        return len(self.items())


def load_taxonomy(path: str | Path) -> Taxonomy:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return _from_obj(data)


def default_taxonomy() -> Taxonomy:
    data = json.loads(
        resources.files(__package__).joinpath("data", "taxonomy.json").read_text("utf-8")
    )
    return _from_obj(data)


def _from_obj(data: dict) -> Taxonomy:
    if not isinstance(data, dict):
        raise TaxonomyError("taxonomy file must be a JSON object")
    missing = [c for c in CATEGORIES if c not in data]
    if missing:
        raise TaxonomyError(f"missing categories {missing}")
    extra = [c for c in data if c not in CATEGORIES]
    if extra:
        raise TaxonomyError(f"unknown categories {extra}")
    ordered = {c: {str(s): [str(i) for i in items] for s, items in data[c].items()}
               for c in CATEGORIES}
    return Taxonomy(categories=ordered)


def sample_item_request(t: Taxonomy, rng: np.random.Generator) -> tuple[str, tuple[str, ...]]:
    """Uniform item plus a uniform-size (1..4) dimension subset, no replacement."""
    items = t.items()
    if not items:
        raise TaxonomyError("taxonomy has no items")
    item = items[int(rng.integers(len(items)))]
    k = int(rng.integers(1, 5))
    dims = tuple(DIMENSIONS[i] for i in rng.choice(len(DIMENSIONS), size=k, replace=False))
    return item, dims
