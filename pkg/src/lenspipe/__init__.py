"""lenspipe: data curation and training-efficiency toolkit for T2I pipelines.

Corpus filtering, near-duplicate removal, resolution-bucket scheduling,
timestep sampling, reward/distillation loss math, prompt and rubric
construction, and compute accounting, behind one CLI.
"""

__version__ = "0.1.0"

from .kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
