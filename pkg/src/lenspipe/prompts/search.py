"""Training-free system-prompt search: a greedy rewrite-and-evaluate loop.

Each iteration feeds the current best prompt and its failure summaries to a
rewriter; the candidate is accepted only on a strict score improvement, so
the best-score history is nondecreasing by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

log = logging.getLogger(__name__)

Evaluate = Callable[[str], tuple[float, list[str]]]
Rewrite = Callable[[str, list[str]], str]


@dataclass
class SearchResult:
    best_prompt: str
    best_score: float
    history: list[float]  # best-so-far score per iteration, initial first


def system_prompt_search(initial: str, evaluate: Evaluate, rewrite: Rewrite,
                         iterations: int) -> SearchResult:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    best_prompt = initial
    best_score, failures = evaluate(initial)
    history = [best_score]
    for i in range(iterations):
        try:
            candidate = rewrite(best_prompt, failures)
        except Exception as exc:
            log.warning("rewrite failed on iteration %d, skipping: %s", i + 1, exc)
            history.append(best_score)
            continue
        score, candidate_failures = evaluate(candidate)
        if score > best_score:
            best_prompt, best_score, failures = candidate, score, candidate_failures
        history.append(best_score)
    assert all(a <= b for a, b in zip(history, history[1:]))
    return SearchResult(best_prompt=best_prompt, best_score=best_score, history=history)
