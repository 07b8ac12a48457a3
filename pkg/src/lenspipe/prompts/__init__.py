"""Taxonomy-driven prompt construction, rubric rewards, and prompt search."""

from .assets import TASKS, load_asset, reasoner_prompt_for
from .chat import (
    ChatError,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    LLMClient,
    TransportError,
)
from .forge import (
    BASE_RUBRIC_NAMES,
    GLOBAL_RUBRIC_NAME,
    GLOBAL_RUBRIC_TEXT,
    FormatError,
    RubricSet,
    VerdictFormatError,
    aggregate_rewards,
    build_promptgen_request,
    build_reward_request,
    build_rubric_request,
    collect_verdicts,
    parse_promptgen_response,
    parse_rubrics,
    parse_verdict,
    prompt_record,
    serialize_prompts,
)
from .search import SearchResult, system_prompt_search
from .taxonomy import (
    CATEGORIES,
    DIMENSIONS,
    Taxonomy,
    TaxonomyError,
    default_taxonomy,
    load_taxonomy,
    sample_item_request,
)

__all__ = [
    "TASKS",
    "load_asset",
    "reasoner_prompt_for",
    "ChatError",
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "LLMClient",
    "TransportError",
    "BASE_RUBRIC_NAMES",
    "GLOBAL_RUBRIC_NAME",
    "GLOBAL_RUBRIC_TEXT",
    "FormatError",
    "RubricSet",
    "VerdictFormatError",
    "aggregate_rewards",
    "build_promptgen_request",
    "build_reward_request",
    "build_rubric_request",
    "collect_verdicts",
    "parse_promptgen_response",
    "parse_rubrics",
    "parse_verdict",
    "prompt_record",
    "serialize_prompts",
    "SearchResult",
    "system_prompt_search",
    "CATEGORIES",
    "DIMENSIONS",
    "Taxonomy",
    "TaxonomyError",
    "default_taxonomy",
    "load_taxonomy",
    "sample_item_request",
]
