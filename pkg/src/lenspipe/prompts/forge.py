"""Builders and strict parsers for prompt generation, rubrics, and rewards.

Parsers are total: any input yields either a value or a classified
FormatError naming the violated rule, never an unhandled crash.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .assets import load_asset
from .chat import ChatMessage, ChatRequest, ChatResponse, LLMClient, TransportError
from .chat import PROMPTGEN_MODEL, REWARD_MODEL

log = logging.getLogger(__name__)

PROMPT_KEYS = ("prompt-1", "prompt-2", "prompt-3", "prompt-4", "prompt-5")

MAX_GENERATED_RUBRICS = 10

BASE_RUBRIC_NAMES = (
    "Object Count Consistency",
    "Object Placement and Spatial Reasoning",
    "Action Accuracy",
    "Attribute Accuracy",
    "OCR Alignment",
    "Structural Integrity",
)

GLOBAL_RUBRIC_NAME = "Structural Integrity (Overall)"
GLOBAL_RUBRIC_TEXT = (
    "Verify that the entire image is structurally coherent and physically plausible, "
    "with no missing, duplicated, disconnected, distorted, floating, merged, or "
    "incorrectly placed parts; all subjects, objects, perspective relationships, and "
    "spatial connections should appear complete, aligned, and naturally integrated "
    "into the scene."
)


class FormatError(ValueError):
    """A response violated its output contract."""

    def __init__(self, rule: str, message: str, fragment: str = ""):
        super().__init__(f"{rule}: {message}")
        self.rule = rule
        self.fragment = fragment[:200]


class VerdictFormatError(FormatError):
    pass


def _content(r: ChatResponse | str) -> str:
    return r.content if isinstance(r, ChatResponse) else r


def _load_json_object(text: str, *, reject_fences: bool) -> dict:
    stripped = text.strip()
    if reject_fences and stripped.startswith("```"):
        raise FormatError("markdown-fence", "payload wrapped in markdown fences", stripped)
    try:
        obj = json.loads(stripped)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise FormatError("invalid-json", f"not parsable JSON ({exc})", stripped) from exc
    if not isinstance(obj, dict):
        raise FormatError("not-an-object",
                          f"expected a single JSON object, got {type(obj).__name__}", stripped)
    return obj


def build_promptgen_request(item: str, dims: tuple[str, ...],
                            temperature: float = 0.7) -> ChatRequest:
    """Five-prompt generation request for one taxonomy item."""
    if not dims:
        raise ValueError("dims must be nonempty")
    user = f"Entity: {item}\nRequired keypoints: {', '.join(dims)}"
    return ChatRequest(
        model=PROMPTGEN_MODEL,
        temperature=temperature,
        messages=[ChatMessage("system", load_asset("rl-promptgen")),
                  ChatMessage("user", user)],
    )


def parse_promptgen_response(r: ChatResponse | str) -> list[str]:
    """Accept only an object with exactly the five prompt keys, string values."""
    obj = _load_json_object(_content(r), reject_fences=True)
    missing = [k for k in PROMPT_KEYS if k not in obj]
    if missing:
        raise FormatError("missing-key", f"missing keys {missing}", _content(r))
    extra = sorted(set(obj) - set(PROMPT_KEYS))
    if extra:
        raise FormatError("extra-key", f"unexpected keys {extra}", _content(r))
    for k in PROMPT_KEYS:
        if not isinstance(obj[k], str):
            raise FormatError("non-string-value", f"value of {k!r} is not a string", _content(r))
    return [obj[k] for k in PROMPT_KEYS]


def serialize_prompts(prompts: list[str]) -> str:
    if len(prompts) != len(PROMPT_KEYS):
        raise ValueError(f"expected {len(PROMPT_KEYS)} prompts")
    return json.dumps(dict(zip(PROMPT_KEYS, prompts)), ensure_ascii=False)


@dataclass
class RubricSet:
    entries: list[tuple[str, str]]  # (short name, check description); global last

    def __post_init__(self):
        if len(self.entries) > MAX_GENERATED_RUBRICS + 1:
            raise ValueError(f"at most {MAX_GENERATED_RUBRICS + 1} rubrics allowed")
        if not self.entries or self.entries[-1] != (GLOBAL_RUBRIC_NAME, GLOBAL_RUBRIC_TEXT):
            raise ValueError("rubric set must end with the global rubric")

    def generated(self) -> list[tuple[str, str]]:
        return self.entries[:-1]

    def to_obj(self) -> list[list[str]]:
        return [[name, text] for name, text in self.entries]


def _valid_rubric_key(key: str) -> bool:
    if key in BASE_RUBRIC_NAMES:
        return True
    if key.endswith(")") and " (" in key:
        base, qualifier = key.split(" (", 1)
        return base in BASE_RUBRIC_NAMES and len(qualifier) > 1
    return False


def build_rubric_request(prompt: str, temperature: float = 0.7) -> ChatRequest:
    return ChatRequest(
        model=PROMPTGEN_MODEL,
        temperature=temperature,
        messages=[ChatMessage("system", load_asset("rubric")),
                  ChatMessage("user", prompt)],
    )


def parse_rubrics(r: ChatResponse | str) -> RubricSet:
    """Validate a rubric payload and append the global rubric."""
    text = _content(r)
    obj = _load_json_object(text, reject_fences=True)
    if len(obj) > MAX_GENERATED_RUBRICS:
        raise FormatError("too-many-rubrics",
                          f"{len(obj)} entries exceed the limit of {MAX_GENERATED_RUBRICS}", text)
    entries: list[tuple[str, str]] = []
    for key, value in obj.items():
        if not isinstance(key, str) or not isinstance(value, str):
            raise FormatError("non-string-entry", f"entry {key!r} is not string -> string", text)
        if not _valid_rubric_key(key):
            raise FormatError("unknown-rubric-key",
                              f"key {key!r} is not a base rubric name (optionally qualified); "
                              f"base names: {list(BASE_RUBRIC_NAMES)}", text)
        entries.append((key, value))
    entries.append((GLOBAL_RUBRIC_NAME, GLOBAL_RUBRIC_TEXT))
    return RubricSet(entries=entries)


def build_reward_request(user_prompt: str, rubric: tuple[str, str],
                         temperature: float = 0.0) -> ChatRequest:
    name, criterion = rubric
    template = load_asset("reward-user-template")
    user = template.format(user_prompt=user_prompt, key=name, criterion=criterion)
    return ChatRequest(
        model=REWARD_MODEL,
        temperature=temperature,
        messages=[ChatMessage("system", load_asset("reward")),
                  ChatMessage("user", user)],
    )


def parse_verdict(r: ChatResponse | str) -> int:
    text = _content(r).strip()
    if text == "1":
        return 1
    if text == "0":
        return 0
    raise VerdictFormatError("verdict-format", "expected exactly '1' or '0'", text)


def aggregate_rewards(verdicts: list[int]) -> float:
    """Raw reward for one image: the mean of its binary rubric verdicts."""
    if not verdicts:
        raise ValueError("verdicts must be nonempty")
    return float(np.mean(verdicts))


def collect_verdicts(client: LLMClient, user_prompt: str, rubrics: RubricSet,
                     format_retries: int = 2) -> list[int]:
    """One verdict per rubric; malformed answers retried then scored 0."""
    verdicts = []
    for rubric in rubrics.entries:
        request = build_reward_request(user_prompt, rubric)
        verdict = 0
        for _ in range(format_retries + 1):
            try:
                verdict = parse_verdict(client.complete(request))
                break
            except VerdictFormatError as exc:
                log.warning("verdict format violation for %r: %s", rubric[0], exc)
            except TransportError as exc:
                log.warning("reward request failed for %r: %s", rubric[0], exc)
        verdicts.append(verdict)
    return verdicts


def prompt_record(item: str, dims: tuple[str, ...], prompt: str, rubrics: RubricSet) -> dict:
    return {"item": item, "dims": list(dims), "prompt": prompt, "rubrics": rubrics.to_obj()}
