"""Prompt assembly for the generator, the backend wire call and tag parsing."""
from __future__ import annotations

import enum
import hashlib
import logging
import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import BudgetUnsatisfiable, ContextOverflow, HttpError
from .http import RateLimiter, RetryPolicy, request
from .ranker import RankedCandidate

logger = logging.getLogger(__name__)

PROMPT_TOKEN_BUDGET = 4096
DEFAULT_MAX_NEW_TOKENS = 256

IN_CONTEXT_EXAMPLE = (
    'For example, to "Who is Rue Madame Curie in Beirut, Lebanon named after?", write: '
    '"<CHOICE> [write_here_your_chosen_source] </CHOICE> <ANSWER> Marie Curie </ANSWER> '
    'Based on the provided information, ..."'
)

_PREAMBLE = ("For {k} knowledge graphs, an extract from the RDF/XML file is provided; "
             "the names of the knowledge graphs are: {names}. "
             'We want to find an answer to: "{question}". These are the extracts:\n')
_CLOSING = 'Give me a simple answer to "{question}". {instructions}'
_INSTRUCTIONS = ("Only use the provided information. First, choose the extract that best allows "
                 "you to answer among: {names}. Delimit your chosen answer with the tags "
                 "<CHOICE> </CHOICE>. Second, give your answer by delimiting it with the tags "
                 "<ANSWER> </ANSWER>. Your answer should be concise. If it is a person, I need "
                 "the first name and the last name. {example}")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_CHOICE_RE = re.compile(r"<CHOICE>(.*?)</CHOICE>", re.S | re.I)
_ANSWER_RE = re.compile(r"<ANSWER>(.*?)</ANSWER>", re.S | re.I)
_REFUSAL_RE = re.compile(r"no relevant information", re.I)


class Ordering(str, enum.Enum):
    TAIL_BEST = "tail_best"  # rank 1 closest to the end of the prompt
    HEAD_BEST = "head_best"


def count_tokens(text: str) -> int:
    """Word-and-punctuation count, a stand-in when no backend tokenizer is wired in."""
    return len(_TOKEN_RE.findall(text))


@dataclass(frozen=True)
class PromptCandidate:
    candidate: RankedCandidate
    name: str
    text: str


@dataclass(frozen=True)
class PromptSpec:
    anchor: str
    candidates: tuple[PromptCandidate, ...]
    ordering: Ordering = Ordering.TAIL_BEST
    token_budget: int = PROMPT_TOKEN_BUDGET
    in_context_example: str = IN_CONTEXT_EXAMPLE


@dataclass(frozen=True)
class Prompt:
    text: str
    token_count: int
    included_ranks: tuple[int, ...]
    dropped_ranks: tuple[int, ...] = ()

    def __str__(self):
        return self.text


def extract_header(name: str) -> str:
    return f"[{name}]"


def _render(spec: PromptSpec, cands: Sequence[PromptCandidate]) -> str:
    ordered = sorted(cands, key=lambda c: c.candidate.rank,
                     reverse=spec.ordering is Ordering.TAIL_BEST)
    names = ", ".join(c.name for c in ordered)
    body = "".join(f"{extract_header(c.name)}\n{c.text.strip()}\n\n" for c in ordered)
    instructions = _INSTRUCTIONS.format(names=names, example=spec.in_context_example)
    return (_PREAMBLE.format(k=len(ordered), names=names, question=spec.anchor)
            + body
            + _CLOSING.format(question=spec.anchor, instructions=instructions))


def assemble_prompt(spec: PromptSpec, tokenizer: Callable[[str], int] = count_tokens) -> Prompt:
    """Render the prompt, dropping whole extracts from the least relevant end until it fits."""
    if not spec.candidates:
        raise ValueError("at least one candidate is required")
    kept = sorted(spec.candidates, key=lambda c: c.candidate.rank)
    dropped: list[int] = []
    while True:
        text = _render(spec, kept)
        n = tokenizer(text)
        if n <= spec.token_budget:
            return Prompt(text, n, tuple(c.candidate.rank for c in kept), tuple(dropped))
        if len(kept) == 1:
            raise BudgetUnsatisfiable(
                f"a single extract needs {n} tokens, budget is {spec.token_budget}")
        dropped.append(kept.pop().candidate.rank)


def prompt_body(prompt_text: str) -> str:
    """The extracts section of a rendered prompt."""
    start = prompt_text.index("These are the extracts:\n") + len("These are the extracts:\n")
    end = prompt_text.rindex('Give me a simple answer to "')
    return prompt_text[start:end]


def call_generator(backend: str, prompt: str, max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS,
                   temperature: float = 0.0, seed: int = 0, policy: RetryPolicy | None = None,
                   limiter: RateLimiter | None = None, session=None) -> str:
    """POST ``{prompt, max_new_tokens, temperature, seed}`` and return the ``text`` field."""
    payload = {"prompt": prompt, "max_new_tokens": max_new_tokens,
               "temperature": temperature, "seed": seed}
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]
    try:
        resp = request("POST", backend, json=payload, policy=policy, limiter=limiter, session=session)
    except HttpError as exc:
        if exc.status == 413:
            raise ContextOverflow(str(exc)) from exc
        raise
    body = resp.json()
    if isinstance(body, dict) and body.get("error") == "context_overflow":
        raise ContextOverflow(body.get("detail", "backend reported context overflow"))
    text = body["text"]
    logger.info("generator prompt=%s completion=%s", digest,
                hashlib.sha256(text.encode("utf-8")).hexdigest()[:16])
    return text


@dataclass(frozen=True)
class GenOutcome:
    choice_subject: str | None
    answer_text: str | None
    raw: str
    refusal: bool = False
    off_list: bool = False


def _norm(s: str) -> str:
    return " ".join(s.split()).casefold()


def parse_generation(raw: str, candidate_subjects: Sequence[str] = ()) -> GenOutcome:
    """Pull the first CHOICE and ANSWER spans out of a completion. Never raises."""
    raw = raw or ""
    m = _CHOICE_RE.search(raw)
    choice = m.group(1).strip() if m else None
    m = _ANSWER_RE.search(raw)
    answer = m.group(1).strip() if m else None
    off_list = False
    if choice is not None and candidate_subjects:
        listed = {_norm(s): s for s in candidate_subjects}
        key = _norm(choice.strip("[]"))
        if key in listed:
            choice = listed[key]
        else:
            off_list = True
    return GenOutcome(choice or None, answer or None, raw, bool(_REFUSAL_RE.search(raw)), off_list)


def render_completion(choice: str, answer: str, tail: str = "Based on the provided information, ...") -> str:
    return f"<CHOICE> {choice} </CHOICE> <ANSWER> {answer} </ANSWER> {tail}"
