"""Parsing of generated output sequences and grounding back to spans.

The generative formulation returns text, not offsets; grounding maps each
predicted surface to the leftmost occurrence in the passage not already
claimed by an earlier surface of the same output. Surfaces with no
contiguous occurrence get a greedy in-order multi-fragment match over
whitespace tokens (discontinuous mentions); surfaces that still fail stay
text-only (None) and downstream scoring falls back to surface comparison.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .brat import SpanSet
from .prompts import (
    ARGUMENT_PLACEHOLDER,
    ED_PREFIX,
    MENTION_PLACEHOLDER,
    MI_PREFIX,
    MI_TASKS,
    ROLE_PLACEHOLDER,
    ROLE_PREFIX,
    SEP,
    TRIGGER_PLACEHOLDER,
    TYPE_PLACEHOLDER,
    TYPE_PREFIX,
    Task,
)

log = logging.getLogger(__name__)


class MalformedOutput(ValueError):
    """Raised only by the strict parser; the tolerant path records and skips."""


@dataclass
class DecodedOutput:
    task: Task
    surfaces: list[str]
    grounded: list[SpanSet | None]
    meta: dict = field(default_factory=dict)
    malformed: bool = False


def _split_items(remainder: str, placeholder: str) -> list[str]:
    items = [part.strip() for part in remainder.split(SEP)]
    return [i for i in items if i and i != placeholder]


def _strip_prefix(text: str, prefix: str) -> str | None:
    if text == prefix:
        return ""
    if text.startswith(prefix + " "):
        return text[len(prefix) + 1 :]
    return None


def parse_output(task: Task, text: str, query_role: str | None = None) -> list[str]:
    """Extract predicted surface strings from one generated sequence.

    Never raises: missing prefixes and (for argument extraction) a role
    reiteration that does not match the queried role are recorded and
    yield an empty list.
    """
    surfaces, malformed = parse_output_checked(task, text, query_role)
    return surfaces


def parse_output_checked(
    task: Task, text: str, query_role: str | None = None
) -> tuple[list[str], bool]:
    """parse_output plus a flag telling whether the text was malformed."""
    text = text.strip()
    if task in MI_TASKS:
        remainder = _strip_prefix(text, MI_PREFIX)
        if remainder is None:
            log.debug("malformed MI output: %r", text)
            return [], True
        return _split_items(remainder, MENTION_PLACEHOLDER), False

    if task is Task.ED:
        remainder = _strip_prefix(text, ED_PREFIX)
        if remainder is None:
            log.debug("malformed ED output: %r", text)
            return [], True
        return _split_items(remainder, TRIGGER_PLACEHOLDER), False

    if task is Task.EAE:
        if query_role is not None:
            remainder = _strip_prefix(text, f"{query_role} is")
            if remainder is None:
                log.debug("EAE output does not reiterate role %r: %r", query_role, text)
                return [], True
        else:
            m = re.match(r"^\S+ is(?: |$)", text)
            if not m:
                return [], True
            remainder = text[m.end() :]
        return _split_items(remainder, ARGUMENT_PLACEHOLDER), False

    if task is Task.ED_TYPING:
        remainder = _strip_prefix(text, TYPE_PREFIX)
        if remainder is None:
            return [], True
        name = remainder.strip().rstrip(".")
        if not name or name == TYPE_PLACEHOLDER:
            return [], False
        return [name], False

    if task is Task.EAE_TYPING:
        remainder = _strip_prefix(text, ROLE_PREFIX)
        if remainder is None:
            return [], True
        name = remainder.strip().rstrip(".")
        if not name or name == ROLE_PLACEHOLDER:
            return [], False
        return [name], False

    raise ValueError(f"unknown task {task!r}")


def parse_output_strict(task: Task, text: str, query_role: str | None = None) -> list[str]:
    surfaces, malformed = parse_output_checked(task, text, query_role)
    if malformed:
        raise MalformedOutput(f"{task.value}: {text!r}")
    return surfaces


# ---------------------------------------------------------------------------
# Grounding


def _overlaps(a: tuple[int, int], consumed: list[tuple[int, int]]) -> bool:
    return any(a[0] < e and s < a[1] for s, e in consumed)


def _find_contiguous(
    surface: str, text: str, consumed: list[tuple[int, int]]
) -> SpanSet | None:
    start = 0
    while True:
        i = text.find(surface, start)
        if i < 0:
            return None
        span = (i, i + len(surface))
        if not _overlaps(span, consumed):
            return SpanSet.single(*span)
        start = i + 1


def _find_discontinuous(
    surface: str, text: str, consumed: list[tuple[int, int]]
) -> SpanSet | None:
    """Greedy in-order match of the surface's whitespace tokens against the
    passage's tokens; consecutive matched tokens separated by a single
    space merge into one fragment, so the joined fragments equal the
    surface exactly."""
    want = surface.split()
    if not want:
        return None
    tokens = [(m.group(0), m.start(), m.end()) for m in re.finditer(r"\S+", text)]
    picked: list[tuple[int, int]] = []
    t = 0
    for w in want:
        while t < len(tokens):
            tok, s, e = tokens[t]
            t += 1
            if tok == w and not _overlaps((s, e), consumed):
                picked.append((s, e))
                break
        else:
            return None
    fragments: list[tuple[int, int]] = []
    for s, e in picked:
        if fragments and text[fragments[-1][1] : s] == " ":
            fragments[-1] = (fragments[-1][0], e)
        else:
            fragments.append((s, e))
    if len(fragments) == 1 and text[fragments[0][0] : fragments[0][1]] != surface:
        return None
    return SpanSet.from_pairs(fragments)


def ground_surfaces(surfaces: list[str], sentence_text: str) -> list[SpanSet | None]:
    """Ground each surface to character offsets, consuming matched spans so
    repeated surfaces map to successive occurrences. None = ungroundable."""
    consumed: list[tuple[int, int]] = []
    out: list[SpanSet | None] = []
    for surface in surfaces:
        span = _find_contiguous(surface, sentence_text, consumed)
        if span is None:
            span = _find_discontinuous(surface, sentence_text, consumed)
        if span is not None and span.extract(sentence_text) != surface:
            span = None
        if span is None:
            out.append(None)
            continue
        consumed.extend(span.fragments)
        out.append(span)
    return out


def decode(
    task: Task,
    text: str,
    sentence_text: str,
    meta: dict | None = None,
    query_role: str | None = None,
) -> DecodedOutput:
    """Parse one generated sequence and ground its surfaces in the passage."""
    surfaces, malformed = parse_output_checked(task, text, query_role)
    if task in (Task.ED_TYPING, Task.EAE_TYPING):
        grounded: list[SpanSet | None] = [None] * len(surfaces)
    else:
        grounded = ground_surfaces(surfaces, sentence_text)
    return DecodedOutput(task, surfaces, grounded, dict(meta or {}), malformed)
