"""Input/target sequence compilation for the three generative tasks.

Mention identification (MI) sees the bare passage (full length plus
sliding windows) and lists mentions in passage order. Event detection
(ED) is queried once per event type, argument extraction (EAE) once per
legal role of the event's type; both carry the type/role names and
descriptions as prompt segments. Candidate-mention markers, the
marked/unmarked training augmentation and the typing-task reformulation
live here too.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .brat import SpanSet
from .dataset import EventRecord, Mention, Ontology, SentenceInstance

SEP = "[sep]"
MI_PREFIX = "Mentions are"
ED_PREFIX = "Event trigger is"
TYPE_PREFIX = "Event type is"
ROLE_PREFIX = "Argument role is"

MENTION_PLACEHOLDER = "<mention>"
TRIGGER_PLACEHOLDER = "<trigger>"
ARGUMENT_PLACEHOLDER = "<argument>"
TYPE_PLACEHOLDER = "<Type>"
ROLE_PLACEHOLDER = "<Role>"

MARKER_OPEN = "<m>"
MARKER_CLOSE = "</m>"
TRIGGER_OPEN = "<trigger>"
TRIGGER_CLOSE = "</trigger>"
QUERY_OPEN = "<query>"
QUERY_CLOSE = "</query>"

SEGMENT_NAMES = frozenset(
    {"type_name", "type_description", "trigger_marker", "trigger_phrase",
     "role_name", "role_description"}
)


class Task(str, Enum):
    MI_TRIGGER = "mi_trigger"
    MI_ARGUMENT = "mi_argument"
    MI_ENTITY = "mi_entity"
    ED = "ed"
    EAE = "eae"
    ED_TYPING = "ed_typing"
    EAE_TYPING = "eae_typing"


MI_TASKS = {Task.MI_TRIGGER, Task.MI_ARGUMENT, Task.MI_ENTITY}

KIND_TO_MI_TASK = {
    "trigger": Task.MI_TRIGGER,
    "argument": Task.MI_ARGUMENT,
    "entity": Task.MI_ENTITY,
}


class UngroundedMention(ValueError):
    pass


class UnknownRole(ValueError):
    pass


@dataclass
class CompileConfig:
    window_size: int = 10
    window_step: int = 4
    neg_ratio: int = 10
    mention_kind: str = "entity"  # entity | trigger | argument
    segment_toggles: frozenset[str] = SEGMENT_NAMES
    marker_mode: str = "none"  # none | gold | predicted
    augmentation: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.window_step > self.window_size:
            raise ValueError("window_step must not exceed window_size")
        if self.neg_ratio < 0:
            raise ValueError("neg_ratio must be >= 0")
        if self.mention_kind not in KIND_TO_MI_TASK:
            raise ValueError(f"unknown mention_kind {self.mention_kind!r}")
        unknown = set(self.segment_toggles) - SEGMENT_NAMES
        if unknown:
            raise ValueError(f"unknown prompt segments: {sorted(unknown)}")


@dataclass
class PromptInstance:
    task: Task
    input_seq: str
    target_seq: str
    meta: dict
    polarity: str = "positive"  # positive | negative

    def to_json(self) -> dict:
        return {
            "task": self.task.value,
            "input_seq": self.input_seq,
            "target_seq": self.target_seq,
            "meta": self.meta,
            "polarity": self.polarity,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PromptInstance":
        return cls(Task(d["task"]), d["input_seq"], d["target_seq"], d["meta"], d["polarity"])

    @property
    def request_key(self) -> str:
        """Stable identifier for pairing generation requests with answers."""
        keyed = {
            k: self.meta.get(k)
            for k in ("task", "doc_id", "sent_index", "window", "query_event_type",
                      "query_role", "trigger_span", "trigger_surface", "candidate_span")
        }
        keyed["task"] = self.task.value
        return json.dumps(keyed, sort_keys=True, ensure_ascii=False)


# ---------------------------------------------------------------------------
# Deterministic per-instance randomness


def stable_rng(*parts) -> random.Random:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


# ---------------------------------------------------------------------------
# Word tokenization and sliding windows


def word_spans(text: str) -> list[tuple[int, int]]:
    return [(m.start(), m.end()) for m in re.finditer(r"\S+", text)]


def window_positions(n_words: int, size: int, step: int) -> list[tuple[int, int]]:
    """Word-index windows [start, end); the last window clamps to the text end."""
    if n_words <= 0:
        return []
    count = 1 + max(0, math.ceil((n_words - size) / step))
    return [(i * step, min(i * step + size, n_words)) for i in range(count)]


# ---------------------------------------------------------------------------
# Gold mention selection


def _passage_order(mentions: list[Mention]) -> list[Mention]:
    return sorted(mentions, key=lambda m: m.span.fragments)


def mentions_of_kind(sentence: SentenceInstance, kind: str) -> list[Mention]:
    """Gold mentions of a kind (entity/trigger/argument), deduplicated and
    in passage order."""
    if kind == "entity":
        pool = list(sentence.entities)
    elif kind == "trigger":
        pool = [ev.trigger for ev in sentence.events]
    elif kind == "argument":
        pool = [a.mention for ev in sentence.events for a in ev.arguments]
    else:
        raise ValueError(f"unknown mention kind {kind!r}")
    seen = set()
    unique = []
    for m in pool:
        key = (m.span.fragments, m.label)
        if key not in seen:
            seen.add(key)
            unique.append(m)
    return _passage_order(unique)


# ---------------------------------------------------------------------------
# Target rendering (inverted by clinevent.decoding)


def render_mi_target(surfaces: list[str]) -> str:
    if not surfaces:
        return f"{MI_PREFIX} {MENTION_PLACEHOLDER}"
    return f"{MI_PREFIX} " + f" {SEP} ".join(surfaces)


def render_ed_target(surfaces: list[str]) -> str:
    if not surfaces:
        return f"{ED_PREFIX} {TRIGGER_PLACEHOLDER}"
    return f"{ED_PREFIX} " + f" {SEP} ".join(surfaces)


def render_eae_target(role: str, surfaces: list[str]) -> str:
    if not surfaces:
        return f"{role} is {ARGUMENT_PLACEHOLDER}"
    return f"{role} is " + f" {SEP} ".join(surfaces)


def render_type_target(type_name: str | None) -> str:
    return f"{TYPE_PREFIX} {type_name if type_name else TYPE_PLACEHOLDER}."


def render_role_target(role: str | None) -> str:
    return f"{ROLE_PREFIX} {role if role else ROLE_PLACEHOLDER}."


# ---------------------------------------------------------------------------
# Marker injection


def strip_markers(text: str) -> str:
    return text.replace(MARKER_OPEN, "").replace(MARKER_CLOSE, "")


def _check_grounded(text: str, mentions: list[Mention]) -> None:
    for m in mentions:
        if m.span.end > len(text) or m.span.start < 0:
            raise UngroundedMention(f"{m.surface!r} at {m.span.fragments} outside passage")
        if m.span.extract(text) != m.surface:
            raise UngroundedMention(
                f"{m.surface!r} does not match passage text at {m.span.fragments}"
            )


def _wrap_spans(text: str, wraps: list[tuple[SpanSet, str, str]]) -> str:
    """Insert open/close tokens around every fragment of every span.

    Deleting the inserted tokens recovers `text` exactly. At equal
    positions closes come before opens, longer spans open first and inner
    spans close first, so nested mentions wrap innermost-first.
    """
    inserts: list[tuple[int, int, int, str]] = []
    for span, open_tok, close_tok in wraps:
        for start, end in span.fragments:
            # sort key: position, closes-before-opens, then nesting order
            inserts.append((start, 1, -end, open_tok))
            inserts.append((end, 0, -start, close_tok))
    inserts.sort(key=lambda t: (t[0], t[1], t[2]))
    out = []
    cursor = 0
    for pos, _, _, token in inserts:
        out.append(text[cursor:pos])
        out.append(token)
        cursor = pos
    out.append(text[cursor:])
    return "".join(out)


def inject_markers(sentence_text: str, mentions: list[Mention], kind: str = "entity") -> str:
    """Wrap each candidate mention's fragments with <m>...</m>."""
    if kind not in KIND_TO_MI_TASK:
        raise ValueError(f"unknown mention kind {kind!r}")
    if not mentions:
        return sentence_text
    _check_grounded(sentence_text, mentions)
    return _wrap_spans(
        sentence_text, [(m.span, MARKER_OPEN, MARKER_CLOSE) for m in mentions]
    )


# ---------------------------------------------------------------------------
# MI compilation


def _base_meta(sentence: SentenceInstance, task: Task, **extra) -> dict:
    meta = {"task": task.value, "doc_id": sentence.doc_id, "sent_index": sentence.sent_index}
    meta.update(extra)
    return meta


def compile_mi(
    sentence: SentenceInstance, cfg: CompileConfig, mode: str = "train"
) -> list[PromptInstance]:
    """Full-passage instance plus one instance per sliding-window position.

    Targets list the gold mentions (of cfg.mention_kind) fully inside the
    window, in passage order; a window without mentions yields the
    placeholder target.
    """
    task = KIND_TO_MI_TASK[cfg.mention_kind]
    gold = mentions_of_kind(sentence, cfg.mention_kind)
    words = word_spans(sentence.text)

    def instance(window: tuple[int, int] | None) -> PromptInstance:
        if window is None:
            char_start, char_end = 0, len(sentence.text)
            input_seq = sentence.text
        else:
            char_start = words[window[0]][0]
            char_end = words[window[1] - 1][1]
            input_seq = sentence.text[char_start:char_end]
        inside = [m for m in gold if m.span.within(char_start, char_end)]
        target = render_mi_target([m.surface for m in inside]) if mode == "train" else ""
        meta = _base_meta(
            sentence, task,
            window=list(window) if window else None,
            window_char=[char_start, char_end],
        )
        polarity = "negative" if (mode == "train" and not inside) else "positive"
        return PromptInstance(task, input_seq, target, meta, polarity)

    out = [instance(None)]
    for window in window_positions(len(words), cfg.window_size, cfg.window_step):
        out.append(instance(window))
    return out


# ---------------------------------------------------------------------------
# ED compilation


def _marker_mentions(
    sentence: SentenceInstance,
    cfg: CompileConfig,
    kind: str,
    candidates: list[Mention] | None,
) -> list[Mention]:
    if cfg.marker_mode == "none":
        return []
    if cfg.marker_mode == "gold":
        return mentions_of_kind(sentence, kind)
    if cfg.marker_mode == "predicted":
        return list(candidates or [])
    raise ValueError(f"unknown marker_mode {cfg.marker_mode!r}")


def _ed_passage(sentence, cfg, candidates) -> str:
    markers = _marker_mentions(sentence, cfg, "trigger", candidates)
    return inject_markers(sentence.text, markers, "trigger") if markers else sentence.text


def _ed_prompt(passage: str, type_name: str, description: str, toggles) -> str:
    segments = [passage]
    if "type_name" in toggles:
        segments.append(f"{TYPE_PREFIX} {type_name}.")
    if "type_description" in toggles and description:
        segments.append(description)
    return "\n".join(segments)


def _dedup_triggers(events: list[EventRecord], event_type: str) -> list[Mention]:
    seen = set()
    out = []
    for ev in events:
        if ev.event_type != event_type:
            continue
        if ev.trigger.span.fragments in seen:
            continue
        seen.add(ev.trigger.span.fragments)
        out.append(ev.trigger)
    return _passage_order(out)


def compile_ed(
    sentence: SentenceInstance,
    ontology: Ontology,
    cfg: CompileConfig,
    mode: str = "train",
    candidates: list[Mention] | None = None,
) -> list[PromptInstance]:
    """One query per event type at inference; positives plus sampled
    negatives (neg_ratio per positive, without replacement) in training."""
    passage = _ed_passage(sentence, cfg, candidates)
    marked = passage != sentence.text

    positive_types = []
    for ev in sentence.events:
        if ev.event_type not in positive_types:
            positive_types.append(ev.event_type)

    if mode == "inference":
        queried = ontology.type_names
    else:
        negatives = [t for t in ontology.type_names if t not in positive_types]
        n_neg = min(cfg.neg_ratio * len(positive_types), len(negatives))
        rng = stable_rng(cfg.seed, "ed-neg", sentence.doc_id, sentence.sent_index)
        sampled = set(rng.sample(negatives, n_neg))
        queried = [t for t in ontology.type_names if t in positive_types or t in sampled]

    out = []
    for type_name in queried:
        triggers = _dedup_triggers(sentence.events, type_name)
        target = render_ed_target([t.surface for t in triggers]) if mode == "train" else ""
        meta = _base_meta(
            sentence, Task.ED, query_event_type=type_name, marked=marked
        )
        polarity = "negative" if (mode == "train" and not triggers) else "positive"
        out.append(
            PromptInstance(
                Task.ED,
                _ed_prompt(passage, type_name, ontology.description_of(type_name), cfg.segment_toggles),
                target,
                meta,
                polarity,
            )
        )
    return out


# ---------------------------------------------------------------------------
# EAE compilation


def _role_description(ontology: Ontology, event_type: str, role: str) -> str:
    for entry in ontology.roles_for(event_type):
        if entry.name == role:
            return entry.description
    raise UnknownRole(f"role {role!r} is not legal for {event_type}")


def build_eae_input(
    sentence_text: str,
    event_type: str,
    type_description: str,
    trigger_surface: str,
    role: str,
    role_description: str,
    trigger_span: SpanSet | None = None,
    toggles: frozenset[str] = SEGMENT_NAMES,
    marker_mentions: list[Mention] | None = None,
) -> str:
    """Assemble one argument-extraction input sequence.

    A None trigger_span (text-only predicted trigger) simply skips the
    trigger marker wrap; the trigger phrase segment still names it.
    """
    wraps = []
    if "trigger_marker" in toggles and trigger_span is not None:
        wraps.append((trigger_span, TRIGGER_OPEN, TRIGGER_CLOSE))
    wraps.extend((m.span, MARKER_OPEN, MARKER_CLOSE) for m in (marker_mentions or []))
    passage = _wrap_spans(sentence_text, wraps) if wraps else sentence_text
    return _eae_prompt(
        passage, event_type, type_description, trigger_surface, role, role_description, toggles
    )


def _eae_prompt(passage, event_type, type_desc, trigger_surface, role, role_desc, toggles) -> str:
    segments = [passage]
    if "type_name" in toggles:
        segments.append(f"{TYPE_PREFIX} {event_type}.")
    if "type_description" in toggles and type_desc:
        segments.append(type_desc)
    if "trigger_phrase" in toggles:
        segments.append(f"{ED_PREFIX} {trigger_surface}.")
    if "role_name" in toggles:
        segments.append(f"{ROLE_PREFIX} {role}.")
    if "role_description" in toggles and role_desc:
        segments.append(role_desc)
    return "\n".join(segments)


def compile_eae(
    sentence: SentenceInstance,
    event: EventRecord,
    ontology: Ontology,
    cfg: CompileConfig,
    mode: str = "train",
    candidates: list[Mention] | None = None,
) -> list[PromptInstance]:
    """One query per argument role legal for the event's type.

    At inference every legal role is queried; in training the roles with
    no gold argument are negatives, sampled at neg_ratio per positive.
    """
    legal = ontology.role_names(event.event_type)
    args_by_role: dict[str, list[Mention]] = {}
    for a in event.arguments:
        args_by_role.setdefault(a.role, []).append(a.mention)
    for role in args_by_role:
        if role not in legal:
            raise UnknownRole(f"gold role {role!r} illegal for {event.event_type}")

    if mode == "inference":
        queried = legal
    else:
        positives = [r for r in legal if r in args_by_role]
        negatives = [r for r in legal if r not in args_by_role]
        n_neg = min(cfg.neg_ratio * len(positives), len(negatives))
        rng = stable_rng(
            cfg.seed, "eae-neg", sentence.doc_id, sentence.sent_index,
            event.trigger.span.fragments, event.event_type,
        )
        sampled = set(rng.sample(negatives, n_neg))
        queried = [r for r in legal if r in args_by_role or r in sampled]

    markers = _marker_mentions(sentence, cfg, "argument", candidates)
    _check_grounded(sentence.text, markers + [event.trigger])
    type_desc = ontology.description_of(event.event_type)

    out = []
    for role in queried:
        gold_args = _passage_order(args_by_role.get(role, []))
        target = (
            render_eae_target(role, [m.surface for m in gold_args]) if mode == "train" else ""
        )
        meta = _base_meta(
            sentence, Task.EAE,
            query_event_type=event.event_type,
            query_role=role,
            trigger_span=event.trigger.span.to_json(),
            trigger_surface=event.trigger.surface,
            marked=bool(markers),
        )
        polarity = "negative" if (mode == "train" and not gold_args) else "positive"
        out.append(
            PromptInstance(
                Task.EAE,
                build_eae_input(
                    sentence.text,
                    event.event_type,
                    type_desc,
                    event.trigger.surface,
                    role,
                    _role_description(ontology, event.event_type, role),
                    trigger_span=event.trigger.span,
                    toggles=cfg.segment_toggles,
                    marker_mentions=markers,
                ),
                target,
                meta,
                polarity,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Typing-task reformulation


def compile_typing(
    sentence: SentenceInstance,
    candidate: Mention,
    context: EventRecord | None,
    ontology: Ontology,
    mode: str = "train",
) -> PromptInstance:
    """Query one candidate mention for its event type (no context event) or
    its argument role under the given event."""
    _check_grounded(sentence.text, [candidate])
    if context is None:
        input_seq = _wrap_spans(sentence.text, [(candidate.span, QUERY_OPEN, QUERY_CLOSE)])
        matching = [
            ev.event_type for ev in sentence.events
            if ev.trigger.span.fragments == candidate.span.fragments
        ]
        target = render_type_target(matching[0] if matching else None) if mode == "train" else ""
        meta = _base_meta(
            sentence, Task.ED_TYPING, candidate_span=candidate.span.to_json(),
            candidate_surface=candidate.surface,
        )
        polarity = "negative" if (mode == "train" and not matching) else "positive"
        return PromptInstance(Task.ED_TYPING, input_seq, target, meta, polarity)

    _check_grounded(sentence.text, [context.trigger])
    passage = _wrap_spans(
        sentence.text,
        [
            (candidate.span, QUERY_OPEN, QUERY_CLOSE),
            (context.trigger.span, TRIGGER_OPEN, TRIGGER_CLOSE),
        ],
    )
    segments = [passage, f"{TYPE_PREFIX} {context.event_type}."]
    desc = ontology.description_of(context.event_type)
    if desc:
        segments.append(desc)
    segments.append(f"{ED_PREFIX} {context.trigger.surface}.")
    input_seq = "\n".join(segments)
    matching = [
        a.role for a in context.arguments
        if a.mention.span.fragments == candidate.span.fragments
    ]
    target = render_role_target(matching[0] if matching else None) if mode == "train" else ""
    meta = _base_meta(
        sentence, Task.EAE_TYPING,
        candidate_span=candidate.span.to_json(),
        candidate_surface=candidate.surface,
        query_event_type=context.event_type,
        trigger_span=context.trigger.span.to_json(),
        trigger_surface=context.trigger.surface,
    )
    polarity = "negative" if (mode == "train" and not matching) else "positive"
    return PromptInstance(Task.EAE_TYPING, input_seq, target, meta, polarity)


# ---------------------------------------------------------------------------
# Marker data augmentation


def augment_training(instances: list[PromptInstance]) -> list[PromptInstance]:
    """Pair every marked instance with an unmarked twin (same target), so a
    model trained on the export tolerates missing markers."""
    out = []
    for inst in instances:
        out.append(inst)
        twin_meta = dict(inst.meta)
        twin_meta["marked"] = False
        out.append(
            replace(inst, input_seq=strip_markers(inst.input_seq), meta=twin_meta)
        )
    return out


# ---------------------------------------------------------------------------
# JSONL export


def write_prompts(path: str | Path, instances: list[PromptInstance]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(inst.to_json(), ensure_ascii=False) + "\n")


def read_prompts(path: str | Path) -> list[PromptInstance]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(PromptInstance.from_json(json.loads(line)))
    return out
