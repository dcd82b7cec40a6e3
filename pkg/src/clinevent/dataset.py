"""Sentence-level event dataset construction from parsed BRAT documents.

Turns RawDocuments into SentenceInstances: rule-based sentence
segmentation that never splits an annotated span, event derivation from
event-typed mentions plus MODIFY relations, ontology induction, document
splits, downsampling and corpus statistics.
"""

from __future__ import annotations

import json
import logging
import math
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .brat import RawDocument, SpanSet

log = logging.getLogger(__name__)


class UnknownEventType(ValueError):
    pass


class IllegalRole(ValueError):
    pass


class TooFewDocuments(ValueError):
    pass


MODIFY_RELATION = "MODIFY"


@dataclass(frozen=True)
class Mention:
    """An annotated span with its surface text and entity-type label."""

    span: SpanSet
    surface: str
    label: str

    def to_json(self) -> dict:
        return {"span": self.span.to_json(), "surface": self.surface, "label": self.label}

    @classmethod
    def from_json(cls, d: dict) -> "Mention":
        return cls(SpanSet.from_json(d["span"]), d["surface"], d["label"])


@dataclass(frozen=True)
class ArgumentRecord:
    mention: Mention
    role: str

    def to_json(self) -> dict:
        return {"mention": self.mention.to_json(), "role": self.role}

    @classmethod
    def from_json(cls, d: dict) -> "ArgumentRecord":
        return cls(Mention.from_json(d["mention"]), d["role"])


@dataclass
class EventRecord:
    trigger: Mention
    event_type: str
    arguments: list[ArgumentRecord] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "trigger": self.trigger.to_json(),
            "event_type": self.event_type,
            "arguments": [a.to_json() for a in self.arguments],
        }

    @classmethod
    def from_json(cls, d: dict) -> "EventRecord":
        return cls(
            Mention.from_json(d["trigger"]),
            d["event_type"],
            [ArgumentRecord.from_json(a) for a in d.get("arguments", [])],
        )


@dataclass
class SentenceInstance:
    """One sentence with its mentions and fully-specified events.

    All SpanSets are sentence-local; `offset` is the sentence start in the
    original document, so document coordinates are span + offset.
    """

    doc_id: str
    sent_index: int
    text: str
    offset: int
    entities: list[Mention] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.sent_index)

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "sent_index": self.sent_index,
            "text": self.text,
            "offset": self.offset,
            "entities": [m.to_json() for m in self.entities],
            "events": [e.to_json() for e in self.events],
        }

    @classmethod
    def from_json(cls, d: dict) -> "SentenceInstance":
        return cls(
            d["doc_id"],
            d["sent_index"],
            d["text"],
            d.get("offset", 0),
            [Mention.from_json(m) for m in d.get("entities", [])],
            [EventRecord.from_json(e) for e in d.get("events", [])],
        )


@dataclass(frozen=True)
class OntologyEntry:
    name: str
    description: str = ""


@dataclass
class Ontology:
    """Event types and, per type, the legal argument roles.

    Role lists are ordered by descending corpus frequency (ties broken
    lexicographically), so `roles_by_type[t][0]` is the most common role
    for events of type `t`.
    """

    event_types: list[OntologyEntry]
    roles_by_type: dict[str, list[OntologyEntry]]

    def __post_init__(self):
        for t, roles in self.roles_by_type.items():
            names = [r.name for r in roles]
            if len(names) != len(set(names)):
                raise ValueError(f"duplicate roles for event type {t}")

    @property
    def type_names(self) -> list[str]:
        return [t.name for t in self.event_types]

    def is_event_type(self, label: str) -> bool:
        return any(t.name == label for t in self.event_types)

    def description_of(self, type_name: str) -> str:
        for t in self.event_types:
            if t.name == type_name:
                return t.description
        raise UnknownEventType(type_name)

    def roles_for(self, type_name: str) -> list[OntologyEntry]:
        if type_name not in self.roles_by_type:
            raise UnknownEventType(type_name)
        return self.roles_by_type[type_name]

    def role_names(self, type_name: str) -> list[str]:
        return [r.name for r in self.roles_for(type_name)]

    @property
    def n_event_types(self) -> int:
        return len(self.event_types)

    def n_roles(self, type_name: str) -> int:
        return len(self.roles_for(type_name))

    def all_role_names(self) -> list[str]:
        seen: dict[str, None] = {}
        for roles in self.roles_by_type.values():
            for r in roles:
                seen.setdefault(r.name, None)
        return list(seen)

    def to_json(self) -> dict:
        return {
            "event_types": [{"name": t.name, "description": t.description} for t in self.event_types],
            "roles": {
                t: [{"name": r.name, "description": r.description} for r in roles]
                for t, roles in self.roles_by_type.items()
            },
        }

    @classmethod
    def from_json(cls, d: dict) -> "Ontology":
        return cls(
            [OntologyEntry(t["name"], t.get("description", "")) for t in d["event_types"]],
            {
                t: [OntologyEntry(r["name"], r.get("description", "")) for r in roles]
                for t, roles in d["roles"].items()
            },
        )


@dataclass
class CorpusSplit:
    train: list[str]
    dev: list[str]
    test: list[str]
    seed: int

    def to_json(self) -> dict:
        return {"train": self.train, "dev": self.dev, "test": self.test, "seed": self.seed}

    @classmethod
    def from_json(cls, d: dict) -> "CorpusSplit":
        return cls(d["train"], d["dev"], d["test"], d["seed"])


# ---------------------------------------------------------------------------
# Sentence segmentation

# Tokens (trailing dots stripped, lowercased) after which a period never ends
# a sentence.
_ABBREVIATIONS = {
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "etc",
    "e.g", "i.e", "cf", "al", "fig", "figs", "no", "approx", "resp",
}

_TERMINAL = re.compile(r"[.?!]+")


def _candidate_boundaries(text: str):
    """Yield split positions: index just past a terminal punctuation run
    that is followed by whitespace and then an uppercase letter."""
    for m in _TERMINAL.finditer(text):
        end = m.end()
        j = end
        while j < len(text) and text[j].isspace():
            j += 1
        if j == end or j >= len(text):
            continue
        if not text[j].isupper():
            continue
        before = re.search(r"(\S+)$", text[: m.start()])
        if before:
            token = before.group(1).rstrip(".").lower()
            if token in _ABBREVIATIONS:
                continue
            # single capital letter: almost always an initial ("J. Smith")
            if len(token) == 1 and token.isalpha() and text[m.start() - 1].isupper():
                continue
        yield end


def segment_sentences(doc: RawDocument) -> list[SentenceInstance]:
    """Split a document into sentences without splitting any annotated span.

    A candidate boundary that falls inside the extent of any entity's
    SpanSet is suppressed, merging the sentences around it. Returned
    instances carry the document entities rebased to sentence-local
    coordinates; events are attached by `assemble_sentences`.
    """
    protected = [(e.span.start, e.span.end) for e in doc.entities]
    boundaries = [
        b for b in _candidate_boundaries(doc.text)
        if not any(s < b < e for s, e in protected)
    ]

    segments = []
    start = 0
    for b in boundaries:
        segments.append((start, b))
        start = b
    segments.append((start, len(doc.text)))

    sentences: list[SentenceInstance] = []
    for seg_start, seg_end in segments:
        chunk = doc.text[seg_start:seg_end]
        stripped = chunk.strip()
        if not stripped:
            continue
        lead = len(chunk) - len(chunk.lstrip())
        offset = seg_start + lead
        sentences.append(
            SentenceInstance(
                doc_id=doc.doc_id,
                sent_index=len(sentences),
                text=stripped,
                offset=offset,
            )
        )

    by_sentence = {s.sent_index: s for s in sentences}
    for e in doc.entities:
        placed = False
        for s in sentences:
            if e.span.start >= s.offset and e.span.end <= s.offset + len(s.text):
                local = e.span.shifted(-s.offset)
                by_sentence[s.sent_index].entities.append(
                    Mention(local, local.extract(s.text), e.label)
                )
                placed = True
                break
        if not placed:
            # cannot happen when boundaries honor entity extents
            raise AssertionError(f"entity {e.id} not contained in any sentence")
    return sentences


# ---------------------------------------------------------------------------
# Event derivation


@dataclass
class DocumentEvents:
    """Document-level events: trigger entity ids with role-labelled
    argument entity ids, derived from labels and MODIFY relations."""

    doc: RawDocument
    events: list[tuple[str, str, list[tuple[str, str]]]]  # (trigger_id, type, [(arg_id, role)])


def derive_events(doc: RawDocument, event_type_set: set[str]) -> DocumentEvents:
    """Promote event-typed entities to triggers and attach MODIFY arguments.

    A MODIFY relation contributes an argument when exactly one endpoint is
    event-typed, regardless of the relation's argument order; the non-event
    entity becomes the argument and its label becomes the role.
    """
    by_id = doc.entity_by_id()
    args_by_trigger: dict[str, list[tuple[str, str]]] = {}
    for rel in doc.relations:
        if rel.label != MODIFY_RELATION:
            continue
        src, tgt = by_id[rel.source_id], by_id[rel.target_id]
        src_is_event = src.label in event_type_set
        tgt_is_event = tgt.label in event_type_set
        if src_is_event == tgt_is_event:
            continue  # event-event or entity-entity links carry no argument
        trigger, arg = (src, tgt) if src_is_event else (tgt, src)
        args_by_trigger.setdefault(trigger.id, []).append((arg.id, arg.label))

    events = []
    for e in doc.entities:
        if e.label in event_type_set:
            events.append((e.id, e.label, args_by_trigger.get(e.id, [])))
    return DocumentEvents(doc, events)


def assemble_sentences(derived: DocumentEvents) -> tuple[list[SentenceInstance], int]:
    """Segment the document and attach events to their sentences.

    Arguments whose mention lies in a different sentence than the trigger
    are dropped; the second return value counts the drops.
    """
    doc = derived.doc
    sentences = segment_sentences(doc)
    by_id = doc.entity_by_id()

    def locate(entity_id: str) -> tuple[SentenceInstance, Mention]:
        ent = by_id[entity_id]
        for s in sentences:
            if ent.span.start >= s.offset and ent.span.end <= s.offset + len(s.text):
                local = ent.span.shifted(-s.offset)
                return s, Mention(local, local.extract(s.text), ent.label)
        raise AssertionError(f"entity {entity_id} not contained in any sentence")

    dropped = 0
    for trigger_id, event_type, args in derived.events:
        sent, trigger_mention = locate(trigger_id)
        records = []
        for arg_id, role in args:
            arg_sent, arg_mention = locate(arg_id)
            if arg_sent.sent_index != sent.sent_index:
                dropped += 1
                continue
            records.append(ArgumentRecord(arg_mention, role))
        records.sort(key=lambda a: a.mention.span.fragments)
        sent.events.append(EventRecord(trigger_mention, event_type, records))

    for s in sentences:
        s.events.sort(key=lambda ev: (ev.trigger.span.fragments, ev.event_type))
    if dropped:
        log.info("dropped %d cross-sentence MODIFY argument(s) in %s", dropped, doc.doc_id)
    return sentences, dropped


def build_sentence_corpus(
    docs: list[RawDocument], event_type_set: set[str]
) -> tuple[list[SentenceInstance], int]:
    """Derive events and assemble sentence instances for a whole corpus."""
    corpus: list[SentenceInstance] = []
    dropped = 0
    for doc in docs:
        sentences, d = assemble_sentences(derive_events(doc, event_type_set))
        corpus.extend(sentences)
        dropped += d
    return corpus, dropped


# ---------------------------------------------------------------------------
# Ontology induction and validation


def build_ontology(
    corpus: list[SentenceInstance], descriptions: dict[str, str] | None = None
) -> Ontology:
    """Induce the ontology from a corpus with events already derived.

    Event types are ordered by descending trigger count; each type's roles
    by descending (type, role) co-occurrence count; ties lexicographic.
    Missing descriptions are logged and default to empty.
    """
    descriptions = descriptions or {}
    type_counts: dict[str, int] = {}
    role_counts: dict[str, dict[str, int]] = {}
    for s in corpus:
        for ev in s.events:
            type_counts[ev.event_type] = type_counts.get(ev.event_type, 0) + 1
            per_type = role_counts.setdefault(ev.event_type, {})
            for a in ev.arguments:
                per_type[a.role] = per_type.get(a.role, 0) + 1

    def describe(name: str) -> str:
        if name not in descriptions:
            log.warning("no description supplied for %r", name)
            return ""
        return descriptions[name]

    ordered_types = sorted(type_counts, key=lambda t: (-type_counts[t], t))
    return Ontology(
        event_types=[OntologyEntry(t, describe(t)) for t in ordered_types],
        roles_by_type={
            t: [
                OntologyEntry(r, describe(r))
                for r in sorted(role_counts[t], key=lambda r: (-role_counts[t][r], r))
            ]
            for t in ordered_types
        },
    )


def validate_corpus(corpus: list[SentenceInstance], ontology: Ontology) -> None:
    """Raise if any event type or argument role falls outside the ontology."""
    types = set(ontology.type_names)
    for s in corpus:
        for ev in s.events:
            if ev.event_type not in types:
                raise UnknownEventType(
                    f"{s.doc_id}#{s.sent_index}: event type {ev.event_type!r}"
                )
            legal = set(ontology.role_names(ev.event_type))
            for a in ev.arguments:
                if a.role not in legal:
                    raise IllegalRole(
                        f"{s.doc_id}#{s.sent_index}: role {a.role!r} illegal for {ev.event_type}"
                    )


# ---------------------------------------------------------------------------
# Splits and downsampling


def split_corpus(doc_ids: list[str], seed: int) -> CorpusSplit:
    """Deterministic 80/10/10 document split; train takes the remainder."""
    if len(doc_ids) < 10:
        raise TooFewDocuments(f"need at least 10 documents, got {len(doc_ids)}")
    ids = sorted(doc_ids)
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_dev = n // 10
    n_test = n // 10
    n_train = n - n_dev - n_test
    return CorpusSplit(
        train=ids[:n_train],
        dev=ids[n_train : n_train + n_dev],
        test=ids[n_train + n_dev :],
        seed=seed,
    )


def downsample(train_ids: list[str], proportion: float, seed: int) -> list[str]:
    """Pick round(proportion * |train|) documents, deterministically per seed.

    Returned ids preserve their order in `train_ids`.
    """
    if not 0 < proportion <= 1:
        raise ValueError(f"proportion must be in (0, 1], got {proportion}")
    k = int(math.floor(proportion * len(train_ids) + 0.5))
    if k >= len(train_ids):
        return list(train_ids)
    picked = sorted(random.Random(seed).sample(range(len(train_ids)), k))
    return [train_ids[i] for i in picked]


# ---------------------------------------------------------------------------
# Statistics


@dataclass
class CorpusStats:
    documents: int = 0
    sentences: int = 0
    entities: int = 0
    triggers: int = 0
    arguments: int = 0
    event_types: int = 0
    argument_roles: int = 0
    avg_entities_per_sentence: float = 0.0
    avg_events_per_sentence: float = 0.0
    avg_args_per_sentence: float = 0.0
    avg_args_per_event: float = 0.0
    avg_entity_length: float = 0.0
    avg_trigger_length: float = 0.0
    avg_argument_length: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)

    def as_table(self) -> str:
        rows = [
            ("Unique event types", self.event_types),
            ("Unique argument roles", self.argument_roles),
            ("Documents #", self.documents),
            ("Sentences #", self.sentences),
            ("Entities #", self.entities),
            ("Triggers #", self.triggers),
            ("Arguments #", self.arguments),
            ("Avg entities # per sentence", f"{self.avg_entities_per_sentence:.2f}"),
            ("Avg events # per sentence", f"{self.avg_events_per_sentence:.2f}"),
            ("Avg args # per sentence", f"{self.avg_args_per_sentence:.2f}"),
            ("Avg args per event #", f"{self.avg_args_per_event:.2f}"),
            ("Avg entity length", f"{self.avg_entity_length:.2f}"),
            ("Avg trigger length", f"{self.avg_trigger_length:.2f}"),
            ("Avg argument length", f"{self.avg_argument_length:.2f}"),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def _word_count(surface: str) -> int:
    return len(surface.split())


def compute_stats(corpus: list[SentenceInstance]) -> CorpusStats:
    """Corpus-level counts and averages; lengths are whitespace word counts."""
    stats = CorpusStats()
    if not corpus:
        return stats
    entity_lengths: list[int] = []
    trigger_lengths: list[int] = []
    argument_lengths: list[int] = []
    types: set[str] = set()
    roles: set[str] = set()
    docs: set[str] = set()
    n_events = 0
    n_args = 0
    for s in corpus:
        docs.add(s.doc_id)
        entity_lengths.extend(_word_count(m.surface) for m in s.entities)
        for ev in s.events:
            n_events += 1
            types.add(ev.event_type)
            trigger_lengths.append(_word_count(ev.trigger.surface))
            for a in ev.arguments:
                n_args += 1
                roles.add(a.role)
                argument_lengths.append(_word_count(a.mention.surface))

    def avg(values, denom) -> float:
        return (sum(values) / denom) if denom else 0.0

    n_sents = len(corpus)
    stats.documents = len(docs)
    stats.sentences = n_sents
    stats.entities = len(entity_lengths)
    stats.triggers = n_events
    stats.arguments = n_args
    stats.event_types = len(types)
    stats.argument_roles = len(roles)
    stats.avg_entities_per_sentence = len(entity_lengths) / n_sents
    stats.avg_events_per_sentence = n_events / n_sents
    stats.avg_args_per_sentence = n_args / n_sents
    stats.avg_args_per_event = (n_args / n_events) if n_events else 0.0
    stats.avg_entity_length = avg(entity_lengths, len(entity_lengths))
    stats.avg_trigger_length = avg(trigger_lengths, len(trigger_lengths))
    stats.avg_argument_length = avg(argument_lengths, len(argument_lengths))
    return stats


# ---------------------------------------------------------------------------
# Serialization


def write_dataset(path: str | Path, corpus: list[SentenceInstance]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in corpus:
            f.write(json.dumps(s.to_json(), ensure_ascii=False) + "\n")


def read_dataset(path: str | Path) -> list[SentenceInstance]:
    corpus = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                corpus.append(SentenceInstance.from_json(json.loads(line)))
    return corpus


def save_ontology(path: str | Path, ontology: Ontology) -> None:
    Path(path).write_text(json.dumps(ontology.to_json(), indent=2) + "\n", encoding="utf-8")


def load_ontology(path: str | Path) -> Ontology:
    return Ontology.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def load_descriptions(path: str | Path) -> dict[str, str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("descriptions file must be a JSON object of name -> description")
    return {str(k): str(v) for k, v in data.items()}
