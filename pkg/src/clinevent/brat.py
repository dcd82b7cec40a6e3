"""BRAT standoff annotation ingestion.

Parses paired ``.txt``/``.ann`` files into in-memory documents. Textbound
(T) and relation (R) lines drive everything downstream; event (E),
attribute (A) and note (#) lines are kept verbatim in a pass-through list
so nothing is dropped silently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path


class MalformedLine(ValueError):
    """An annotation line that does not match the standoff grammar."""

    def __init__(self, line_no: int, line: str, reason: str = ""):
        self.line_no = line_no
        self.line = line
        msg = f"line {line_no}: cannot parse {line!r}"
        if reason:
            msg = f"{msg} ({reason})"
        super().__init__(msg)


class DanglingReference(ValueError):
    """A relation line that cites an unknown textbound id."""

    def __init__(self, line_no: int, relation_id: str, missing_id: str):
        self.line_no = line_no
        self.relation_id = relation_id
        self.missing_id = missing_id
        super().__init__(
            f"line {line_no}: relation {relation_id} references unknown entity {missing_id}"
        )


@dataclass(frozen=True)
class SpanSet:
    """Ordered, pairwise disjoint character fragments of one mention.

    Offsets are 0-based character offsets into the owning text, ends
    exclusive. A single contiguous mention has one fragment; discontinuous
    mentions have several, sorted by start.
    """

    fragments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.fragments:
            raise ValueError("SpanSet requires at least one fragment")
        prev_end = None
        for start, end in self.fragments:
            if start >= end:
                raise ValueError(f"empty or inverted fragment ({start}, {end})")
            if prev_end is not None and start < prev_end:
                raise ValueError("fragments must be sorted and non-overlapping")
            prev_end = end

    @classmethod
    def single(cls, start: int, end: int) -> "SpanSet":
        return cls(((start, end),))

    @classmethod
    def from_pairs(cls, pairs) -> "SpanSet":
        return cls(tuple((int(s), int(e)) for s, e in pairs))

    @property
    def start(self) -> int:
        return self.fragments[0][0]

    @property
    def end(self) -> int:
        return self.fragments[-1][1]

    def extract(self, text: str) -> str:
        """Slice `text` at each fragment and join with single spaces."""
        return " ".join(text[s:e] for s, e in self.fragments)

    def shifted(self, delta: int) -> "SpanSet":
        return SpanSet(tuple((s + delta, e + delta) for s, e in self.fragments))

    def within(self, start: int, end: int) -> bool:
        return self.start >= start and self.end <= end

    def to_json(self) -> list[list[int]]:
        return [[s, e] for s, e in self.fragments]

    @classmethod
    def from_json(cls, data) -> "SpanSet":
        return cls.from_pairs(data)


@dataclass(frozen=True)
class RawEntity:
    """One textbound (T) annotation."""

    id: str
    label: str
    span: SpanSet
    surface: str


@dataclass(frozen=True)
class RawRelation:
    """One binary relation (R) annotation."""

    id: str
    label: str
    source_id: str
    target_id: str


@dataclass
class RawDocument:
    doc_id: str
    text: str
    entities: list[RawEntity]
    relations: list[RawRelation]
    # E/A/# lines, kept as (kind, raw line) in file order
    extra_lines: list[tuple[str, str]] = field(default_factory=list)

    def entity_by_id(self) -> dict[str, RawEntity]:
        return {e.id: e for e in self.entities}


@dataclass(frozen=True)
class Discrepancy:
    """Surface/text disagreement for one entity."""

    entity_id: str
    expected: str
    found: str


_T_LINE = re.compile(r"^(T\S*)\t(\S+) (\d+ \d+(?:;\d+ \d+)*)\t(.*)$")
_R_LINE = re.compile(r"^(R\S*)\t(\S+) Arg1:(\S+) Arg2:(\S+)\s*$")


def _parse_span_field(field_text: str) -> SpanSet:
    pairs = []
    for chunk in field_text.split(";"):
        start, end = chunk.split(" ")
        pairs.append((int(start), int(end)))
    # tolerate out-of-order fragments in the file; the SpanSet is canonical
    pairs.sort()
    return SpanSet.from_pairs(pairs)


def parse_document(doc_id: str, text: str, ann: str) -> RawDocument:
    """Parse one document's annotation block against its text.

    Raises MalformedLine for lines outside the accepted grammar and
    DanglingReference for relations citing unknown entity ids. Pure
    function of its inputs.
    """
    entities: list[RawEntity] = []
    relations: list[tuple[int, RawRelation]] = []
    extra: list[tuple[str, str]] = []
    seen_ids: set[str] = set()

    for line_no, line in enumerate(ann.splitlines(), start=1):
        if not line.strip():
            continue
        kind = line[0]
        if kind == "T":
            m = _T_LINE.match(line)
            if not m:
                raise MalformedLine(line_no, line)
            eid, label, span_field, surface = m.groups()
            if eid in seen_ids:
                raise MalformedLine(line_no, line, "duplicate entity id")
            try:
                span = _parse_span_field(span_field)
            except ValueError as exc:
                raise MalformedLine(line_no, line, str(exc)) from exc
            if span.end > len(text) or span.start < 0:
                raise MalformedLine(line_no, line, "offsets outside document text")
            seen_ids.add(eid)
            entities.append(RawEntity(eid, label, span, surface))
        elif kind == "R":
            m = _R_LINE.match(line)
            if not m:
                raise MalformedLine(line_no, line)
            rid, label, src, tgt = m.groups()
            relations.append((line_no, RawRelation(rid, label, src, tgt)))
        elif kind in ("E", "A", "#"):
            extra.append((kind, line))
        else:
            raise MalformedLine(line_no, line, "unknown annotation kind")

    for line_no, rel in relations:
        for ref in (rel.source_id, rel.target_id):
            if ref not in seen_ids:
                raise DanglingReference(line_no, rel.id, ref)

    return RawDocument(doc_id, text, entities, [r for _, r in relations], extra)


def serialize_annotations(doc: RawDocument) -> str:
    """Render a document's annotations back to standoff lines.

    T and R lines round-trip exactly through parse_document; pass-through
    lines are emitted verbatim after them.
    """
    lines = []
    for e in doc.entities:
        span_field = ";".join(f"{s} {e_}" for s, e_ in e.span.fragments)
        lines.append(f"{e.id}\t{e.label} {span_field}\t{e.surface}")
    for r in doc.relations:
        lines.append(f"{r.id}\t{r.label} Arg1:{r.source_id} Arg2:{r.target_id}")
    for _, raw in doc.extra_lines:
        lines.append(raw)
    return "\n".join(lines) + ("\n" if lines else "")


_WS = re.compile(r"\s+")


def _normalize_ws(s: str) -> str:
    return _WS.sub(" ", s).strip()


def validate_offsets(doc: RawDocument) -> list[Discrepancy]:
    """Report every entity whose surface disagrees with the text at its span.

    Whitespace-only differences are ignored (annotation files frequently
    collapse newlines); anything else is a discrepancy.
    """
    out = []
    for e in doc.entities:
        found = e.span.extract(doc.text)
        if _normalize_ws(found) != _normalize_ws(e.surface):
            out.append(Discrepancy(e.id, e.surface, found))
    return out


def read_document(txt_path: str | Path, ann_path: str | Path) -> RawDocument:
    txt_path = Path(txt_path)
    text = txt_path.read_text(encoding="utf-8")
    ann = Path(ann_path).read_text(encoding="utf-8")
    return parse_document(txt_path.stem, text, ann)


def load_directory(brat_dir: str | Path) -> list[RawDocument]:
    """Load every ``*.txt``/``*.ann`` pair in a directory, sorted by name."""
    brat_dir = Path(brat_dir)
    docs = []
    for txt_path in sorted(brat_dir.glob("*.txt")):
        ann_path = txt_path.with_suffix(".ann")
        if ann_path.exists():
            docs.append(read_document(txt_path, ann_path))
    return docs
