import pytest
from hypothesis import given, strategies as st

from clinevent.brat import (
    DanglingReference,
    MalformedLine,
    SpanSet,
    parse_document,
    serialize_annotations,
    validate_offsets,
)


class TestSpanSet:
    def test_single_fragment(self):
        s = SpanSet.single(7, 19)
        assert s.start == 7 and s.end == 19
        assert s.extract("a mild heart attack") == "heart attack"

    def test_rejects_empty_fragment(self):
        with pytest.raises(ValueError):
            SpanSet(((5, 5),))

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            SpanSet(((0, 6), (4, 10)))

    def test_rejects_no_fragments(self):
        with pytest.raises(ValueError):
            SpanSet(())

    def test_discontinuous_extract_joins_with_space(self):
        text = "origin carotid artery and other text"
        s = SpanSet.from_pairs([(0, 6), (7, 21)])
        assert s.extract(text) == "origin carotid artery"

    def test_shift_round_trip(self):
        s = SpanSet.from_pairs([(3, 6), (10, 14)])
        assert s.shifted(5).shifted(-5) == s


class TestParseDocument:
    def test_single_entity(self):
        doc = parse_document("d1", "a mild heart attack", "T1\tDisease_disorder 7 19\theart attack\n")
        assert len(doc.entities) == 1
        e = doc.entities[0]
        assert e.id == "T1"
        assert e.label == "Disease_disorder"
        assert e.span == SpanSet.single(7, 19)
        assert e.surface == "heart attack"

    def test_discontinuous_entity(self):
        text = "origin carotid artery here and more filler text to cover offsets"
        ann = "T2\tBiological_structure 0 6;30 44\torigin carotid artery"
        doc = parse_document("d", text, ann)
        assert doc.entities[0].span.fragments == ((0, 6), (30, 44))

    def test_relation(self):
        text = "x" * 30
        ann = "T1\tSign_symptom 0 5\txxxxx\nT3\tSeverity 6 10\txxxx\nR1\tMODIFY Arg1:T3 Arg2:T1\n"
        doc = parse_document("d", text, ann)
        assert len(doc.relations) == 1
        r = doc.relations[0]
        assert (r.label, r.source_id, r.target_id) == ("MODIFY", "T3", "T1")

    def test_extra_lines_retained_in_order(self):
        text = "abcdef"
        ann = (
            "T1\tSign_symptom 0 3\tabc\n"
            "E1\tSign_symptom:T1\n"
            "A1\tNegated T1\n"
            "#1\tAnnotatorNotes T1\tcheck this\n"
        )
        doc = parse_document("d", text, ann)
        assert [kind for kind, _ in doc.extra_lines] == ["E", "A", "#"]

    def test_malformed_line_carries_line_number(self):
        with pytest.raises(MalformedLine) as err:
            parse_document("d", "abc", "T1\tBroken\n")
        assert err.value.line_no == 1

    def test_unknown_kind_rejected(self):
        with pytest.raises(MalformedLine):
            parse_document("d", "abc", "N1\tReference T1 db:1\tabc")

    def test_dangling_reference(self):
        ann = "T1\tSign_symptom 0 3\tabc\nR1\tMODIFY Arg1:T1 Arg2:T9"
        with pytest.raises(DanglingReference) as err:
            parse_document("d", "abc", ann)
        assert err.value.missing_id == "T9"

    def test_offsets_outside_text_rejected(self):
        with pytest.raises(MalformedLine):
            parse_document("d", "abc", "T1\tSign_symptom 0 10\tabc")

    def test_blank_lines_skipped(self):
        doc = parse_document("d", "abc", "\nT1\tSign_symptom 0 3\tabc\n\n")
        assert len(doc.entities) == 1


class TestValidateOffsets:
    def test_agreement(self):
        doc = parse_document("d", "a nodule", "T1\tSign_symptom 2 8\tnodule")
        assert validate_offsets(doc) == []

    def test_disagreement(self):
        doc = parse_document("d", "a nodules", "T1\tSign_symptom 2 9\tnodule")
        problems = validate_offsets(doc)
        assert len(problems) == 1
        assert problems[0].entity_id == "T1"
        assert problems[0].found == "nodules"

    def test_whitespace_only_difference_tolerated(self):
        doc = parse_document("d", "a big\nnodule", "T1\tSign_symptom 2 12\tbig nodule")
        assert validate_offsets(doc) == []

    def test_no_entities(self):
        assert validate_offsets(parse_document("d", "abc", "")) == []


class TestRoundTrip:
    def test_fixture_documents_round_trip(self, raw_documents):
        for doc in raw_documents:
            again = parse_document(doc.doc_id, doc.text, serialize_annotations(doc))
            assert again == doc


# -- fuzzed well-formed annotation files ------------------------------------

_label = st.sampled_from(["Sign_symptom", "Severity", "Medication", "Date"])


@st.composite
def _documents(draw):
    text = draw(st.text(alphabet="abcdef ghij", min_size=4, max_size=60))
    n = len(text)
    entities = []
    for i in range(draw(st.integers(0, 4))):
        n_frags = draw(st.integers(1, 2))
        cuts = sorted(draw(st.lists(st.integers(0, n), min_size=2 * n_frags, max_size=2 * n_frags)))
        frags = []
        for k in range(n_frags):
            s, e = cuts[2 * k], cuts[2 * k + 1]
            if s < e and (not frags or s >= frags[-1][1]):
                frags.append((s, e))
        if not frags:
            continue
        surface = " ".join(text[s:e] for s, e in frags)
        span_field = ";".join(f"{s} {e}" for s, e in frags)
        entities.append(f"T{i + 1}\t{draw(_label)} {span_field}\t{surface}")
    ann = "\n".join(entities)
    return text, ann


@given(_documents())
def test_parsed_entities_satisfy_spanset_invariants(doc):
    text, ann = doc
    parsed = parse_document("fuzz", text, ann)
    for e in parsed.entities:
        assert e.span.fragments
        prev_end = None
        for s, en in e.span.fragments:
            assert 0 <= s < en <= len(text)
            if prev_end is not None:
                assert s >= prev_end
            prev_end = en
    reparsed = parse_document("fuzz", text, serialize_annotations(parsed))
    assert reparsed == parsed
