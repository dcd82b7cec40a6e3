import pytest
from hypothesis import given, strategies as st

from clinevent.brat import SpanSet, parse_document
from clinevent.dataset import Mention, build_sentence_corpus
from clinevent.fixtures import EVENT_TYPES
from clinevent.prompts import (
    CompileConfig,
    Task,
    UngroundedMention,
    augment_training,
    compile_ed,
    compile_eae,
    compile_mi,
    compile_typing,
    inject_markers,
    mentions_of_kind,
    strip_markers,
    window_positions,
    word_spans,
)


def brute_force_windows(n_words: int, size: int, step: int) -> list[tuple[int, int]]:
    """Independent enumerator: slide from word 0 in `step` increments until
    a window reaches the end of the text."""
    if n_words <= 0:
        return []
    positions = []
    start = 0
    while True:
        end = min(start + size, n_words)
        positions.append((start, end))
        if end >= n_words:
            break
        start += step
    return positions


def _sentence(text, ann):
    corpus, _ = build_sentence_corpus([parse_document("d", text, ann)], set(EVENT_TYPES))
    assert len(corpus) == 1
    return corpus[0]


FIG_SENTENCE = _sentence(
    "A 0.8x1.5cm nodule was imaged with CT.",
    "T1\tArea 2 11\t0.8x1.5cm\n"
    "T2\tSign_symptom 12 18\tnodule\n"
    "T3\tDiagnostic_procedure 35 37\tCT\n"
    "R1\tMODIFY Arg1:T1 Arg2:T2\n",
)


@pytest.fixture(scope="module")
def mini_ontology():
    from clinevent.dataset import Ontology, OntologyEntry

    return Ontology(
        event_types=[
            OntologyEntry("Sign_symptom", "Any symptom or clinical finding"),
            OntologyEntry("Diagnostic_procedure", "An examination"),
            OntologyEntry("Medication", "A drug"),
            OntologyEntry("Date", ""),
        ],
        roles_by_type={
            "Sign_symptom": [
                OntologyEntry("Biological_structure", "A body structure"),
                OntologyEntry("Area", "A two-dimensional measure"),
                OntologyEntry("Severity", "How severe"),
            ],
            "Diagnostic_procedure": [OntologyEntry("Lab_value", "A measured value")],
            "Medication": [OntologyEntry("Dosage", "An amount")],
            "Date": [],
        },
    )


class TestWindows:
    def test_formula_matches_brute_force(self):
        for n_words in range(0, 121):
            for size, step in ((10, 4), (10, 10), (5, 2), (8, 3)):
                got = window_positions(n_words, size, step)
                assert got == brute_force_windows(n_words, size, step), (n_words, size, step)

    def test_fourteen_words_gives_three_instances(self, mini_ontology):
        text = " ".join(f"w{i}" for i in range(14))
        sent = _sentence(text + ".", "")
        # 14 words plus the trailing period token -> use exactly 14 words
        sent.text = text
        out = compile_mi(sent, CompileConfig(mention_kind="entity"))
        assert len(out) == 3  # full passage + windows at word offsets 0 and 4
        assert out[1].meta["window"] == [0, 10]
        assert out[2].meta["window"] == [4, 14]

    def test_window_inputs_are_passage_slices(self):
        sent = FIG_SENTENCE
        for inst in compile_mi(sent, CompileConfig(mention_kind="entity")):
            lo, hi = inst.meta["window_char"]
            assert inst.input_seq == sent.text[lo:hi]


class TestCompileMI:
    def test_targets_in_passage_order(self):
        out = compile_mi(FIG_SENTENCE, CompileConfig(mention_kind="entity"))
        assert out[0].target_seq == "Mentions are 0.8x1.5cm [sep] nodule [sep] CT"

    def test_placeholder_for_empty_window(self):
        sent = _sentence("Nothing annotated here at all in this sentence text.", "")
        out = compile_mi(sent, CompileConfig(mention_kind="entity"))
        assert all(i.target_seq == "Mentions are <mention>" for i in out)
        assert all(i.polarity == "negative" for i in out)

    def test_kind_selects_mentions(self):
        trig = compile_mi(FIG_SENTENCE, CompileConfig(mention_kind="trigger"))[0]
        assert trig.target_seq == "Mentions are nodule [sep] CT"
        arg = compile_mi(FIG_SENTENCE, CompileConfig(mention_kind="argument"))[0]
        assert arg.target_seq == "Mentions are 0.8x1.5cm"

    def test_window_restricts_targets(self):
        out = compile_mi(FIG_SENTENCE, CompileConfig(mention_kind="entity", window_size=3, window_step=3))
        by_window = {tuple(i.meta["window"] or ()): i.target_seq for i in out}
        assert by_window[(0, 3)] == "Mentions are 0.8x1.5cm [sep] nodule"
        assert by_window[(3, 6)] == "Mentions are <mention>"
        assert by_window[(6, 7)] == "Mentions are CT"

    def test_inference_mode_has_empty_targets(self):
        out = compile_mi(FIG_SENTENCE, CompileConfig(), mode="inference")
        assert all(i.target_seq == "" for i in out)


class TestCompileED:
    def test_inference_emits_one_query_per_type(self, mini_ontology):
        out = compile_ed(FIG_SENTENCE, mini_ontology, CompileConfig(), mode="inference")
        assert len(out) == mini_ontology.n_event_types
        assert [i.meta["query_event_type"] for i in out] == mini_ontology.type_names

    def test_positive_target_and_description_segment(self, mini_ontology):
        out = compile_ed(FIG_SENTENCE, mini_ontology, CompileConfig(), mode="inference")
        ss = next(i for i in out if i.meta["query_event_type"] == "Sign_symptom")
        assert "Event type is Sign_symptom." in ss.input_seq
        assert "Any symptom or clinical finding" in ss.input_seq
        assert ss.input_seq.startswith(FIG_SENTENCE.text + "\n")

    def test_train_targets(self, mini_ontology):
        out = compile_ed(FIG_SENTENCE, mini_ontology, CompileConfig(neg_ratio=10), mode="train")
        by_type = {i.meta["query_event_type"]: i for i in out}
        assert by_type["Sign_symptom"].target_seq == "Event trigger is nodule"
        assert by_type["Medication"].target_seq == "Event trigger is <trigger>"
        assert by_type["Medication"].polarity == "negative"

    def test_negative_ratio_formula(self, corpus, ontology):
        n_types = ontology.n_event_types
        for r in (0, 1, 2, 10):
            cfg = CompileConfig(neg_ratio=r)
            for s in corpus:
                p = len({ev.event_type for ev in s.events})
                expected = p + min(r * p, n_types - p)
                got = len(compile_ed(s, ontology, cfg, mode="train"))
                assert got == expected, (s.doc_id, s.sent_index, r)

    def test_negative_sampling_deterministic_per_seed(self, corpus, ontology):
        s = next(x for x in corpus if x.events)
        cfg1 = CompileConfig(neg_ratio=2, seed=5)
        a = [i.meta["query_event_type"] for i in compile_ed(s, ontology, cfg1)]
        b = [i.meta["query_event_type"] for i in compile_ed(s, ontology, cfg1)]
        assert a == b
        c = [i.meta["query_event_type"] for i in compile_ed(s, ontology, CompileConfig(neg_ratio=2, seed=6))]
        assert a != c or len({ev.event_type for ev in s.events}) == ontology.n_event_types

    def test_gold_markers_wrap_triggers(self, mini_ontology):
        cfg = CompileConfig(marker_mode="gold")
        out = compile_ed(FIG_SENTENCE, mini_ontology, cfg, mode="inference")
        passage = out[0].input_seq.split("\n")[0]
        assert "<m>nodule</m>" in passage
        assert "<m>CT</m>" in passage
        assert "<m>0.8x1.5cm</m>" not in passage  # argument, not trigger
        assert strip_markers(passage) == FIG_SENTENCE.text


class TestCompileEAE:
    def test_one_instance_per_legal_role(self, mini_ontology):
        event = FIG_SENTENCE.events[0]  # the nodule event
        out = compile_eae(FIG_SENTENCE, event, mini_ontology, CompileConfig(), mode="inference")
        assert [i.meta["query_role"] for i in out] == [
            "Biological_structure", "Area", "Severity",
        ]

    def test_prompt_segments(self, mini_ontology):
        event = FIG_SENTENCE.events[0]
        out = compile_eae(FIG_SENTENCE, event, mini_ontology, CompileConfig(), mode="inference")
        inst = next(i for i in out if i.meta["query_role"] == "Area")
        assert "<trigger>nodule</trigger>" in inst.input_seq
        assert "Event type is Sign_symptom." in inst.input_seq
        assert "Event trigger is nodule." in inst.input_seq
        assert "Argument role is Area." in inst.input_seq
        assert "A two-dimensional measure" in inst.input_seq

    def test_targets(self, mini_ontology):
        event = FIG_SENTENCE.events[0]
        out = compile_eae(FIG_SENTENCE, event, mini_ontology, CompileConfig(), mode="train")
        by_role = {i.meta["query_role"]: i for i in out}
        assert by_role["Area"].target_seq == "Area is 0.8x1.5cm"
        assert by_role["Biological_structure"].target_seq == "Biological_structure is <argument>"

    def test_segment_toggles(self, mini_ontology):
        event = FIG_SENTENCE.events[0]
        cfg = CompileConfig(segment_toggles=frozenset({"role_name"}))
        out = compile_eae(FIG_SENTENCE, event, mini_ontology, cfg, mode="inference")
        inst = out[0]
        assert "Event type is" not in inst.input_seq
        assert "<trigger>" not in inst.input_seq
        assert "Event trigger is" not in inst.input_seq
        assert "Argument role is" in inst.input_seq

    def test_discontinuous_argument_target_joins_fragments(self, corpus, ontology):
        for s in corpus:
            for ev in s.events:
                for a in ev.arguments:
                    if len(a.mention.span.fragments) > 1:
                        out = compile_eae(s, ev, ontology, CompileConfig(), mode="train")
                        inst = next(i for i in out if i.meta["query_role"] == a.role)
                        assert a.mention.surface in inst.target_seq
                        assert " ".join(a.mention.surface.split()) == a.mention.surface
                        return
        pytest.fail("fixture corpus lacks a discontinuous argument")


class TestMarkers:
    def test_single_wrap(self):
        m = Mention(SpanSet.single(2, 8), "nodule", "Sign_symptom")
        assert inject_markers("a nodule found", [m]) == "a <m>nodule</m> found"

    def test_empty_list_is_identity(self):
        assert inject_markers("a nodule found", []) == "a nodule found"

    def test_discontinuous_wrapped_per_fragment(self):
        text = "origin of the carotid artery"
        m = Mention(SpanSet.from_pairs([(0, 9), (14, 28)]), "origin of carotid artery", "Biological_structure")
        assert inject_markers(text, [m]) == "<m>origin of</m> the <m>carotid artery</m>"

    def test_nested_wrap_innermost_first(self):
        text = "right common carotid artery"
        outer = Mention(SpanSet.single(0, 27), text, "Biological_structure")
        inner = Mention(SpanSet.single(13, 27), "carotid artery", "Biological_structure")
        marked = inject_markers(text, [outer, inner])
        assert marked == "<m>right common <m>carotid artery</m></m>"

    def test_ungrounded_rejected(self):
        m = Mention(SpanSet.single(2, 8), "wrong", "X")
        with pytest.raises(UngroundedMention):
            inject_markers("a nodule found", [m])

    @given(st.text(alphabet="abc def", min_size=1, max_size=40), st.data())
    def test_delete_markers_recovers_passage(self, text, data):
        spans = []
        n = len(text)
        for _ in range(data.draw(st.integers(0, 3))):
            s = data.draw(st.integers(0, n - 1))
            e = data.draw(st.integers(s + 1, n))
            spans.append((s, e))
        mentions = [
            Mention(SpanSet.single(s, e), text[s:e], "X")
            for s, e in spans
        ]
        marked = inject_markers(text, mentions)
        assert strip_markers(marked) == text


class TestAugmentation:
    def test_doubles_and_strips(self, mini_ontology):
        cfg = CompileConfig(marker_mode="gold", augmentation=True)
        base = compile_ed(FIG_SENTENCE, mini_ontology, cfg, mode="train")
        doubled = augment_training(base)
        assert len(doubled) == 2 * len(base)
        for marked, plain in zip(doubled[::2], doubled[1::2]):
            assert plain.target_seq == marked.target_seq
            assert "<m>" not in plain.input_seq
            assert strip_markers(marked.input_seq) == plain.input_seq


class TestTyping:
    def test_trigger_candidate(self, mini_ontology):
        nodule = next(m for m in FIG_SENTENCE.entities if m.surface == "nodule")
        inst = compile_typing(FIG_SENTENCE, nodule, None, mini_ontology)
        assert inst.task is Task.ED_TYPING
        assert "<query>nodule</query>" in inst.input_seq
        assert inst.target_seq == "Event type is Sign_symptom."

    def test_non_trigger_candidate_gets_placeholder(self, mini_ontology):
        area = next(m for m in FIG_SENTENCE.entities if m.surface == "0.8x1.5cm")
        inst = compile_typing(FIG_SENTENCE, area, None, mini_ontology)
        assert inst.target_seq == "Event type is <Type>."
        assert inst.polarity == "negative"

    def test_argument_candidate_role(self, mini_ontology):
        event = FIG_SENTENCE.events[0]
        area = event.arguments[0].mention
        inst = compile_typing(FIG_SENTENCE, area, event, mini_ontology)
        assert inst.task is Task.EAE_TYPING
        assert "<query>0.8x1.5cm</query>" in inst.input_seq
        assert "<trigger>nodule</trigger>" in inst.input_seq
        assert "Event type is Sign_symptom." in inst.input_seq
        assert "Event trigger is nodule." in inst.input_seq
        assert inst.target_seq == "Argument role is Area."


def test_mentions_of_kind_passage_order(corpus):
    for s in corpus:
        for kind in ("entity", "trigger", "argument"):
            got = mentions_of_kind(s, kind)
            assert got == sorted(got, key=lambda m: m.span.fragments)


def test_word_spans_cover_non_whitespace():
    text = "a bb  ccc\nd"
    spans = word_spans(text)
    assert [text[s:e] for s, e in spans] == ["a", "bb", "ccc", "d"]
