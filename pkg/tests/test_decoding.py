import itertools

from hypothesis import given, strategies as st

from clinevent.brat import SpanSet
from clinevent.decoding import (
    decode,
    ground_surfaces,
    parse_output,
    parse_output_checked,
)
from clinevent.prompts import (
    Task,
    render_ed_target,
    render_eae_target,
    render_mi_target,
)


class TestParseOutput:
    def test_ed_two_triggers(self):
        assert parse_output(Task.ED, "Event trigger is nodule [sep] lesion") == ["nodule", "lesion"]

    def test_eae_placeholder(self):
        assert parse_output(Task.EAE, "Biological_structure is <argument>", "Biological_structure") == []

    def test_eae_role_reiteration_mismatch(self):
        surfaces, malformed = parse_output_checked(Task.EAE, "Severity is mild", query_role="Area")
        assert surfaces == [] and malformed

    def test_eae_role_reiteration_match(self):
        surfaces, malformed = parse_output_checked(Task.EAE, "Area is 0.8x1.5cm", query_role="Area")
        assert surfaces == ["0.8x1.5cm"] and not malformed

    def test_mi_placeholder(self):
        assert parse_output(Task.MI_ENTITY, "Mentions are <mention>") == []

    def test_missing_prefix_is_malformed(self):
        surfaces, malformed = parse_output_checked(Task.ED, "nodule [sep] lesion")
        assert surfaces == [] and malformed

    def test_ed_placeholder(self):
        assert parse_output(Task.ED, "Event trigger is <trigger>") == []

    def test_typing_strips_period(self):
        assert parse_output(Task.ED_TYPING, "Event type is Sign_symptom.") == ["Sign_symptom"]
        assert parse_output(Task.ED_TYPING, "Event type is <Type>.") == []
        assert parse_output(Task.EAE_TYPING, "Argument role is Severity.") == ["Severity"]

    def test_whitespace_tolerated(self):
        assert parse_output(Task.ED, "  Event trigger is nodule  ") == ["nodule"]

    def test_inverts_renderers(self):
        for surfaces in ([], ["a"], ["alpha", "beta gamma"], ["x", "x"]):
            assert parse_output(Task.MI_ENTITY, render_mi_target(surfaces)) == surfaces
            assert parse_output(Task.ED, render_ed_target(surfaces)) == surfaces
            assert parse_output(Task.EAE, render_eae_target("Area", surfaces), "Area") == surfaces


class TestGroundSurfaces:
    def test_unique_occurrence(self):
        assert ground_surfaces(["nodule"], "a nodule was seen") == [SpanSet.single(2, 8)]

    def test_duplicate_surfaces_take_successive_occurrences(self):
        text = "pain here and pain there"
        got = ground_surfaces(["pain", "pain"], text)
        assert got == [SpanSet.single(0, 4), SpanSet.single(14, 18)]

    def test_duplicates_match_brute_force_assignment(self):
        # oracle: all in-order assignments of occurrences to surfaces;
        # leftmost-unused must pick the lexicographically smallest one
        text = "ab x ab y ab"
        surfaces = ["ab", "ab"]
        occurrences = [i for i in range(len(text)) if text.startswith("ab", i)]
        valid = [
            combo
            for combo in itertools.combinations(occurrences, len(surfaces))
        ]
        best = min(valid)
        got = ground_surfaces(surfaces, text)
        assert [s.fragments[0][0] for s in got] == list(best)

    def test_ungroundable_is_none(self):
        assert ground_surfaces(["missing"], "present text only") == [None]

    def test_discontinuous_two_fragments(self):
        text = "at the origin of the right common carotid artery was"
        got = ground_surfaces(["origin of right common carotid artery"], text)
        assert got[0] is not None
        assert len(got[0].fragments) == 2
        assert got[0].extract(text) == "origin of right common carotid artery"

    def test_grounded_spans_never_overlap_within_output(self):
        text = "right common carotid artery"
        got = ground_surfaces(["right common carotid artery", "carotid artery"], text)
        assert got[0] is not None
        assert got[1] is None  # consumed; no second occurrence

    def test_case_sensitive(self):
        assert ground_surfaces(["Nodule"], "a nodule was seen") == [None]

    def test_joined_text_equals_surface(self):
        text = "a bb ccc bb a"
        for surface in ("a", "bb", "ccc", "a bb", "bb ccc", "a ccc", "a bb ccc"):
            spans = ground_surfaces([surface], text)
            if spans[0] is not None:
                assert spans[0].extract(text) == surface


class TestDecode:
    def test_decode_grounds_and_echoes_meta(self):
        out = decode(Task.ED, "Event trigger is nodule", "a nodule was seen", {"k": 1})
        assert out.surfaces == ["nodule"]
        assert out.grounded == [SpanSet.single(2, 8)]
        assert out.meta == {"k": 1}
        assert not out.malformed

    def test_malformed_flag(self):
        out = decode(Task.EAE, "Severity is mild", "mild pain", query_role="Area")
        assert out.malformed and out.surfaces == []


@given(st.sampled_from(list(Task)), st.text(max_size=80))
def test_parse_never_raises_on_arbitrary_text(task, text):
    surfaces = parse_output(task, text, query_role="Area")
    assert isinstance(surfaces, list)


@given(
    st.text(alphabet="ab [sep]<>", max_size=60),
    st.text(alphabet="abc def", min_size=1, max_size=40),
)
def test_decode_never_raises(output_text, passage):
    for task in (Task.MI_ENTITY, Task.ED, Task.EAE, Task.ED_TYPING):
        result = decode(task, output_text, passage, query_role="Area")
        for surface, span in zip(result.surfaces, result.grounded):
            if span is not None:
                assert span.extract(passage) == surface
