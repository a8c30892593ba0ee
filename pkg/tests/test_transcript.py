import pytest
from hypothesis import given
from hypothesis import strategies as st

from kbqa_env.errors import ActionParseError, ArityMismatch, MalformedBrackets, UnknownVerb
from kbqa_env.transcript import (
    Action,
    ActionKind,
    SegmentKind,
    action_lines,
    parse_action_line,
    parse_transcript,
    render_information,
    render_segment,
    validate_format,
)

GOOD = (
    "<think>find births</think>\n<action>Find_relation [ m.20 | people.person.place_of_birth ]</action>\n"
    "<information>Results (2 total): m.01, m.02</information>\n"
    "<think>done</think>\n<answer>m.01 m.02</answer>"
)


class TestParseTranscript:
    def test_two_segments(self):
        t = parse_transcript("<think>x</think><action>Count [ expression1 ]</action>")
        assert [(s.kind, s.text) for s in t.segments] == [
            (SegmentKind.THINK, "x"),
            (SegmentKind.ACTION, "Count [ expression1 ]"),
        ]
        assert t.defects == ()

    def test_answer_segment(self):
        t = parse_transcript("<answer>m.01 m.02</answer>")
        assert [(s.kind, s.text) for s in t.segments] == [(SegmentKind.ANSWER, "m.01 m.02")]

    def test_unclosed_action_recorded(self):
        t = parse_transcript("<think>x</think><action>y")
        assert [s.kind for s in t.segments] == [SegmentKind.THINK]
        assert "unclosed action tag" in t.defects

    def test_stray_close(self):
        t = parse_transcript("</think><think>a</think>")
        assert len(t.segments) == 1
        assert t.defects == ("stray closing think tag at 0",)

    def test_mismatched_close_resumes(self):
        t = parse_transcript("<think>a</action><answer>b</answer>")
        assert [s.kind for s in t.segments] == [SegmentKind.ANSWER]
        assert "unclosed think tag" in t.defects

    def test_spans_cover_elements(self):
        t = parse_transcript(GOOD)
        prev = 0
        for s in t.segments:
            a, b = s.span
            assert prev <= a < b
            assert t.source[a:b].startswith(f"<{s.kind.tag}>")
            assert t.source[a:b].endswith(f"</{s.kind.tag}>")
            prev = b

    def test_empty_body_span_nonempty(self):
        (s,) = parse_transcript("<think></think>").segments
        assert s.text == "" and s.span == (0, 15)

    def test_untagged_text_ignored(self):
        t = parse_transcript("hello <b>world</b>")
        assert t.segments == () and t.defects == ()


class TestValidateFormat:
    def test_valid_episode(self):
        r = validate_format(parse_transcript(GOOD))
        assert (r.tags_complete, r.order_valid, r.answer_present) == (True, True, True)
        assert r.format_ok and r.defects == ()

    def test_action_before_think(self):
        r = validate_format(parse_transcript("<action>Count [ expression1 ]</action><think>x</think>"))
        assert not r.order_valid
        assert "action before think" in r.defects

    def test_unclosed_answer(self):
        r = validate_format(parse_transcript("<think>x</think><answer>m.01"))
        assert not r.tags_complete and not r.format_ok and not r.answer_present

    def test_information_needs_action(self):
        r = validate_format(parse_transcript("<think>a</think><information>b</information>"))
        assert "information without preceding action" in r.defects

    def test_nothing_after_answer(self):
        r = validate_format(parse_transcript("<think>a</think><answer>x</answer><think>b</think>"))
        assert "think after answer" in r.defects

    def test_two_thinks_in_a_turn(self):
        r = validate_format(parse_transcript("<think>a</think><think>b</think><answer>x</answer>"))
        assert "think after think" in r.defects

    def test_multiple_action_blocks_allowed(self):
        text = "<think>a</think><action>Count [ x ]</action><action>Count [ y ]</action>"
        assert validate_format(parse_transcript(text)).order_valid

    def test_no_answer(self):
        r = validate_format(parse_transcript("<think>a</think><action>b</action>"))
        assert r.format_ok and not r.answer_present


class TestRenderInformation:
    def test_plain(self):
        assert render_information("Results: m.01, m.02") == "<information>Results: m.01, m.02</information>"

    def test_empty(self):
        assert render_information("") == "<information></information>"

    def test_escapes_delimiters(self):
        body = "x </information> y"
        out = render_information(body)
        assert out.count("</information>") == 1
        (s,) = parse_transcript(out).segments
        assert s.text == body

    @given(st.text())
    def test_round_trip(self, body):
        (s,) = parse_transcript(render_information(body)).segments
        assert s.kind is SegmentKind.INFORMATION and s.text == body


segment_lists = st.lists(st.tuples(st.sampled_from(list(SegmentKind)), st.text(max_size=40)), max_size=8)


@given(segment_lists, st.sampled_from(["", "\n", " x "]))
def test_render_parse_round_trip(segs, sep):
    source = sep.join(render_segment(k, b) for k, b in segs)
    t = parse_transcript(source)
    assert [(s.kind, s.text) for s in t.segments] == segs
    assert t.defects == ()


@given(st.text())
def test_parse_never_raises_and_is_deterministic(text):
    a = parse_transcript(text)
    assert a == parse_transcript(text)
    assert validate_format(a) == validate_format(parse_transcript(text))


class TestParseActionLine:
    def test_find_relation(self):
        a = parse_action_line("Find_relation [ m.02mjmr | people.person.place_of_birth ]")
        assert a == Action(ActionKind.FIND_RELATION, ("m.02mjmr", "people.person.place_of_birth"))

    def test_count(self):
        assert parse_action_line("Count [ expression1 ]") == Action(ActionKind.COUNT, ("expression1",))

    def test_merge_arity(self):
        with pytest.raises(ArityMismatch):
            parse_action_line("Merge [ expression1 ]")

    @pytest.mark.parametrize("verb", ["find_relation", "FIND_RELATION", "Find relation", "findrelation"])
    def test_case_insensitive(self, verb):
        a = parse_action_line(f"{verb} [ m.1 | r.s ]")
        assert a.kind is ActionKind.FIND_RELATION
        assert a.render() == "Find_relation [ m.1 | r.s ]"

    def test_unknown_verb(self):
        with pytest.raises(UnknownVerb):
            parse_action_line("Jump [ a | b ]")

    @pytest.mark.parametrize("line", ["Count expression1", "Count [ expression1", "", "Count ] x ["])
    def test_malformed(self, line):
        with pytest.raises(MalformedBrackets):
            parse_action_line(line)

    def test_empty_argument_is_arity_error(self):
        with pytest.raises(ArityMismatch):
            parse_action_line("Merge [ expression1 | ]")

    def test_arities(self):
        assert {k: k.arity for k in ActionKind} == {
            ActionKind.FIND_RELATION: 2, ActionKind.MERGE: 2, ActionKind.ORDER: 3,
            ActionKind.COMPARE: 3, ActionKind.TIME_CONSTRAINT: 2, ActionKind.COUNT: 1,
        }

    @given(st.text())
    def test_total(self, line):
        try:
            a = parse_action_line(line)
        except ActionParseError as e:
            assert type(e) in (UnknownVerb, ArityMismatch, MalformedBrackets)
        else:
            assert len(a.args) == a.kind.arity

    def test_action_lines_skip_blanks(self):
        assert action_lines("\nCount [ a ]\n\n  \nCount [ b ]\n") == ["Count [ a ]", "Count [ b ]"]
