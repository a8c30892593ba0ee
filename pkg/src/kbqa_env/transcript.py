"""Tagged transcript format and the bracketed action-line syntax.

A transcript interleaves four kinds of tagged segments::

    <think>...</think> <action>...</action> <information>...</information> <answer>...</answer>

Text outside of tags is ignored.  Inside an ``<action>`` block every
non-blank line is one action such as ``Find_relation [ m.02mjmr | people.person.place_of_birth ]``.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .errors import ArityMismatch, MalformedBrackets, UnknownVerb


class SegmentKind(enum.Enum):
    THINK = "think"
    ACTION = "action"
    INFORMATION = "information"
    ANSWER = "answer"

    @property
    def tag(self) -> str:
        return self.value


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    text: str
    # (start, end) of the whole element, delimiters included
    span: tuple[int, int]


@dataclass(frozen=True)
class Transcript:
    segments: tuple[Segment, ...]
    source: str
    defects: tuple[str, ...] = ()

    def of_kind(self, kind: SegmentKind) -> list[Segment]:
        return [s for s in self.segments if s.kind is kind]


@dataclass(frozen=True)
class FormatReport:
    tags_complete: bool
    order_valid: bool
    answer_present: bool
    defects: tuple[str, ...] = field(default_factory=tuple)

    @property
    def format_ok(self) -> bool:
        return self.tags_complete and self.order_valid


# -- escaping -------------------------------------------------------------

def escape_body(text: str) -> str:
    # '&' is escaped too so that bodies already containing "&lt;" survive a round-trip
    return text.replace("&", "&amp;").replace("<", "&lt;")


def unescape_body(text: str) -> str:
    return text.replace("&lt;", "<").replace("&amp;", "&")


def render_segment(kind: SegmentKind, body: str) -> str:
    return f"<{kind.tag}>{escape_body(body)}</{kind.tag}>"


def render_information(body: str) -> str:
    """Wrap an observation in ``<information>`` delimiters."""
    return render_segment(SegmentKind.INFORMATION, body)


# -- parsing --------------------------------------------------------------

_TAG_RE = re.compile(r"<(/?)(think|action|information|answer)>")
_KINDS = {k.tag: k for k in SegmentKind}


def parse_transcript(source: str) -> Transcript:
    """Split ``source`` into tagged segments in document order.

    Never raises.  Unclosed or stray tags are recorded in ``defects`` and the
    offending region is skipped; parsing resumes at the next opening tag.
    """
    segments = []
    defects = []
    pos = 0
    while True:
        m = _TAG_RE.search(source, pos)
        if m is None:
            break
        closing, name = m.group(1), m.group(2)
        if closing:
            defects.append(f"stray closing {name} tag at {m.start()}")
            pos = m.end()
            continue
        # the interior ends at the first tag of any kind; it must be our close
        nxt = _TAG_RE.search(source, m.end())
        if nxt is None or nxt.group(1) != "/" or nxt.group(2) != name:
            defects.append(f"unclosed {name} tag")
            pos = m.end() if nxt is None else nxt.start()
            if nxt is None:
                break
            continue
        body = unescape_body(source[m.end():nxt.start()])
        segments.append(Segment(_KINDS[name], body, (m.start(), nxt.end())))
        pos = nxt.end()
    return Transcript(tuple(segments), source, tuple(defects))


def validate_format(t: Transcript) -> FormatReport:
    """Check tag completeness and turn ordering.

    Each assistant turn must read ``think action* answer?``; information
    segments may only sit between turns, after a turn that issued an action.
    An answer ends the episode, so nothing may follow it.
    """
    defects = list(t.defects)
    tags_complete = not t.defects
    order = []

    turn: list[SegmentKind] = []
    seen_answer = False
    n_answers = 0
    for seg in t.segments:
        kind = seg.kind
        if seen_answer:
            order.append(f"{kind.tag} after answer")
            continue
        if kind is SegmentKind.INFORMATION:
            if SegmentKind.ACTION not in turn:
                order.append("information without preceding action")
            turn = []
            continue
        if kind is SegmentKind.THINK:
            if turn:
                order.append("think after " + turn[-1].tag)
            turn.append(kind)
        elif kind is SegmentKind.ACTION:
            if not turn:
                order.append("action before think")
            turn.append(kind)
        else:
            if not turn:
                order.append("answer before think")
            n_answers += 1
            seen_answer = True
            turn.append(kind)
    if n_answers > 1:
        order.append("multiple answers")
    defects.extend(order)
    return FormatReport(
        tags_complete=tags_complete,
        order_valid=not order,
        answer_present=n_answers > 0,
        defects=tuple(defects),
    )


# -- action lines ---------------------------------------------------------

class ActionKind(enum.Enum):
    """The six actions, valued by their canonical spelling."""

    FIND_RELATION = "Find_relation"
    MERGE = "Merge"
    ORDER = "Order"
    COMPARE = "Compare"
    TIME_CONSTRAINT = "Time_constraint"
    COUNT = "Count"

    @property
    def arity(self) -> int:
        return _ARITY[self]


_ARITY = {
    ActionKind.FIND_RELATION: 2,
    ActionKind.MERGE: 2,
    ActionKind.ORDER: 3,
    ActionKind.COMPARE: 3,
    ActionKind.TIME_CONSTRAINT: 2,
    ActionKind.COUNT: 1,
}

_VERBS = {k.value.lower().replace("_", ""): k for k in ActionKind}

_LINE_RE = re.compile(r"^\s*([A-Za-z_ ]*?)\s*\[(.*)\]\s*$", re.DOTALL)


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def render(self) -> str:
        return f"{self.kind.value} [ {' | '.join(self.args)} ]"

    def __str__(self):
        return self.render()


def parse_action_line(line: str) -> Action:
    """Parse one action line like ``Count [ expression1 ]``.

    Raises UnknownVerb, ArityMismatch or MalformedBrackets; nothing else.
    """
    m = _LINE_RE.match(line)
    if m is None:
        raise MalformedBrackets(f"expected 'Verb [ arg | ... ]', got {line.strip()!r}")
    verb, inner = m.group(1), m.group(2)
    key = re.sub(r"[\s_]", "", verb).lower()
    kind = _VERBS.get(key)
    if kind is None:
        raise UnknownVerb(f"unknown action {verb.strip()!r}")
    args = [a.strip() for a in inner.split("|")] if inner.strip() else []
    if len(args) != kind.arity or any(not a for a in args):
        raise ArityMismatch(
            f"{kind.value} takes {kind.arity} argument(s), got {len([a for a in args if a])}"
        )
    return Action(kind, tuple(args))


def action_lines(block: str) -> list[str]:
    """Non-blank lines of an action block, in order."""
    return [ln for ln in block.splitlines() if ln.strip()]
