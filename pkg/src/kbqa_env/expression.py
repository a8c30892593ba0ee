"""Logical-form trees, the slot workspace that actions edit, and S-expression I/O.

Actions never build a whole program at once.  Each one edits a numbered slot
(``expression1``, ``expression2``, ...) in an :class:`ExpressionState`:

    >>> s = ExpressionState()
    >>> s, sid = apply_action(s, parse_action_line("Find_relation [ m.20 | people.person.place_of_birth ]"))
    >>> serialize(s.slots[sid])
    '(JOIN people.person.place_of_birth m.20)'
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Union

from .errors import (
    ArityError,
    CountNotLast,
    InvalidAtom,
    InvalidMode,
    InvalidTree,
    NumberParse,
    TimeParse,
    UnbalancedParens,
    UnknownOperator,
    UnresolvedSlot,
)
from .transcript import Action, ActionKind

ARG_MODES = ("MAX", "MIN")
CMP_MODES = ("le", "lt", "ge", "gt")

SLOT_RE = re.compile(r"^expression(\d+)$")
NUMBER_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")
ATOM_RE = re.compile(r'^(?:[^\s()"]+|"(?:[^"\\]|\\.)*")$')
TIME_RE = re.compile(r"^(\d{4}(-(0[1-9]|1[0-2])(-(0[1-9]|[12]\d|3[01]))?)?|NOW)$")


# -- trees ----------------------------------------------------------------

@dataclass(frozen=True)
class Start:
    token: str


@dataclass(frozen=True)
class Join:
    relation: str
    child: "Tree"


@dataclass(frozen=True)
class And:
    left: "Tree"
    right: "Tree"


@dataclass(frozen=True)
class TypeConstraint:
    child: "Tree"
    type: str


@dataclass(frozen=True)
class Arg:
    mode: str
    child: "Tree"
    relation: str


@dataclass(frozen=True)
class Cmp:
    mode: str
    relation: str
    number: float
    child: "Tree"


@dataclass(frozen=True)
class Tc:
    child: "Tree"
    relation: str
    time: str


@dataclass(frozen=True)
class Count:
    child: "Tree"


Tree = Union[Start, Join, And, TypeConstraint, Arg, Cmp, Tc, Count]


def children(tree: Tree) -> tuple:
    if isinstance(tree, Start):
        return ()
    if isinstance(tree, And):
        return (tree.left, tree.right)
    return (tree.child,)


def check_tree(tree: Tree, root: bool = True) -> None:
    """Raise InvalidTree unless ``tree`` is in the action-reachable domain.

    Only JOIN may take a bare entity; every other operator works on compound
    subtrees, and COUNT may only be the root.
    """
    if isinstance(tree, Start):
        if root:
            raise InvalidTree("a bare entity is not an expression")
        if SLOT_RE.match(tree.token):
            raise InvalidTree(f"slot token {tree.token} cannot be an entity")
        return
    if isinstance(tree, Count) and not root:
        raise InvalidTree("COUNT may only appear at the root")
    if isinstance(tree, Arg) and tree.mode not in ARG_MODES:
        raise InvalidTree(f"bad ARG mode {tree.mode}")
    if isinstance(tree, Cmp) and tree.mode not in CMP_MODES:
        raise InvalidTree(f"bad comparison mode {tree.mode}")
    if isinstance(tree, Tc) and not TIME_RE.match(tree.time):
        raise InvalidTree(f"bad time literal {tree.time}")
    for c in children(tree):
        if isinstance(c, Start) and not isinstance(tree, Join):
            raise InvalidTree(f"{type(tree).__name__} needs a compound operand")
        check_tree(c, root=False)


def format_number(x: float) -> str:
    """Shortest round-trip decimal, positional notation, no trailing '.0'."""
    s = format(Decimal(repr(float(x))), "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def parse_number(text: str) -> float:
    if not NUMBER_RE.match(text):
        raise NumberParse(f"not a decimal number: {text!r}")
    return float(text)


def serialize(tree: Tree) -> str:
    if isinstance(tree, Start):
        return tree.token
    if isinstance(tree, Join):
        return f"(JOIN {tree.relation} {serialize(tree.child)})"
    if isinstance(tree, And):
        return f"(AND {serialize(tree.left)} {serialize(tree.right)})"
    if isinstance(tree, TypeConstraint):
        return f"(AND {tree.type} {serialize(tree.child)})"
    if isinstance(tree, Arg):
        return f"(ARG{tree.mode} {serialize(tree.child)} {tree.relation})"
    if isinstance(tree, Cmp):
        return f"({tree.mode} {tree.relation} {format_number(tree.number)} {serialize(tree.child)})"
    if isinstance(tree, Tc):
        return f"(TC {serialize(tree.child)} {tree.relation} {tree.time})"
    if isinstance(tree, Count):
        return f"(COUNT {serialize(tree.child)})"
    raise TypeError(f"not an expression tree: {tree!r}")


# -- parsing --------------------------------------------------------------

_TOKEN_RE = re.compile(r'\s*(?:(\()|(\))|("(?:[^"\\]|\\.)*")|([^\s()"]+))')


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise UnbalancedParens("unterminated string literal", pos + 1)
        if m.lastindex is None:
            break
        out.append((m.group(m.lastindex), m.start(m.lastindex)))
        pos = m.end()
    return out


def parse_sexpr(text: str) -> Tree:
    """Parse a canonical S-expression; inverse of :func:`serialize`.

    Error offsets are 1-based columns; end of input is ``len(text) + 1``.
    """
    toks = _tokenize(text)
    end = len(text) + 1
    i = 0

    def peek():
        return toks[i] if i < len(toks) else (None, end - 1)

    def parse():
        nonlocal i
        tok, at = peek()
        if tok is None:
            raise UnbalancedParens("unexpected end of input", end)
        if tok == ")":
            raise UnbalancedParens("unexpected ')'", at + 1)
        i += 1
        if tok != "(":
            return Start(tok)
        op, op_at = peek()
        if op is None:
            raise UnbalancedParens("unexpected end of input", end)
        if op in ("(", ")"):
            raise UnknownOperator("expected an operator", op_at + 1)
        i += 1
        args = []
        while True:
            tok, at = peek()
            if tok is None:
                raise UnbalancedParens("missing ')'", end)
            if tok == ")":
                i += 1
                break
            args.append((parse(), at))
        return _build(op, op_at + 1, args)

    tree = parse()
    if i != len(toks):
        raise UnbalancedParens("trailing input", toks[i][1] + 1)
    try:
        check_tree(tree)
    except InvalidTree as e:
        raise ArityError(str(e), 1) from None
    return tree


def _atom(arg, what):
    node, at = arg
    if not isinstance(node, Start):
        raise ArityError(f"expected {what}", at + 1)
    return node.token


def _build(op, at, args):
    def need(n):
        if len(args) != n:
            raise ArityError(f"{op} takes {n} operands, got {len(args)}", at)

    if op == "JOIN":
        need(2)
        return Join(_atom(args[0], "a relation"), args[1][0])
    if op == "AND":
        need(2)
        (a, _), (b, _) = args
        if isinstance(a, Start):
            return TypeConstraint(b, a.token)
        if isinstance(b, Start):
            return TypeConstraint(a, b.token)
        return And(a, b)
    if op in ("ARGMAX", "ARGMIN"):
        need(2)
        return Arg(op[3:], args[0][0], _atom(args[1], "a relation"))
    if op in CMP_MODES:
        need(3)
        num = _atom(args[1], "a number")
        if not NUMBER_RE.match(num):
            raise ArityError(f"expected a number, got {num!r}", args[1][1] + 1)
        return Cmp(op, _atom(args[0], "a relation"), float(num), args[2][0])
    if op == "TC":
        need(3)
        t = _atom(args[2], "a time literal")
        if not TIME_RE.match(t):
            raise ArityError(f"bad time literal {t!r}", args[2][1] + 1)
        return Tc(args[0][0], _atom(args[1], "a relation"), t)
    if op == "COUNT":
        need(1)
        return Count(args[0][0])
    raise UnknownOperator(f"unknown operator {op!r}", at)


# -- the slot workspace ---------------------------------------------------

@dataclass(frozen=True)
class ExpressionState:
    """Numbered expression slots.  Treated as a value: updates return a copy."""

    slots: dict = field(default_factory=dict)
    current: int | None = None

    @property
    def next_id(self) -> int:
        return max(self.slots, default=0) + 1

    def tree(self, slot_token: str) -> Tree:
        return self.slots[self.resolve(slot_token)]

    def resolve(self, token: str) -> int:
        m = SLOT_RE.match(token)
        if m is None or int(m.group(1)) not in self.slots:
            raise UnresolvedSlot(f"{token} is not an allocated expression")
        return int(m.group(1))

    def with_slot(self, sid: int, tree: Tree) -> "ExpressionState":
        slots = dict(self.slots)
        slots[sid] = tree
        return ExpressionState(slots, sid)


def is_slot_token(token: str) -> bool:
    return SLOT_RE.match(token) is not None


def slot_token(sid: int) -> str:
    return f"expression{sid}"


def _editable(state, token):
    sid = state.resolve(token)
    if isinstance(state.slots[sid], Count):
        raise CountNotLast(f"{token} is already counted; COUNT must be the last step")
    return sid


def apply_action(state: ExpressionState, a: Action) -> tuple[ExpressionState, int]:
    """Apply one action and return ``(new_state, affected_slot)``.

    Compare and Time_constraint carry no expression argument and edit the
    current (most recently updated) slot.  ``state`` itself is never modified.
    """
    k, args = a.kind, a.args
    if len(args) != k.arity:
        raise ValueError(f"{k.value} expects {k.arity} arguments")
    for arg in args:
        if not ATOM_RE.match(arg):
            raise InvalidAtom(f"{arg!r} is not a single token")

    if k is ActionKind.FIND_RELATION:
        ent, rel = args
        if is_slot_token(ent):
            sid = _editable(state, ent)
            return state.with_slot(sid, Join(rel, state.slots[sid])), sid
        sid = state.next_id
        return state.with_slot(sid, Join(rel, Start(ent))), sid

    if k is ActionKind.MERGE:
        first, second = args
        sid = _editable(state, second)
        target = state.slots[sid]
        if is_slot_token(first):
            other = state.slots[_editable(state, first)]
            return state.with_slot(sid, And(other, target)), sid
        return state.with_slot(sid, TypeConstraint(target, first)), sid

    if k is ActionKind.ORDER:
        mode, expr, rel = args
        if mode.upper() not in ARG_MODES:
            raise InvalidMode(f"Order mode must be MAX or MIN, got {mode!r}")
        sid = _editable(state, expr)
        return state.with_slot(sid, Arg(mode.upper(), state.slots[sid], rel)), sid

    if k is ActionKind.COUNT:
        sid = _editable(state, args[0])
        return state.with_slot(sid, Count(state.slots[sid])), sid

    # Compare / Time_constraint act on the current expression
    if state.current is None:
        raise UnresolvedSlot(f"{k.value} needs a current expression")
    sid = _editable(state, slot_token(state.current))
    tree = state.slots[sid]
    if k is ActionKind.COMPARE:
        mode, rel, num = args
        if mode.lower() not in CMP_MODES:
            raise InvalidMode(f"Compare mode must be one of le/lt/ge/gt, got {mode!r}")
        return state.with_slot(sid, Cmp(mode.lower(), rel, parse_number(num), tree)), sid
    rel, time = args
    if not TIME_RE.match(time):
        raise TimeParse(f"not a time literal: {time!r}")
    return state.with_slot(sid, Tc(tree, rel, time)), sid


def replay(actions, state: ExpressionState | None = None) -> tuple[ExpressionState, int | None]:
    state = state or ExpressionState()
    sid = None
    for a in actions:
        state, sid = apply_action(state, a)
    return state, sid


def extract_actions(tree: Tree) -> list[Action]:
    """Linearize ``tree`` into actions, post-order and left to right.

    Replaying the result on an empty state leaves the tree in the last
    affected slot.
    """
    check_tree(tree)
    out: list[Action] = []
    counter = [0]

    def emit(kind, *args):
        out.append(Action(kind, args))

    def walk(node) -> int:
        if isinstance(node, Join):
            if isinstance(node.child, Start):
                counter[0] += 1
                emit(ActionKind.FIND_RELATION, node.child.token, node.relation)
                return counter[0]
            sid = walk(node.child)
            emit(ActionKind.FIND_RELATION, slot_token(sid), node.relation)
            return sid
        if isinstance(node, And):
            left = walk(node.left)
            right = walk(node.right)
            emit(ActionKind.MERGE, slot_token(left), slot_token(right))
            return right
        if isinstance(node, TypeConstraint):
            sid = walk(node.child)
            emit(ActionKind.MERGE, node.type, slot_token(sid))
            return sid
        if isinstance(node, Arg):
            sid = walk(node.child)
            emit(ActionKind.ORDER, node.mode, slot_token(sid), node.relation)
            return sid
        if isinstance(node, Cmp):
            sid = walk(node.child)
            emit(ActionKind.COMPARE, node.mode, node.relation, format_number(node.number))
            return sid
        if isinstance(node, Tc):
            sid = walk(node.child)
            emit(ActionKind.TIME_CONSTRAINT, node.relation, node.time)
            return sid
        if isinstance(node, Count):
            sid = walk(node.child)
            emit(ActionKind.COUNT, slot_token(sid))
            return sid
        raise InvalidTree(f"cannot linearize {node!r}")

    walk(tree)
    return out
