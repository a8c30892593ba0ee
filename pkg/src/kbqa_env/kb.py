"""In-memory knowledge base and the reference evaluator for expression trees.

Terms are plain strings.  Entity ids are bare (``m.01``); literals keep their
double quotes (``"1.80"``) so they can never collide with an entity id.
"""
from __future__ import annotations

import io
import logging
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import EmptyEntitySet, UnreadableSource
from .expression import (
    NUMBER_RE,
    And,
    Arg,
    Cmp,
    Count,
    Join,
    Start,
    Tc,
    Tree,
    TypeConstraint,
)

log = logging.getLogger(__name__)

TYPE_RELATION = "type.object.type"
NAME_RELATION = "type.object.name"


def is_literal(term: str) -> bool:
    return term.startswith('"')


def literal_value(term: str) -> str:
    """Lexical form of a term: quotes dropped from literals, ids unchanged."""
    if is_literal(term) and len(term) >= 2 and term.endswith('"'):
        return term[1:-1]
    return term


def numeric_value(term: str) -> float | None:
    text = literal_value(term)
    return float(text) if NUMBER_RE.match(text) else None


def inverse(relation: str) -> tuple[str, bool]:
    """Split an optional ``^`` marker: returns ``(bare_relation, is_inverse)``."""
    if relation.startswith("^"):
        return relation[1:], True
    return relation, False


@dataclass(frozen=True)
class MalformedTriple:
    line_no: int
    text: str
    reason: str


@dataclass
class LoadReport:
    lines: int = 0
    ingested: int = 0
    duplicates: int = 0
    errors: list = field(default_factory=list)

    @property
    def skipped(self) -> int:
        return len(self.errors)


class KnowledgeBase:
    """Immutable triple set with head/tail/relation indexes."""

    def __init__(self, triples=(), type_relation=TYPE_RELATION, name_relation=NAME_RELATION):
        self.triples = frozenset(triples)
        self.type_relation = type_relation
        self.report = LoadReport()
        self._tails = defaultdict(set)   # (head, rel) -> tails
        self._heads = defaultdict(set)   # (rel, tail) -> heads
        self._out = defaultdict(set)     # head -> rels
        self._in = defaultdict(set)      # tail -> rels
        self.labels = {}
        for h, r, t in sorted(self.triples):
            self._tails[(h, r)].add(t)
            self._heads[(r, t)].add(h)
            self._out[h].add(r)
            self._in[t].add(r)
            if r == name_relation and is_literal(t):
                self.labels.setdefault(h, literal_value(t))

    def __len__(self):
        return len(self.triples)

    def __contains__(self, triple):
        return triple in self.triples

    @property
    def relations(self) -> set[str]:
        return {r for _, r, _ in self.triples}

    @property
    def entities(self) -> set[str]:
        ents = {h for h, _, _ in self.triples}
        ents.update(t for _, _, t in self.triples if not is_literal(t))
        return ents

    def tails(self, head, relation) -> set[str]:
        return self._tails.get((head, relation), set())

    def heads(self, relation, tail) -> set[str]:
        return self._heads.get((relation, tail), set())

    def out_relations(self, entity) -> set[str]:
        return self._out.get(entity, set())

    def in_relations(self, entity) -> set[str]:
        return self._in.get(entity, set())

    def objects(self, subject, relation) -> set[str]:
        """Values reached from ``subject`` along ``relation`` (``^`` flips it)."""
        bare, inv = inverse(relation)
        return self.heads(bare, subject) if inv else self.tails(subject, bare)

    def label(self, entity) -> str:
        return self.labels.get(entity, entity)


def _parse_line(line):
    parts = line.split(None, 2)
    if len(parts) != 3:
        return None, f"expected 3 fields, got {len(parts)}"
    h, r, t = parts
    t = t.strip()
    if is_literal(h):
        return None, "head cannot be a literal"
    if "." not in r:
        return None, "relation id needs a '.' separator"
    if is_literal(t):
        if len(t) < 2 or not t.endswith('"'):
            return None, "unterminated literal"
    elif len(t.split()) != 1:
        return None, f"expected 3 fields, got {2 + len(t.split())}"
    return (h, r, t), None


def load_triples(source, **kwargs) -> KnowledgeBase:
    """Build a KnowledgeBase from the whitespace-separated triple format.

    ``source`` is a path (``os.PathLike``), a file object, or the triple text
    itself when given as ``str``.  Malformed lines are skipped and listed in
    ``kb.report.errors``.
    """
    if isinstance(source, os.PathLike):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise UnreadableSource(f"cannot read {os.fspath(source)}: {e}") from e
    elif isinstance(source, str):
        text = source
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        text = source.read()
    else:
        raise UnreadableSource(f"unsupported source type {type(source).__name__}")

    report = LoadReport()
    triples = set()
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        report.lines += 1
        triple, reason = _parse_line(line)
        if triple is None:
            report.errors.append(MalformedTriple(no, raw, reason))
            continue
        if triple in triples:
            report.duplicates += 1
        triples.add(triple)
    report.ingested = len(triples)
    if report.errors:
        log.warning("skipped %d malformed triple line(s)", report.skipped)
    kb = KnowledgeBase(triples, **kwargs)
    kb.report = report
    return kb


def neighbor_relations(kb: KnowledgeBase, entities) -> set[tuple[str, str]]:
    """``(relation, 'out')`` for edges leaving an entity, ``'in'`` for edges entering."""
    entities = set(entities)
    if not entities:
        raise EmptyEntitySet("neighbor_relations needs at least one entity")
    out = set()
    for e in entities:
        out.update((r, "out") for r in kb.out_relations(e))
        out.update((r, "in") for r in kb.in_relations(e))
    return out


# -- evaluation -----------------------------------------------------------

@dataclass(frozen=True)
class ResultSet:
    entities: frozenset = frozenset()
    number: int | None = None

    @property
    def kind(self) -> str:
        return "number" if self.number is not None else "entities"

    @classmethod
    def of(cls, items) -> "ResultSet":
        return cls(frozenset(items))

    def answers(self) -> list[str]:
        """Answer tokens: the count, or the sorted entity/literal set."""
        if self.number is not None:
            return [str(self.number)]
        return sorted(self.entities)

    def truncated_view(self, k: int, kb: KnowledgeBase | None = None) -> list[tuple[str, str]]:
        items = sorted(self.entities)[:k]
        return [(x, kb.label(x) if kb else x) for x in items]


_YEAR_RE = re.compile(r"^\d{4}$")
_END_SUFFIXES = {"from": "to", "start": "end", "start_date": "end_date", "begin": "end"}


def end_relation(relation: str) -> str | None:
    """The relation closing an interval opened by ``relation``, if any."""
    prefix, _, last = relation.rpartition(".")
    for start, end in _END_SUFFIXES.items():
        if last == start:
            return f"{prefix}.{end}" if prefix else end
        if last.endswith("_" + start):
            return f"{prefix}.{last[: -len(start)]}{end}" if prefix else last[: -len(start)] + end
    return None


def time_match(kb: KnowledgeBase, subject: str, relation: str, value: str, time: str) -> bool:
    if time == "NOW":
        bare, inv = inverse(relation)
        end = end_relation(bare)
        return end is None or inv or not kb.objects(subject, end)
    u = literal_value(value)
    if u == time:
        return True
    return bool(_YEAR_RE.match(time)) and u[:4] == time


def _compare(mode, u, v):
    if mode == "lt":
        return u < v
    if mode == "le":
        return u <= v
    if mode == "gt":
        return u > v
    return u >= v


def _eval(kb, tree) -> set[str]:
    if isinstance(tree, Start):
        return {tree.token}
    if isinstance(tree, Join):
        sub = _eval(kb, tree.child)
        bare, inv = inverse(tree.relation)
        out = set()
        for x in sub:
            out |= kb.tails(x, bare) if inv else kb.heads(bare, x)
        return out
    if isinstance(tree, And):
        return _eval(kb, tree.left) & _eval(kb, tree.right)
    if isinstance(tree, TypeConstraint):
        return {x for x in _eval(kb, tree.child) if tree.type in kb.tails(x, kb.type_relation)}
    if isinstance(tree, Arg):
        scored = {}
        for x in _eval(kb, tree.child):
            vals = [v for v in map(numeric_value, kb.objects(x, tree.relation)) if v is not None]
            if vals:
                scored[x] = max(vals) if tree.mode == "MAX" else min(vals)
        if not scored:
            return set()
        best = max(scored.values()) if tree.mode == "MAX" else min(scored.values())
        return {x for x, v in scored.items() if v == best}
    if isinstance(tree, Cmp):
        return {
            x
            for x in _eval(kb, tree.child)
            if any(
                (u := numeric_value(t)) is not None and _compare(tree.mode, u, tree.number)
                for t in kb.objects(x, tree.relation)
            )
        }
    if isinstance(tree, Tc):
        return {
            x
            for x in _eval(kb, tree.child)
            if any(time_match(kb, x, tree.relation, u, tree.time) for u in kb.objects(x, tree.relation))
        }
    raise TypeError(f"cannot evaluate {tree!r}")


def evaluate(kb: KnowledgeBase, tree: Tree) -> ResultSet:
    """Denotation of ``tree`` over ``kb``.  Total: non-numeric values are skipped."""
    if isinstance(tree, Count):
        return ResultSet(number=len(_eval(kb, tree.child)))
    return ResultSet.of(_eval(kb, tree))
