"""Relation retrieval and confidence gating.

An agent-proposed relation is scored against every schema relation around
the current entities and routed into one of three tiers: auto-validated,
tentative, or rejected.
"""
from __future__ import annotations

import enum
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

Similarity = Callable[[str, str], float]

_SPLIT_RE = re.compile(r"[._\s]+")


@dataclass(frozen=True)
class RrcgConfig:
    tau_high: float = 0.95
    tau_low: float = 0.3
    top_k: int = 5

    def __post_init__(self):
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            raise ValueError(f"need 0 <= tau_low < tau_high <= 1, got {self.tau_low}, {self.tau_high}")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")


class Tier(enum.Enum):
    AUTO_VALIDATED = "auto-validated"
    TENTATIVE = "tentative"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Scored:
    relation: str
    direction: str  # 'out' or 'in'
    score: float

    @property
    def executable(self) -> str:
        return executable_relation(self.relation, self.direction)


@dataclass(frozen=True)
class GateDecision:
    tier: Tier
    best: Scored | None = None
    cues: tuple[Scored, ...] = field(default_factory=tuple)

    @property
    def replacement(self) -> str | None:
        """Relation to execute, ``^``-marked when the match runs against the edge."""
        if self.tier is Tier.REJECTED or self.best is None:
            return None
        return self.best.executable


def executable_relation(relation: str, direction: str) -> str:
    """JOIN retrieves heads, so an entity's outgoing edges need the inverse marker."""
    return "^" + relation if direction == "out" else relation


def _features(text: str) -> Counter:
    low = text.lower()
    words = [w for w in _SPLIT_RE.split(low) if w]
    flat = " ".join(words)
    grams = [flat[i:i + 3] for i in range(len(flat) - 2)]
    return Counter(words) + Counter("#" + g for g in grams)


def default_similarity(a: str, b: str) -> float:
    """Dice coefficient over word tokens plus character trigrams.

    Words come from splitting on dots, underscores and whitespace; trigrams
    are taken from the words re-joined by single spaces.  Symmetric, in
    [0, 1], and 1.0 exactly when the lowercased strings are equal.
    """
    la, lb = a.lower(), b.lower()
    if la == lb:
        return 1.0
    fa, fb = _features(a), _features(b)
    total = sum(fa.values()) + sum(fb.values())
    if total == 0:
        return 0.0
    score = 2.0 * sum((fa & fb).values()) / total
    # distinct strings may still share every feature
    return min(score, math.nextafter(1.0, 0.0))


def score_candidates(sim: Similarity, proposed: str, candidates) -> list[Scored]:
    """Score ``proposed`` against each ``(relation, direction)`` candidate.

    The comparison string is the candidate's executable form, so ``^r`` matches
    an outgoing edge exactly.  Sorted by score, then relation id, then 'out'
    before 'in'.
    """
    scored = [Scored(r, d, float(sim(proposed, executable_relation(r, d)))) for r, d in candidates]
    scored.sort(key=lambda s: (-s.score, s.relation, 0 if s.direction == "out" else 1))
    return scored


def gate(scored: list[Scored], cfg: RrcgConfig = RrcgConfig()) -> GateDecision:
    if not scored:
        return GateDecision(Tier.REJECTED)
    best = scored[0]
    if best.score >= cfg.tau_high:
        return GateDecision(Tier.AUTO_VALIDATED, best)
    if best.score >= cfg.tau_low:
        return GateDecision(Tier.TENTATIVE, best, tuple(scored[: cfg.top_k]))
    return GateDecision(Tier.REJECTED, best, tuple(scored))


def _cue_list(cues) -> str:
    return ", ".join(f"{c.executable} ({c.score:.3f})" for c in cues)


def describe(decision: GateDecision, proposed: str, entities=()) -> str:
    """Observation line for a gate decision; empty for an exact auto-validation."""
    if decision.tier is Tier.AUTO_VALIDATED:
        if decision.replacement == proposed:
            return ""
        return (f"[auto-validated] {proposed} -> {decision.replacement} "
                f"(score {decision.best.score:.3f})")
    if decision.tier is Tier.TENTATIVE:
        return (f"[tentative] {proposed} -> {decision.replacement} "
                f"(score {decision.best.score:.3f}); candidates: {_cue_list(decision.cues)}")
    if not decision.cues:
        return f"[rejected] {' '.join(sorted(entities))} has no neighboring relations"
    return (f"[rejected] no reliable match for {proposed} "
            f"(best score {decision.best.score:.3f}); neighboring relations: {_cue_list(decision.cues)}")
