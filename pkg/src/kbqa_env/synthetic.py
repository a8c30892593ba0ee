"""Seeded synthetic knowledge bases for tests and the shipped desk data."""
from __future__ import annotations

import random

from .kb import KnowledgeBase

SYNTHETIC_RELATIONS = (
    "ex.node.link",
    "ex.node.parent",
    "ex.node.member_of",
    "ex.node.located_in",
    "ex.node.score",
    "ex.node.from",
    "ex.node.to",
    "type.object.type",
)
TYPES = ("ex.type.alpha", "ex.type.beta", "ex.type.gamma")


def random_triples(seed=0, n_entities=50, n_triples=300):
    """``n_triples`` distinct triples over ``n_entities`` ids and the 8 relations above."""
    rng = random.Random(seed)
    ents = [f"m.r{i:02d}" for i in range(n_entities)]
    triples = set()
    while len(triples) < n_triples:
        h = rng.choice(ents)
        r = rng.choice(SYNTHETIC_RELATIONS)
        if r == "ex.node.score":
            t = f'"{rng.randint(0, 40) / 4:g}"'
        elif r in ("ex.node.from", "ex.node.until"):
            t = f'"{rng.randint(1990, 2005)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"'
        elif r == "type.object.type":
            t = rng.choice(TYPES)
        else:
            t = rng.choice(ents)
        triples.add((h, r, t))
    return triples


def random_kb(seed=0, n_entities=50, n_triples=300) -> KnowledgeBase:
    return KnowledgeBase(random_triples(seed, n_entities, n_triples))


def to_text(triples) -> str:
    return "".join(f"{h} {r} {t}\n" for h, r, t in sorted(triples))
