"""Outcome F1 against gold answer variants plus the outcome-gated format bonus."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .transcript import SegmentKind, Transcript, parse_transcript, validate_format


@dataclass(frozen=True)
class RewardWeights:
    lambda_outcome: float = 1.0
    lambda_format: float = 0.1
    format_bonus: float = 1.0

    @property
    def max_total(self) -> float:
        return self.lambda_outcome + self.lambda_format * self.format_bonus


@dataclass(frozen=True)
class RewardBreakdown:
    precision: float
    recall: float
    f1: float
    best_variant_index: int
    format_ok: bool
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


def normalize_answer(token: str) -> str:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] and token[0] in "\"'":
        token = token[1:-1]
    return token


def split_answer_text(text: str) -> set[str]:
    """Space-separated tokens, or a bracketed ``[a, b]`` list."""
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        parts = text[1:-1].replace(",", " ").split()
    else:
        parts = text.split()
    return {a for a in map(normalize_answer, parts) if a}


def extract_answers(t: Transcript) -> set[str]:
    answers = t.of_kind(SegmentKind.ANSWER)
    return split_answer_text(answers[-1].text) if answers else set()


def _prf(pred, gold):
    if not pred and not gold:
        return 1.0, 1.0, 1.0
    if not pred or not gold:
        return 0.0, 0.0, 0.0
    hit = len(pred & gold)
    if hit == 0:
        return 0.0, 0.0, 0.0
    p, r = hit / len(pred), hit / len(gold)
    return p, r, 2 * p * r / (p + r)


def answer_f1(pred, gold_variants) -> tuple[float, float, float, int]:
    """Best (precision, recall, f1, index) over the gold variants; ties keep the lowest index."""
    if not gold_variants:
        raise ValueError("need at least one gold answer variant")
    pred = {normalize_answer(a) for a in pred}
    best = None
    for i, variant in enumerate(gold_variants):
        p, r, f = _prf(pred, {normalize_answer(a) for a in variant})
        if best is None or f > best[2]:
            best = (p, r, f, i)
    return best


def total_reward(t: Transcript | str, gold_variants, w: RewardWeights = RewardWeights()) -> RewardBreakdown:
    if isinstance(t, str):
        t = parse_transcript(t)
    p, r, f1, idx = answer_f1(extract_answers(t), gold_variants)
    ok = validate_format(t).format_ok
    total = w.lambda_outcome * f1
    if f1 > 0 and ok:
        total += w.lambda_format * w.format_bonus
    return RewardBreakdown(p, r, f1, idx, ok, total)


@dataclass(frozen=True)
class GoldRecord:
    qid: str
    question: str
    topic_entities: list
    gold_sexpr: str
    answers: list  # list of variants, each a list of answer tokens

    @classmethod
    def from_dict(cls, d: dict) -> "GoldRecord":
        missing = {"qid", "question", "topic_entities", "gold_sexpr", "answers"} - set(d)
        if missing:
            raise ValueError(f"gold record lacks {sorted(missing)}")
        if not isinstance(d["answers"], list) or not all(isinstance(v, list) for v in d["answers"]):
            raise ValueError("answers must be a list of lists")
        return cls(str(d["qid"]), d["question"], list(d["topic_entities"]), d["gold_sexpr"], d["answers"])

    def to_dict(self) -> dict:
        return asdict(self)


def read_gold(path) -> list[GoldRecord]:
    """Load the gold-answer JSONL format, one record per non-blank line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(GoldRecord.from_dict(json.loads(line)))
            except (ValueError, TypeError) as e:
                raise ValueError(f"{path}:{no}: {e}") from None
    return out
