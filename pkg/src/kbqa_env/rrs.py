"""Reference-conditioned rejection sampling: prompts, filtering, SFT records."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import EmptyReference, UnclosedReferenceBlock
from .prompts import build_prompt
from .reward import RewardWeights, total_reward
from .transcript import SegmentKind, Transcript, parse_transcript

REF_OPEN = "<reference>"
REF_CLOSE = "</reference>"
REFERENCE_INSTRUCTION = "Follow these reference actions in order and explain in <think> why each one is needed:"

_REF_TAG_RE = re.compile(r"</?reference>")


@dataclass(frozen=True)
class RrsConfig:
    accept_f1: float = 0.9
    require_format_bonus: bool = True

    def __post_init__(self):
        if not 0.0 < self.accept_f1 <= 1.0:
            raise ValueError("accept_f1 must lie in (0, 1]")


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    reason: str | None = None  # 'f1' or 'format' when rejected
    breakdown: object = None


@dataclass
class SftRecord:
    prompt: str
    completion_segments: list  # (text, loss_masked) pairs
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "qid": self.meta.get("qid"),
            "prompt": self.prompt,
            "completion": [{"text": t, "loss_masked": m} for t, m in self.completion_segments],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def reference_block(ref_actions) -> str:
    lines = [REFERENCE_INSTRUCTION] + [a.render() for a in ref_actions]
    return REF_OPEN + "\n" + "\n".join(lines) + "\n" + REF_CLOSE


def build_reference_prompt(question: str, topic_entities, ref_actions, kinds=None) -> str:
    """The plain prompt followed by a strippable ``<reference>`` block."""
    ref_actions = list(ref_actions)
    if not ref_actions:
        raise EmptyReference("reference prompt needs at least one action")
    return build_prompt(question, topic_entities, kinds) + reference_block(ref_actions)


def strip_references(text: str) -> str:
    """Remove every ``<reference>...</reference>`` block; idempotent."""
    out = []
    pos = 0
    open_at = None
    for m in _REF_TAG_RE.finditer(text):
        if m.group() == REF_OPEN:
            if open_at is not None:
                raise UnclosedReferenceBlock(f"nested reference block at {m.start()}")
            out.append(text[pos:m.start()])
            open_at = m.start()
        else:
            if open_at is None:
                raise UnclosedReferenceBlock(f"closing reference tag without opening at {m.start()}")
            open_at = None
            pos = m.end()
    if open_at is not None:
        raise UnclosedReferenceBlock(f"reference block opened at {open_at} is never closed")
    out.append(text[pos:])
    return "".join(out)


def filter_trajectory(t: Transcript | str, gold_variants, cfg: RrsConfig = RrsConfig(),
                      w: RewardWeights = RewardWeights()) -> FilterResult:
    """Accept iff F1 strictly exceeds ``cfg.accept_f1`` and, if required, the format is valid."""
    if isinstance(t, str):
        t = parse_transcript(t)
    rb = total_reward(t, gold_variants, w)
    if not rb.f1 > cfg.accept_f1:
        return FilterResult(False, "f1", rb)
    if cfg.require_format_bonus and not rb.format_ok:
        return FilterResult(False, "format", rb)
    return FilterResult(True, None, rb)


def emit_sft_records(accepted, metas=None) -> list[SftRecord]:
    """One record per ``(prompt, transcript)``; information segments are loss-masked."""
    records = []
    metas = list(metas) if metas is not None else None
    for i, (prompt, t) in enumerate(accepted):
        source = t.source if isinstance(t, Transcript) else t
        clean = parse_transcript(strip_references(source))
        segs = [
            (clean.source[s.span[0]:s.span[1]], s.kind is SegmentKind.INFORMATION)
            for s in clean.segments
        ]
        meta = dict(metas[i]) if metas is not None else {}
        records.append(SftRecord(strip_references(prompt), segs, meta))
    return records


def write_jsonl(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
