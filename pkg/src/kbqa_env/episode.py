"""The multi-turn environment loop.

Each turn the policy sees the prompt plus every prior assistant turn and
``<information>`` observation, and returns new assistant text.  Actions in
that text are gated, applied to the expression state, executed, and
reported back.  The episode ends on an ``<answer>`` or after ``max_turns``.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .errors import ActionApplyError, ActionParseError, KbqaError, UnresolvedSlot
from .expression import Count, ExpressionState, apply_action, is_slot_token, serialize
from .kb import KnowledgeBase, ResultSet, evaluate, neighbor_relations
from .prompts import build_prompt
from .reward import GoldRecord, RewardBreakdown, RewardWeights, split_answer_text, total_reward
from .rrcg import GateDecision, RrcgConfig, Similarity, Tier, default_similarity, describe, gate, score_candidates
from .rrs import REF_CLOSE, REF_OPEN, build_reference_prompt
from .transcript import (
    Action,
    ActionKind,
    SegmentKind,
    action_lines,
    parse_action_line,
    parse_transcript,
    render_information,
)

log = logging.getLogger(__name__)

Policy = Callable[[list], str]

NO_ACTION_MESSAGE = (
    "No action found. Put actions inside <action>...</action> "
    "or give the final answer inside <answer>...</answer>."
)


@dataclass(frozen=True)
class EnvConfig:
    max_turns: int = 10
    obs_top_k: int = 10
    action_mask: frozenset | None = None
    rrcg: RrcgConfig = RrcgConfig()
    weights: RewardWeights = RewardWeights()
    similarity: Similarity = default_similarity

    def __post_init__(self):
        if self.max_turns < 1 or self.obs_top_k < 1:
            raise ValueError("max_turns and obs_top_k must be >= 1")


@dataclass
class ActionOutcome:
    line: str
    action: Action | None = None
    executed: Action | None = None
    gate: GateDecision | None = None
    slot: int | None = None
    result: ResultSet | None = None
    error: str | None = None
    observation: str = ""

    def to_dict(self) -> dict:
        d = {"line": self.line, "executed": self.executed.render() if self.executed else None}
        if self.gate is not None:
            d["gate"] = {
                "tier": self.gate.tier.value,
                "replacement": self.gate.replacement,
                "score": self.gate.best.score if self.gate.best else None,
            }
        if self.slot is not None:
            d["slot"] = self.slot
        if self.result is not None:
            d["result"] = self.result.answers()
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class Turn:
    assistant: str
    outcomes: list = field(default_factory=list)
    observation: str | None = None


@dataclass
class Trajectory:
    qid: str
    question: str
    topic_entities: list
    prompt: str
    turns: list
    transcript: str
    final_answers: list
    expression_state: ExpressionState
    reward: RewardBreakdown
    terminal_reason: str  # Answered | MaxTurns | PolicyFailure
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "qid": self.qid,
            "question": self.question,
            "topic_entities": self.topic_entities,
            "prompt": self.prompt,
            "turns": [
                {
                    "assistant": t.assistant,
                    "actions": [o.to_dict() for o in t.outcomes],
                    "observation": t.observation,
                }
                for t in self.turns
            ],
            "transcript": self.transcript,
            "final_answers": self.final_answers,
            "expressions": {
                f"expression{k}": serialize(v) for k, v in sorted(self.expression_state.slots.items())
            },
            "reward": self.reward.to_dict(),
            "terminal_reason": self.terminal_reason,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def format_results(res: ResultSet, kb: KnowledgeBase, k: int) -> str:
    if res.number is not None:
        return f"Count: {res.number}"
    items = []
    for x, label in res.truncated_view(k, kb):
        items.append(x if label == x else f"{x} ({label})")
    shown = ", ".join(items) if items else "none"
    return f"Results ({len(res.entities)} total): {shown}"


@dataclass
class StepResult:
    observation: str | None
    terminal: bool


class Episode:
    """Mutable episode state: one per question, never shared between threads."""

    def __init__(self, kb: KnowledgeBase, record: GoldRecord, cfg: EnvConfig = EnvConfig(),
                 reference_actions=None):
        self.kb = kb
        self.record = record
        self.cfg = cfg
        self.reference_actions = list(reference_actions) if reference_actions else None
        kinds = cfg.action_mask
        if self.reference_actions:
            self.prompt = build_reference_prompt(record.question, record.topic_entities,
                                                 self.reference_actions, kinds)
        else:
            self.prompt = build_prompt(record.question, record.topic_entities, kinds)
        self.state = ExpressionState()
        self.turns: list[Turn] = []
        self.final_answers: set[str] = set()
        self.terminal_reason: str | None = None
        self._executed = 0

    # -- context ----------------------------------------------------------

    def messages(self) -> list[dict]:
        msgs = [{"role": "user", "content": self.prompt}]
        for t in self.turns:
            msgs.append({"role": "assistant", "content": t.assistant})
            if t.observation is not None:
                msgs.append({"role": "user", "content": t.observation})
        return msgs

    def transcript(self) -> str:
        parts = []
        for t in self.turns:
            parts.append(t.assistant)
            if t.observation is not None:
                parts.append(t.observation)
        return "\n".join(parts)

    # -- one turn ---------------------------------------------------------

    def step(self, assistant_text: str) -> StepResult:
        if self.terminal_reason is not None:
            raise RuntimeError("episode already finished")
        # anything the model writes after its own <information> tag is hallucinated feedback
        cut = assistant_text.find("<information>")
        if cut >= 0:
            assistant_text = assistant_text[:cut].rstrip()
        turn = Turn(assistant_text)
        self.turns.append(turn)
        parsed = parse_transcript(assistant_text)

        answers = parsed.of_kind(SegmentKind.ANSWER)
        if answers:
            self.final_answers = split_answer_text(answers[-1].text)
            self.terminal_reason = "Answered"
            return StepResult(None, True)

        blocks = parsed.of_kind(SegmentKind.ACTION)
        lines = [ln for b in blocks for ln in action_lines(b.text)]
        if lines:
            turn.outcomes = [self._execute(ln.strip()) for ln in lines]
            body = "\n".join(o.observation for o in turn.outcomes)
        else:
            body = NO_ACTION_MESSAGE
        turn.observation = render_information(body) + self._next_hint()
        if len(self.turns) >= self.cfg.max_turns:
            self.terminal_reason = "MaxTurns"
            return StepResult(turn.observation, True)
        return StepResult(turn.observation, False)

    def _next_hint(self) -> str:
        if not self.reference_actions or self._executed >= len(self.reference_actions):
            return ""
        nxt = self.reference_actions[self._executed].render()
        return f"\n{REF_OPEN}Next reference action: {nxt}{REF_CLOSE}"

    def _source_entities(self, token: str) -> set[str]:
        if not is_slot_token(token):
            return {token}
        return set(evaluate(self.kb, self.state.tree(token)).entities)

    def _execute(self, line: str) -> ActionOutcome:
        out = ActionOutcome(line)
        try:
            action = parse_action_line(line)
        except ActionParseError as e:
            out.error = f"{type(e).__name__}: {e}"
            out.observation = f"Error in '{line}': {e}"
            return out
        out.action = action
        if self.cfg.action_mask is not None and action.kind not in self.cfg.action_mask:
            out.error = "ActionNotAvailable"
            out.observation = f"Error in '{line}': {action.kind.value} is not available for this dataset"
            return out

        executed = action
        note = ""
        try:
            if action.kind is ActionKind.FIND_RELATION:
                source, proposed = action.args
                counted = is_slot_token(source) and isinstance(self.state.tree(source), Count)
                # a counted slot skips gating so that apply_action reports CountNotLast
                if not counted:
                    entities = self._source_entities(source)
                    candidates = neighbor_relations(self.kb, entities) if entities else set()
                    decision = gate(score_candidates(self.cfg.similarity, proposed, candidates), self.cfg.rrcg)
                    out.gate = decision
                    note = describe(decision, proposed, entities)
                    if decision.tier is Tier.REJECTED:
                        out.error = "Rejected"
                        out.observation = note
                        return out
                    executed = Action(ActionKind.FIND_RELATION, (source, decision.replacement))
            state, sid = apply_action(self.state, executed)
        except (ActionApplyError, UnresolvedSlot) as e:
            out.error = f"{type(e).__name__}: {e}"
            out.observation = f"Error in '{line}': {e}"
            return out

        self.state = state
        self._executed += 1
        out.executed = executed
        out.slot = sid
        out.result = evaluate(self.kb, state.slots[sid])
        lines = [note] if note else []
        lines.append(f"expression{sid} = {serialize(state.slots[sid])}")
        lines.append(format_results(out.result, self.kb, self.cfg.obs_top_k))
        out.observation = "\n".join(lines)
        return out

    # -- wrap-up ----------------------------------------------------------

    def finish(self, reason: str | None = None, error: str | None = None) -> Trajectory:
        if reason is not None:
            self.terminal_reason = reason
        text = self.transcript()
        reward = total_reward(text, self.record.answers, self.cfg.weights)
        return Trajectory(
            qid=self.record.qid,
            question=self.record.question,
            topic_entities=list(self.record.topic_entities),
            prompt=self.prompt,
            turns=self.turns,
            transcript=text,
            final_answers=sorted(self.final_answers),
            expression_state=self.state,
            reward=reward,
            terminal_reason=self.terminal_reason or "MaxTurns",
            error=error,
        )


def run_episode(policy: Policy, kb: KnowledgeBase, record: GoldRecord, cfg: EnvConfig = EnvConfig(),
                reference_actions=None) -> Trajectory:
    ep = Episode(kb, record, cfg, reference_actions)
    while True:
        try:
            text = policy(ep.messages())
        except KbqaError as e:
            log.warning("policy failed on %s: %s", record.qid, e)
            return ep.finish("PolicyFailure", f"{type(e).__name__}: {e}")
        if not isinstance(text, str):
            return ep.finish("PolicyFailure", "policy returned a non-string")
        if ep.step(text).terminal:
            return ep.finish()


def run_episodes(policy_factory, kb, records, cfg: EnvConfig = EnvConfig(), workers: int = 1,
                 reference_actions_for=None) -> list[Trajectory]:
    """Run one episode per record; output order follows ``records``."""
    def one(record):
        refs = reference_actions_for(record) if reference_actions_for else None
        return run_episode(policy_factory(record), kb, record, cfg, refs)

    if workers <= 1:
        return [one(r) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, records))
