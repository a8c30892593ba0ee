"""Decision providers: callables mapping chat messages to assistant text."""
from __future__ import annotations

import os
import random

import requests

from .errors import GoldParseError, PolicyFailure, SExprError
from .expression import extract_actions, parse_sexpr
from .grpo import GrpoConfig
from .kb import KnowledgeBase, evaluate
from .reward import GoldRecord


def _turn_index(messages) -> int:
    return sum(1 for m in messages if m["role"] == "assistant")


def gold_actions(record: GoldRecord):
    try:
        tree = parse_sexpr(record.gold_sexpr)
    except SExprError as e:
        raise GoldParseError(f"{record.qid}: {e}") from e
    return tree, extract_actions(tree)


def gold_replay_policy(record: GoldRecord, kb: KnowledgeBase):
    """Replays the gold action sequence one action per turn, then answers.

    The answer is whatever the gold tree evaluates to on ``kb``.
    """
    tree, actions = gold_actions(record)
    answer = " ".join(evaluate(kb, tree).answers())

    def policy(messages):
        k = _turn_index(messages)
        if k < len(actions):
            return (f"<think>Step {k + 1}: apply the next action toward the answer.</think>\n"
                    f"<action>{actions[k].render()}</action>")
        return f"<think>The expression is complete.</think>\n<answer>{answer}</answer>"

    return policy


def random_policy(record: GoldRecord, kb: KnowledgeBase, seed: int = 0, answer_prob: float = 0.25):
    """Well-formed but uninformed: random hops from the topic entities, random answers."""
    rng = random.Random(f"{seed}:{record.qid}")
    relations = sorted(kb.relations)
    entities = sorted(kb.entities)
    starts = list(record.topic_entities) or entities[:1]

    def policy(messages):
        k = _turn_index(messages)
        if k > 0 and rng.random() < answer_prob:
            picks = rng.sample(entities, min(len(entities), rng.randint(1, 3)))
            return f"<think>Guessing.</think>\n<answer>{' '.join(picks)}</answer>"
        src = rng.choice(starts) if k == 0 or rng.random() < 0.5 else "expression1"
        return (f"<think>Try a relation.</think>\n"
                f"<action>Find_relation [ {src} | {rng.choice(relations)} ]</action>")

    return policy


def chat_completion(endpoint: str, messages, sampling: GrpoConfig = GrpoConfig(), model: str = "default",
                    max_tokens: int = 1024, timeout: float = 60.0, session=None) -> str:
    """POST an OpenAI-style chat completion and return ``choices[0].message.content``."""
    http = session or requests
    payload = {
        "model": model,
        "messages": messages,
        "temperature": sampling.temperature,
        "top_p": sampling.top_p,
        "max_tokens": max_tokens,
    }
    try:
        resp = http.post(endpoint, json=payload, timeout=timeout)
    except requests.Timeout as e:
        raise PolicyFailure(f"chat endpoint timed out after {timeout}s") from e
    except requests.RequestException as e:
        raise PolicyFailure(f"chat endpoint unreachable: {e}") from e
    if resp.status_code != 200:
        raise PolicyFailure(f"chat endpoint returned HTTP {resp.status_code}")
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as e:
        raise PolicyFailure(f"malformed chat response: {e!r}") from None
    if not isinstance(content, str) or not content.strip():
        raise PolicyFailure("chat endpoint returned an empty message")
    return content


def remote_chat_policy(endpoint: str | None = None, sampling: GrpoConfig = GrpoConfig(), **kwargs):
    """Policy backed by a chat-completion server (``KBQA_ENDPOINT`` by default)."""
    endpoint = endpoint or os.environ.get("KBQA_ENDPOINT")
    if not endpoint:
        raise ValueError("no chat endpoint given and KBQA_ENDPOINT is unset")
    session = requests.Session()

    def policy(messages):
        return chat_completion(endpoint, messages, sampling, session=session, **kwargs)

    return policy
