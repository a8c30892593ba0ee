"""Instruction prompt for the tagged action protocol."""
from __future__ import annotations

from .transcript import ActionKind

ACTION_SIGNATURES = {
    ActionKind.FIND_RELATION: "Find_relation [ entity | relation ]",
    ActionKind.MERGE: "Merge [ expression1 | expression ]",
    ActionKind.ORDER: "Order [ MAX/MIN | expression | relation ]",
    ActionKind.COMPARE: "Compare [ le/lt/ge/gt | relation | number ]",
    ActionKind.TIME_CONSTRAINT: "Time_constraint [ relation | time ]",
    ActionKind.COUNT: "Count [ expression ]",
}

PROMPT_TEMPLATE = """\
You answer questions over the Freebase knowledge base by issuing structured actions.
Before any action, write your reasoning inside <think>...</think>.
Then put one action per line inside <action>...</action>.
Execution results come back inside <information>...</information>.
Give the final answer inside <answer>...</answer> as MIDs or literal values, separated by spaces.
Available Actions: {actions}
Start from the candidate entities linked in the question.
Candidate Entities: [ {entities} ]
Question: {question}
"""


def action_list(kinds=None) -> str:
    kinds = list(ActionKind) if kinds is None else [k for k in ActionKind if k in set(kinds)]
    return "; ".join(ACTION_SIGNATURES[k] for k in kinds)


def build_prompt(question: str, topic_entities, kinds=None) -> str:
    return PROMPT_TEMPLATE.format(
        actions=action_list(kinds),
        entities=" ".join(topic_entities),
        question=question,
    )
