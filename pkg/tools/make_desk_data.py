"""Regenerate the shipped desk data under src/kbqa_env/data/.

Writes the seeded 300-triple KB and two 5-question datasets (one per KB).
Gold answers are the native evaluation of each gold S-expression; the test
suite re-checks them with an independent brute-force evaluator.
"""
import itertools
import json
from pathlib import Path

from kbqa_env.expression import parse_sexpr
from kbqa_env.kb import evaluate, literal_value, load_triples
from kbqa_env.synthetic import random_kb, to_text

DATA = Path(__file__).resolve().parents[1] / "src" / "kbqa_env" / "data"
SEED = 7

FIXTURE_QUESTIONS = [
    ("f1", "Who was born in m.20?", ["m.20"],
     "(JOIN people.person.place_of_birth m.20)"),
    ("f2", "How many people were born in m.20?", ["m.20"],
     "(COUNT (JOIN people.person.place_of_birth m.20))"),
    ("f3", "Which person born in m.20 is shorter than 1.70 meters?", ["m.20"],
     "(lt people.person.height_meters 1.70 (AND people.person (JOIN people.person.place_of_birth m.20)))"),
    ("f4", "Who is the tallest person born somewhere inside m.30?", ["m.30"],
     "(ARGMAX (JOIN people.person.place_of_birth (JOIN location.location.containedby m.30)) people.person.height_meters)"),
    ("f5", "Which person born in m.20 took office in 2009?", ["m.20"],
     "(TC (JOIN people.person.place_of_birth m.20) government.office.from 2009)"),
]


def first(kb, templates, lo=1, hi=6):
    """First instantiation (in a fixed enumeration order) with lo..hi answers."""
    ents = sorted(kb.entities)
    for e, e2 in itertools.product(ents, ents):
        for tpl in templates:
            s = tpl.format(e=e, e2=e2)
            res = evaluate(kb, parse_sexpr(s))
            n = res.number if res.number is not None else len(res.entities)
            if res.number is None and lo <= n <= hi:
                return s, e, e2
    raise RuntimeError(f"no instance for {templates}")


def random_questions(kb):
    picks = [
        ("r1", "What is the score of {e}?", ["(JOIN ^ex.node.score {e})"]),
        ("r2", "What links to {e} and is located in {e2}?",
         ["(AND (JOIN ex.node.link {e}) (JOIN ex.node.located_in {e2}))"]),
        ("r3", "Which members of {e} score at least 5?",
         ["(ge ex.node.score 5 (JOIN ex.node.member_of {e}))"]),
        ("r4", "Which nodes located in {e} are still active?",
         ["(TC (JOIN ex.node.located_in {e}) ex.node.from NOW)"]),
        ("r5", "Which child of a node located in {e} has the lowest score?",
         ["(ARGMIN (JOIN ex.node.parent (JOIN ex.node.located_in {e})) ex.node.score)"]),
    ]
    out = []
    for qid, text, tpls in picks:
        s, e, e2 = first(kb, tpls)
        topics = [e] if "{e2}" not in tpls[0] else [e, e2]
        out.append((qid, text.format(e=e, e2=e2), topics, s))
    return out


def write_dataset(path, kb, questions):
    with open(path, "w", encoding="utf-8") as fh:
        for qid, question, topics, sexpr in questions:
            answers = [literal_value(a) for a in evaluate(kb, parse_sexpr(sexpr)).answers()]
            rec = {"qid": qid, "question": question, "topic_entities": topics,
                   "gold_sexpr": sexpr, "answers": [answers]}
            fh.write(json.dumps(rec) + "\n")


def main():
    fixture = load_triples(DATA / "fixture_kb1.txt")
    write_dataset(DATA / "desk_fixture.jsonl", fixture, FIXTURE_QUESTIONS)

    kb = random_kb(SEED)
    (DATA / "random_kb.txt").write_text(
        f"# seeded synthetic KB: seed={SEED}, 50 entities, 8 relations, 300 triples\n" + to_text(kb.triples)
    )
    write_dataset(DATA / "desk_random.jsonl", kb, random_questions(kb))


if __name__ == "__main__":
    main()
