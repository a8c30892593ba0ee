"""Answer one question end to end on the shipped fixture KB.

Compiles the gold logical form, executes it natively, replays it as an
agent episode, and scores the transcript.

    python3 demos/walkthrough.py
"""
from kbqa_env import (
    data_path,
    evaluate,
    extract_actions,
    gold_replay_policy,
    load_triples,
    parse_sexpr,
    read_gold,
    run_episode,
    to_sparql,
)


def main():
    kb = load_triples(data_path("fixture_kb1.txt"))
    record = read_gold(data_path("desk_fixture.jsonl"))[0]
    tree = parse_sexpr(record.gold_sexpr)

    print("question:", record.question)
    print("logical form:", record.gold_sexpr)
    print("sparql:", to_sparql(tree))
    print("actions:")
    for a in extract_actions(tree):
        print("  ", a.render())
    print("native answers:", sorted(evaluate(kb, tree).entities))

    traj = run_episode(gold_replay_policy(record, kb), kb, record)
    print("\ntranscript:\n" + traj.transcript)
    print("\nreward:", traj.reward.to_dict())


if __name__ == "__main__":
    main()
