"""Show how a proposed relation name is checked against the KB.

A close-but-wrong name lands in the tentative tier with cues; an exact
name is auto-validated; nonsense is rejected.

    python3 demos/relation_gating.py
"""
from kbqa_env import data_path, default_similarity, gate, load_triples, neighbor_relations, score_candidates


def main():
    kb = load_triples(data_path("fixture_kb1.txt"))
    candidates = sorted(neighbor_relations(kb, ["m.20"]))
    print("relations around m.20:", candidates)
    for proposed in ["people.person.place_of_birth", "place of birth", "zzz.unrelated"]:
        d = gate(score_candidates(default_similarity, proposed, candidates))
        best = f"{d.best.executable} ({d.best.score:.3f})" if d.best else "-"
        print(f"{proposed!r:34} -> {d.tier.value:15} best={best} replacement={d.replacement}")


if __name__ == "__main__":
    main()
