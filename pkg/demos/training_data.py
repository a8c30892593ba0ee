"""From gold references to SFT records and a GRPO update signal.

Builds a reference-hinted prompt, rolls out the gold policy, keeps the
trajectory if it clears the filter, emits a masked SFT record, then
computes group advantages and the clipped objective for a toy group.

    python3 demos/training_data.py
"""
import numpy as np

from kbqa_env import (
    GrpoConfig,
    RolloutGroup,
    build_reference_prompt,
    data_path,
    emit_sft_records,
    filter_trajectory,
    gold_replay_policy,
    group_advantages,
    grpo_batch_objective,
    load_triples,
    read_gold,
    run_episode,
)
from kbqa_env.policies import gold_actions


def main():
    kb = load_triples(data_path("random_kb.txt"))
    record = read_gold(data_path("desk_random.jsonl"))[1]
    _, refs = gold_actions(record)
    print(build_reference_prompt(record.question, record.topic_entities, refs))

    traj = run_episode(gold_replay_policy(record, kb), kb, record, reference_actions=refs)
    verdict = filter_trajectory(traj.transcript, record.answers)
    print("\naccepted:", verdict.accepted, "reward:", verdict.breakdown.total)
    if verdict.accepted:
        (sft,) = emit_sft_records([(traj.prompt, traj.transcript)], [{"qid": record.qid}])
        for text, masked in sft.completion_segments:
            print(f"  {'masked' if masked else 'trained':8} {text[:70]!r}")

    rewards = [1.1, 0.0, 0.55, 1.1, 0.0]
    print("\nadvantages:", group_advantages(rewards).round(3).tolist())
    rng = np.random.default_rng(0)
    old = [rng.uniform(-2, -0.1, 4) for _ in rewards]
    new = [o + rng.normal(0, 0.2, o.size) for o in old]
    new = [np.minimum(n, 0.0) for n in new]
    obj, grads = grpo_batch_objective(RolloutGroup(rewards, new, old, old), GrpoConfig())
    print("objective:", round(obj, 6), "grad norm:", round(float(np.linalg.norm(np.concatenate(grads))), 6))


if __name__ == "__main__":
    main()
