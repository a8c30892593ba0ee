"""Multi-turn KBQA environment: action protocol, KB execution, rewards, GRPO and RRS."""
from importlib.resources import files

from .episode import EnvConfig, Episode, Trajectory, run_episode, run_episodes
from .errors import KbqaError
from .expression import ExpressionState, apply_action, extract_actions, parse_sexpr, replay, serialize
from .grpo import GrpoConfig, RolloutGroup, group_advantages, grpo_batch_objective
from .kb import KnowledgeBase, ResultSet, evaluate, load_triples, neighbor_relations
from .policies import gold_replay_policy, random_policy, remote_chat_policy
from .reward import GoldRecord, RewardWeights, read_gold, total_reward
from .rrcg import RrcgConfig, Tier, default_similarity, gate, score_candidates
from .rrs import RrsConfig, build_reference_prompt, emit_sft_records, filter_trajectory, strip_references
from .sparql import execute_remote, to_sparql
from .transcript import Action, ActionKind, parse_action_line, parse_transcript, validate_format

__version__ = "0.1.0"


def data_path(name: str):
    """Path to a shipped data file such as ``fixture_kb1.txt``."""
    return files(__name__) / "data" / name


__all__ = [
    "Action", "ActionKind", "EnvConfig", "Episode", "ExpressionState", "GoldRecord", "GrpoConfig",
    "KbqaError", "KnowledgeBase", "ResultSet", "RewardWeights", "RolloutGroup", "RrcgConfig",
    "RrsConfig", "Tier", "Trajectory", "apply_action", "build_reference_prompt", "data_path",
    "default_similarity", "emit_sft_records", "evaluate", "execute_remote", "extract_actions",
    "filter_trajectory", "gate", "gold_replay_policy", "group_advantages", "grpo_batch_objective",
    "load_triples", "neighbor_relations", "parse_action_line", "parse_sexpr", "parse_transcript",
    "random_policy", "read_gold", "remote_chat_policy", "replay", "run_episode", "run_episodes",
    "score_candidates", "serialize", "strip_references", "to_sparql", "total_reward", "validate_format",
]
