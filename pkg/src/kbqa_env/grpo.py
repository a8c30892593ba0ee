"""GRPO numerics: group-centred advantages, asymmetric clipped surrogate, k3 KL.

All functions work on caller-supplied log-probabilities; nothing here knows
about a model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGroup, LengthMismatch


@dataclass(frozen=True)
class GrpoConfig:
    n_rollouts: int = 5
    eps_low: float = 0.2
    eps_high: float = 0.28
    beta: float = 0.001
    # sampling knobs, read only by the remote policy
    temperature: float = 1.0
    top_p: float = 0.99


@dataclass
class RolloutGroup:
    rewards: list
    logps_new: list
    logps_old: list
    logps_ref: list

    def __post_init__(self):
        self.rewards = np.asarray(self.rewards, dtype=float)
        n = len(self.rewards)
        if not (len(self.logps_new) == len(self.logps_old) == len(self.logps_ref) == n):
            raise LengthMismatch("need one log-prob array per reward")
        self.logps_new = [np.asarray(x, dtype=float) for x in self.logps_new]
        self.logps_old = [np.asarray(x, dtype=float) for x in self.logps_old]
        self.logps_ref = [np.asarray(x, dtype=float) for x in self.logps_ref]
        for i, (a, b, c) in enumerate(zip(self.logps_new, self.logps_old, self.logps_ref)):
            if not (a.shape == b.shape == c.shape) or a.ndim != 1:
                raise LengthMismatch(f"trajectory {i}: new/old/ref token arrays differ in length")
            if (a > 0).any() or (b > 0).any() or (c > 0).any():
                raise ValueError(f"trajectory {i}: log-probabilities must be <= 0")


def group_advantages(rewards) -> np.ndarray:
    """Reward minus the group mean."""
    r = np.asarray(rewards, dtype=float)
    if r.size == 0:
        raise EmptyGroup("cannot centre an empty group")
    a = r - math.fsum(r) / r.size
    # second pass removes the rounding left by the first, so equal rewards give exact zeros
    return a - math.fsum(a) / a.size


def clipped_token_objective(logp_new, logp_old, advantage, cfg: GrpoConfig = GrpoConfig()):
    """Pessimistic PPO surrogate ``min(rho*A, clip(rho, 1-eps_low, 1+eps_high)*A)``; vectorised."""
    ratio = np.exp(np.asarray(logp_new, dtype=float) - np.asarray(logp_old, dtype=float))
    clipped = np.clip(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high)
    out = np.minimum(ratio * advantage, clipped * advantage)
    return float(out) if out.ndim == 0 else out


def kl_penalty(logp_new, logp_ref):
    """k3 estimator ``exp(d) - d - 1`` with ``d = logp_ref - logp_new``."""
    d = np.asarray(logp_ref, dtype=float) - np.asarray(logp_new, dtype=float)
    out = np.expm1(d) - d
    return float(out) if out.ndim == 0 else out


def grpo_batch_objective(group: RolloutGroup, cfg: GrpoConfig = GrpoConfig(), advantages=None):
    """Token-mean surrogate minus ``beta`` times token-mean KL, with its gradient.

    Returns ``(objective, grads)`` where ``grads[i]`` is d objective / d logps_new[i].
    ``advantages`` overrides the group-centred rewards when given.
    """
    adv = group_advantages(group.rewards) if advantages is None else np.asarray(advantages, dtype=float)
    if adv.shape != group.rewards.shape:
        raise LengthMismatch("one advantage per trajectory")
    n_tokens = sum(x.size for x in group.logps_new)
    if n_tokens == 0:
        return 0.0, [np.zeros(0) for _ in group.logps_new]

    total = 0.0
    grads = []
    for a, new, old, ref in zip(adv, group.logps_new, group.logps_old, group.logps_ref):
        ratio = np.exp(new - old)
        unclipped = ratio * a
        clipped = np.clip(ratio, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high) * a
        surrogate = np.minimum(unclipped, clipped)
        d = ref - new
        kl = np.expm1(d) - d
        total += surrogate.sum() - cfg.beta * kl.sum()
        # where the clipped branch is strictly smaller it is flat in logp_new
        live = unclipped <= clipped
        g = np.where(live, unclipped, 0.0) - cfg.beta * (-np.expm1(d))
        grads.append(g / n_tokens)
    return float(total / n_tokens), grads
