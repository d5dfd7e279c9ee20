"""Synthetic contextual bandit for checking that the DQN recovers the best
category per state."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rcs import DqnConfig, QNetwork, dqn_train, q_values
from .taxonomy import N_ACTIONS


@dataclass
class BanditConfig:
    n_states: int = 50
    d: int = 4096
    min_valid: int = 4
    seed: int = 0


class SyntheticBandit:
    """Random sign-vector states, one-step episodes, fixed rewards in [-1, 1].

    RETAIN (the last action) is always valid; every state has between
    ``min_valid`` and 15 valid actions.
    """

    def __init__(self, cfg: BanditConfig):
        if not 1 <= cfg.min_valid <= N_ACTIONS:
            raise ValueError("min_valid out of range")
        rng = np.random.default_rng(cfg.seed)
        self.cfg = cfg
        self.states = rng.choice([-1.0, 1.0], size=(cfg.n_states, cfg.d))
        self.rewards = rng.uniform(-1.0, 1.0, size=(cfg.n_states, N_ACTIONS))
        self.masks = np.zeros((cfg.n_states, N_ACTIONS), dtype=np.int8)
        for i in range(cfg.n_states):
            k = int(rng.integers(cfg.min_valid, N_ACTIONS + 1))
            others = rng.choice(N_ACTIONS - 1, size=k - 1, replace=False)
            self.masks[i, others] = 1
            self.masks[i, -1] = 1

    def keys(self):
        return range(self.cfg.n_states)

    def observe(self, key):
        return self.states[key], self.masks[key]

    def step(self, key, action, rng):
        return self.states[key], self.masks[key], float(self.rewards[key, action]), True

    def best_actions(self) -> np.ndarray:
        return np.where(self.masks == 1, self.rewards, -np.inf).argmax(axis=1)

    def greedy_accuracy(self, net: QNetwork) -> float:
        best = self.best_actions()
        hits = sum(
            int(np.argmax(q_values(net, self.states[i], self.masks[i])) == best[i])
            for i in range(self.cfg.n_states)
        )
        return hits / self.cfg.n_states


def run_bandit(updates: int = 2000, alpha: float = 1e-3, tau: float = 0.3, batch_size: int = 10,
               h: int = 128, bandit: BanditConfig = BanditConfig()) -> tuple[float, QNetwork]:
    """Train for `updates` gradient steps and return the greedy accuracy.

    Every step is one terminal transition, so an epoch over the states yields
    ``n_states / batch_size`` updates.
    """
    env = SyntheticBandit(bandit)
    per_epoch = bandit.n_states // batch_size
    if per_epoch == 0 or updates % per_epoch:
        raise ValueError(f"updates must be a multiple of {per_epoch}")
    cfg = DqnConfig(alpha=alpha, gamma=0.0, tau=tau, batch_size=batch_size,
                    epochs=updates // per_epoch, h=h, d=bandit.d, seed=bandit.seed)
    net = dqn_train(env, cfg, bandit.d)
    return env.greedy_accuracy(net), net
