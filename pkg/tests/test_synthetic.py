import numpy as np
import pytest

from reign.synthetic import BanditConfig, SyntheticBandit, run_bandit
from reign.taxonomy import N_ACTIONS


def test_bandit_construction():
    env = SyntheticBandit(BanditConfig(n_states=30, d=64, seed=1))
    assert env.states.shape == (30, 64)
    assert (env.masks[:, -1] == 1).all() and (env.masks.sum(axis=1) >= 4).all()
    assert (np.abs(env.rewards) <= 1).all()
    assert len({tuple(s) for s in env.states}) == 30
    best = env.best_actions()
    for i in range(30):
        valid = np.flatnonzero(env.masks[i])
        assert best[i] == valid[np.argmax(env.rewards[i, valid])]
    s, m, r, terminal = env.step(0, N_ACTIONS - 1, None)
    assert terminal and r == env.rewards[0, -1]


def test_bandit_rejects_bad_config():
    with pytest.raises(ValueError):
        SyntheticBandit(BanditConfig(min_valid=0))
    with pytest.raises(ValueError):
        run_bandit(updates=7)


def test_short_run_is_deterministic_and_learns():
    cfg = BanditConfig(n_states=20, d=512, seed=3)
    acc, net = run_bandit(updates=200, batch_size=10, h=32, bandit=cfg)
    acc2, net2 = run_bandit(updates=200, batch_size=10, h=32, bandit=cfg)
    assert net.equals(net2) and acc == acc2
    chance = np.mean(1 / SyntheticBandit(cfg).masks.sum(axis=1))
    assert acc > chance
