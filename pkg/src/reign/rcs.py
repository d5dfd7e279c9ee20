"""Reformulation category selector: a masked two-layer Q-network trained
with Boltzmann exploration, a FIFO experience queue and batched TD updates.
"""
from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, Hashable, Optional, Protocol, Sequence

import numpy as np

from .corpus import AnnotatedQuestion, ContractError, History, annotate, is_punct, reannotate
from .kg import KnowledgeGraph, normalize
from .taxonomy import CATEGORIES, N_ACTIONS, valid_actions

# Stands in for -inf on masked actions; finite so arithmetic stays defined.
MASKED = -np.finfo(np.float64).max

HASH_VERSION = "hbow-blake2b-1"


@dataclass
class DqnConfig:
    alpha: float = 1e-5
    gamma: float = 1.0
    tau: float = 0.3
    batch_size: int = 10
    epochs: int = 5
    h: int = 128
    d: int = 256
    k: int = 5
    seed: int = 0
    terminal_after_one_step: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        for name in ("batch_size", "epochs", "h", "d", "k"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @classmethod
    def from_dict(cls, obj: dict) -> "DqnConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown dqn config keys: {sorted(unknown)}")
        return cls(**obj)


# -- state encoding ---------------------------------------------------------

def _buckets(token: str, d: int):
    digest = hashlib.blake2b(f"{HASH_VERSION}:{token}".encode("utf-8"), digest_size=16).digest()
    for off in (0, 8):
        bucket = int.from_bytes(digest[off:off + 4], "little") % d
        sign = 1.0 if digest[off + 4] & 1 else -1.0
        yield bucket, sign


def hashed_bow_encode(question: Sequence[str], history: History, d: int,
                      history_weight: float = 0.25) -> np.ndarray:
    """Signed hashed bag of words, two buckets per token, L2-normalized."""
    if d < 16:
        raise ValueError("encoding size must be at least 16")
    vec = np.zeros(d)

    def add(tokens, weight):
        for tok in tokens:
            if is_punct(tok):
                continue
            for bucket, sign in _buckets(normalize(tok), d):
                vec[bucket] += sign * weight

    add(question, 1.0)
    for q, a in history:
        add(q, history_weight)
        add(a.split(), history_weight)
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


class Encoder(Protocol):
    d: int

    def encode(self, question: Sequence[str], history: History) -> np.ndarray: ...


class HashedBowEncoder:
    kind = "hashed_bow"
    version = HASH_VERSION

    def __init__(self, d: int = 256):
        self.d = d

    def encode(self, question, history):
        return hashed_bow_encode(question, history, self.d)


# -- Q-network --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QNetwork:
    w1: np.ndarray  # h x d
    w2: np.ndarray  # |A| x h

    def __post_init__(self):
        if self.w1.ndim != 2 or self.w2.ndim != 2 or self.w2.shape[1] != self.w1.shape[0]:
            raise ValueError(f"inconsistent shapes {self.w1.shape} / {self.w2.shape}")

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    @property
    def h(self) -> int:
        return self.w1.shape[0]

    @property
    def n_actions(self) -> int:
        return self.w2.shape[0]

    @classmethod
    def init(cls, d: int, h: int, rng: np.random.Generator, n_actions: int = N_ACTIONS) -> "QNetwork":
        w1 = rng.uniform(-1.0, 1.0, size=(h, d)) / np.sqrt(d)
        w2 = rng.uniform(-1.0, 1.0, size=(n_actions, h)) / np.sqrt(h)
        return cls(w1, w2)

    def raw(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        if s.shape[-1] != self.d:
            raise ContractError(f"state has dimension {s.shape[-1]}, network expects {self.d}")
        return np.maximum(s @ self.w1.T, 0.0) @ self.w2.T

    def equals(self, other: "QNetwork") -> bool:
        return np.array_equal(self.w1, other.w1) and np.array_equal(self.w2, other.w2)


def q_values(net: QNetwork, s: np.ndarray, mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != (net.n_actions,):
        raise ContractError(f"mask has shape {mask.shape}, expected ({net.n_actions},)")
    return np.where(mask == 1, net.raw(s), MASKED)


def boltzmann_probabilities(qvals, mask, tau: float) -> np.ndarray:
    mask = np.asarray(mask) == 1
    if not mask.any():
        raise ContractError("no valid action to sample")
    if tau <= 0:
        raise ContractError("temperature must be positive")
    q = np.asarray(qvals, dtype=np.float64)
    logits = q[mask] / tau
    e = np.exp(logits - logits.max())
    probs = np.zeros(q.shape)
    probs[mask] = e / e.sum()
    return probs


def sample_action(qvals, mask, tau: float, rng: np.random.Generator, size=None):
    """Sample from the Boltzmann distribution over valid actions only.
    Returns one index, or an array of indices when `size` is given."""
    probs = boltzmann_probabilities(qvals, mask, tau)
    cdf = np.cumsum(probs)
    u = rng.random(size) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    # guards u landing on the final cdf value after rounding
    last_valid = int(np.flatnonzero(probs > 0)[-1])
    idx = np.minimum(idx, last_valid)
    return int(idx) if size is None else idx


def top_k_categories(net: QNetwork, encoder: Encoder, aq: AnnotatedQuestion, mask, k: int) -> list[str]:
    if k < 1:
        raise ContractError("k must be at least 1")
    q = net.raw(encoder.encode(aq.tokens, aq.history))
    valid = [i for i in range(N_ACTIONS) if mask[i] == 1]
    valid.sort(key=lambda i: (-q[i], i))
    return [CATEGORIES[i].id for i in valid[:k]]


# -- TD learning ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Experience:
    s: np.ndarray
    a: int
    s_next: np.ndarray
    r: float
    next_mask: Optional[np.ndarray] = None
    terminal: bool = False


def td_targets(batch: Sequence[Experience], net: QNetwork, gamma: float) -> np.ndarray:
    """r + gamma * max over valid next actions; terminal transitions give r."""
    if not batch:
        raise ContractError("empty batch")
    out = np.empty(len(batch))
    for i, e in enumerate(batch):
        if e.terminal or gamma == 0.0:
            out[i] = e.r
            continue
        mask = e.next_mask if e.next_mask is not None else np.ones(net.n_actions, dtype=np.int8)
        out[i] = e.r + gamma * q_values(net, e.s_next, mask).max()
    return out


def _stack(batch: Sequence[Experience]):
    S = np.stack([np.asarray(e.s, dtype=np.float64) for e in batch])
    A = np.fromiter((e.a for e in batch), dtype=np.intp, count=len(batch))
    return S, A


def batch_loss(net: QNetwork, batch: Sequence[Experience], targets) -> float:
    S, A = _stack(batch)
    q = net.raw(S)[np.arange(len(batch)), A]
    return float(np.mean((np.asarray(targets) - q) ** 2))


def batch_gradient(net: QNetwork, batch: Sequence[Experience], targets):
    """Analytic gradient of the batch MSE with respect to (W1, W2)."""
    S, A = _stack(batch)
    n = len(batch)
    Z = S @ net.w1.T
    H = np.maximum(Z, 0.0)
    q = (H @ net.w2.T)[np.arange(n), A]  # same path as raw(), so a zero loss gives a zero step
    g = 2.0 * (q - np.asarray(targets, dtype=np.float64)) / n
    gw2 = np.zeros_like(net.w2)
    np.add.at(gw2, A, g[:, None] * H)
    dz = (g[:, None] * net.w2[A]) * (Z > 0)
    gw1 = dz.T @ S
    return gw1, gw2


def update(net: QNetwork, batch: Sequence[Experience], targets, alpha: float) -> QNetwork:
    if len(targets) != len(batch):
        raise ContractError(f"{len(targets)} targets for a batch of {len(batch)}")
    gw1, gw2 = batch_gradient(net, batch, targets)
    if not (np.isfinite(gw1).all() and np.isfinite(gw2).all()):
        raise FloatingPointError(
            f"non-finite gradient (|dW1|max={np.nanmax(np.abs(gw1))}, "
            f"|dW2|max={np.nanmax(np.abs(gw2))}, targets={np.asarray(targets).tolist()})"
        )
    return QNetwork(net.w1 - alpha * gw1, net.w2 - alpha * gw2)


# -- training loop ----------------------------------------------------------

class Environment(Protocol):
    def keys(self) -> Sequence[Hashable]: ...

    def observe(self, key) -> tuple[np.ndarray, np.ndarray]: ...

    def step(self, key, action: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, float, bool]: ...


def dqn_train(env: Environment, cfg: DqnConfig, d: int, net: Optional[QNetwork] = None,
              on_experience: Optional[Callable[[Experience], None]] = None) -> QNetwork:
    init_rng, sample_rng, env_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3)
    )
    if net is None:
        net = QNetwork.init(d, cfg.h, init_rng)
    queue: deque[Experience] = deque(maxlen=4 * cfg.batch_size)
    keys = list(env.keys())
    for _ in range(cfg.epochs):
        for key in keys:
            s, mask = env.observe(key)
            q = q_values(net, s, mask)
            a = sample_action(q, mask, cfg.tau, sample_rng)
            s_next, next_mask, r, terminal = env.step(key, a, env_rng)
            exp = Experience(s, a, s_next, float(r), next_mask, terminal or cfg.terminal_after_one_step)
            if on_experience is not None:
                on_experience(exp)
            queue.append(exp)
            if len(queue) >= cfg.batch_size:
                batch = [queue.popleft() for _ in range(cfg.batch_size)]
                net = update(net, batch, td_targets(batch, net, cfg.gamma), cfg.alpha)
    return net


RewardFn = Callable[..., float]


class ConversationEnv:
    """Dev questions as states; the generator produces the next state and the
    frozen QA model scores it against the original question."""

    def __init__(self, conversations, kg: KnowledgeGraph, qa, gen, reward_fn: RewardFn, encoder: Encoder):
        self.kg, self.qa, self.gen, self.reward_fn, self.encoder = kg, qa, gen, reward_fn, encoder
        self._aq: dict = {}
        for conv in conversations:
            for turn in conv.turns:
                self._aq[(conv.id, turn.index)] = annotate(kg, conv, turn.index)
        self._obs: dict = {}
        self._rewards: dict = {}

    def keys(self):
        return list(self._aq)

    def observe(self, key):
        if key not in self._obs:
            aq = self._aq[key]
            self._obs[key] = (self.encoder.encode(aq.tokens, aq.history), valid_actions(aq, self.kg))
        return self._obs[key]

    def step(self, key, action, rng):
        aq = self._aq[key]
        cat = CATEGORIES[action]
        ref = self.gen.generate(aq.history, aq, cat, rng)
        if ref is None:
            raise ContractError(
                f"generator returned nothing for valid category {cat.id} on {key}: {' '.join(aq.tokens)}"
            )
        next_aq = reannotate(self.kg, aq, ref.tokens)
        s_next = self.encoder.encode(ref.tokens, aq.history)
        rkey = (key, ref.tokens)
        if rkey not in self._rewards:
            self._rewards[rkey] = self.reward_fn(self.qa, aq.history, ref.tokens, aq.tokens, aq.gold)
        return s_next, valid_actions(next_aq, self.kg), self._rewards[rkey], False


def train_rcs(conversations, kg: KnowledgeGraph, qa, gen, reward_fn: RewardFn, cfg: DqnConfig,
              encoder: Optional[Encoder] = None, on_experience=None) -> QNetwork:
    encoder = encoder or HashedBowEncoder(cfg.d)
    env = ConversationEnv(conversations, kg, qa, gen, reward_fn, encoder)
    return dqn_train(env, cfg, encoder.d, on_experience=on_experience)


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(path, net: QNetwork, cfg: DqnConfig, encoder: Encoder) -> None:
    obj = {
        "d": net.d,
        "h": net.h,
        "actions": net.n_actions,
        "w1": net.w1.ravel().tolist(),
        "w2": net.w2.ravel().tolist(),
        "encoder": {"kind": getattr(encoder, "kind", type(encoder).__name__),
                    "version": getattr(encoder, "version", "")},
        "config": asdict(cfg),
        "seed": cfg.seed,
    }
    Path(path).write_text(json.dumps(obj, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path):
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    d, h, n = obj["d"], obj["h"], obj["actions"]
    net = QNetwork(np.array(obj["w1"], dtype=np.float64).reshape(h, d),
                   np.array(obj["w2"], dtype=np.float64).reshape(n, h))
    enc = obj.get("encoder", {})
    if enc.get("kind") != "hashed_bow" or enc.get("version") != HASH_VERSION:
        raise ValueError(f"checkpoint encoder {enc} is not supported by this build")
    return net, DqnConfig.from_dict(obj["config"]), HashedBowEncoder(d)
