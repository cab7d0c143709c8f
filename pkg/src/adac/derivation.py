"""Finite pessimistic MDP derived from a batch of experience.

State set: the deduplicated next-states of the batch (core states), which
makes the MDP closed under its own transitions. For every (core state,
action) pair the k nearest same-action source pairs supply an empirical
transition distribution over core states and a shaped reward:

    averagers     mean(r_i)
    fixed cost C  mean(r_i - C * d'_i)
    adaptive      mean(r_i - r_max * d'_i),  r_max = max reward in the set

with d'_i the diameter-normalized distance to neighbor i. The averaging
divisor is the realized neighbor count, which may be below k when the
distance threshold truncates the set. Pairs with no neighbors at all get
the pessimistic fallback: reward 0 (the lower reward bound) and an
absorbing self-loop.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .dataset import Batch, State, core_states
from .neighbors import MetricConfig, NeighborIndex, NeighborSet, build_index


@dataclass(frozen=True)
class PenaltyMode:
    kind: str           # "averagers" | "fixed" | "adaptive"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("averagers", "fixed", "adaptive"):
            raise ValueError(f"unknown penalty mode {self.kind!r}")
        if self.c < 0:
            raise ValueError("cost parameter must be >= 0")

    @staticmethod
    def averagers() -> "PenaltyMode":
        return PenaltyMode("averagers")

    @staticmethod
    def fixed(c: float) -> "PenaltyMode":
        return PenaltyMode("fixed", float(c))

    @staticmethod
    def adaptive() -> "PenaltyMode":
        return PenaltyMode("adaptive")

    @staticmethod
    def parse(text: str) -> "PenaltyMode":
        """Parse CLI syntax: none | fixed:C | adaptive."""
        if text == "none":
            return PenaltyMode.averagers()
        if text == "adaptive":
            return PenaltyMode.adaptive()
        if text.startswith("fixed:"):
            return PenaltyMode.fixed(float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse penalty mode {text!r}")

    def label(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.c:g}"
        return "none" if self.kind == "averagers" else "adaptive"


@dataclass
class DerivedMdp:
    core: tuple[State, ...]
    action_count: int
    reward: np.ndarray                       # (|core|, |actions|)
    transition: list[list[dict[int, float]]]  # [state][action] -> {core idx: p}
    gamma: float
    mode: PenaltyMode
    k: int
    alpha: float
    diameter: float
    norm: str
    empty_pairs: list[tuple[int, int]]

    def core_index(self) -> dict[State, int]:
        return {s: i for i, s in enumerate(self.core)}

    def num_states(self) -> int:
        return len(self.core)


def shaped_reward(neighbors: NeighborSet, rewards, mode: PenaltyMode) -> float:
    """Penalized mean reward of a non-empty neighbor set."""
    if not neighbors:
        raise ValueError("empty neighbor set")
    if len(rewards) != len(neighbors):
        raise ValueError("rewards not aligned with neighbors")
    if mode.kind == "averagers":
        coef = 0.0
    elif mode.kind == "fixed":
        coef = mode.c
    else:
        coef = max(rewards)
    total = 0.0
    for entry, r in zip(neighbors, rewards):
        total += r - coef * entry.norm_distance
    return total / len(neighbors)


def empirical_transition(neighbors: NeighborSet, next_states,
                         core_lookup: dict[State, int]) -> dict[int, float]:
    """Frequency of each neighbor's landing core state, as probabilities."""
    if not neighbors:
        raise ValueError("empty neighbor set")
    counts: dict[int, int] = {}
    for sp in next_states:
        idx = core_lookup[sp]
        counts[idx] = counts.get(idx, 0) + 1
    n = len(neighbors)
    return {idx: cnt / n for idx, cnt in counts.items()}


def build_mdp(batch: Batch, k: int = 5, alpha: float = 0.8,
              gamma: float = 0.99, mode: PenaltyMode | None = None,
              metric: MetricConfig | None = None,
              index: NeighborIndex | None = None) -> DerivedMdp:
    """Derive the finite MDP over the batch's core states."""
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    mode = mode or PenaltyMode.adaptive()
    if index is None:
        index = build_index(batch, metric)
    core = tuple(core_states(batch))
    lookup = {s: i for i, s in enumerate(core)}
    n = len(core)
    reward = np.zeros((n, batch.action_count))
    transition: list[list[dict[int, float]]] = [
        [{} for _ in range(batch.action_count)] for _ in range(n)
    ]
    empty_pairs: list[tuple[int, int]] = []
    for si, s in enumerate(core):
        for a in range(batch.action_count):
            nn = index.query(s, a, k, alpha)
            if not nn:
                empty_pairs.append((si, a))
                reward[si, a] = 0.0
                transition[si][a] = {si: 1.0}
                continue
            rewards = [batch.transitions[e.index].r for e in nn]
            nexts = [batch.transitions[e.index].s_next for e in nn]
            reward[si, a] = shaped_reward(nn, rewards, mode)
            transition[si][a] = empirical_transition(nn, nexts, lookup)
    return DerivedMdp(core, batch.action_count, reward, transition, gamma,
                      mode, k, alpha, index.diameter, index.norm, empty_pairs)


def mdp_to_json(mdp: DerivedMdp) -> str:
    doc = {
        "core": [list(s) for s in mdp.core],
        "action_count": mdp.action_count,
        "reward": mdp.reward.tolist(),
        "transition": [
            [sorted(row.items()) for row in per_state]
            for per_state in mdp.transition
        ],
        "gamma": mdp.gamma,
        "penalty": {"kind": mdp.mode.kind, "c": mdp.mode.c},
        "k": mdp.k,
        "alpha": mdp.alpha if math.isfinite(mdp.alpha) else "inf",
        "diameter": mdp.diameter,
        "norm": mdp.norm,
        "empty_pairs": [list(p) for p in mdp.empty_pairs],
    }
    return json.dumps(doc)


def mdp_from_json(text: str) -> DerivedMdp:
    doc = json.loads(text)
    alpha = doc["alpha"]
    return DerivedMdp(
        core=tuple(tuple(float(c) for c in s) for s in doc["core"]),
        action_count=doc["action_count"],
        reward=np.asarray(doc["reward"], dtype=float),
        transition=[
            [{int(i): float(p) for i, p in row} for row in per_state]
            for per_state in doc["transition"]
        ],
        gamma=doc["gamma"],
        mode=PenaltyMode(doc["penalty"]["kind"], doc["penalty"]["c"]),
        k=doc["k"],
        alpha=math.inf if alpha == "inf" else float(alpha),
        diameter=doc["diameter"],
        norm=doc["norm"],
        empty_pairs=[(int(i), int(a)) for i, a in doc["empty_pairs"]],
    )
