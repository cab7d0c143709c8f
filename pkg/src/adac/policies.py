"""Behavior and learned policies, plus batch collection.

Every policy exposes act(state, t) -> action where t is the within-episode
step index. Stochastic policies carry their own seeded generator and must
not be shared across concurrent rollouts.
"""

import math

import numpy as np

from .dataset import Batch, State
from .derivation import DerivedMdp
from .neighbors import NeighborIndex
from .planner import Solution, greedy_action
from .traffic import (EnvState, IntersectionEnvConfig, rollout,
                      transitions_to_batch)


class CyclicPolicy:
    """Round-robin over all actions, one step each, in index order."""

    def __init__(self, action_count: int):
        self.action_count = action_count
        self.name = "cyclic"

    def act(self, state: State, t: int) -> int:
        return t % self.action_count


class FixedCyclePolicy:
    """Repeat an explicit action sequence."""

    def __init__(self, sequence):
        self.sequence = list(sequence)
        if not self.sequence:
            raise ValueError("empty cycle")
        self.name = "fixed-cycle[" + ",".join(str(a) for a in self.sequence) + "]"

    def act(self, state: State, t: int) -> int:
        return self.sequence[t % len(self.sequence)]


class RandomPolicy:
    def __init__(self, action_count: int, seed: int = 0):
        self.action_count = action_count
        self.rng = np.random.default_rng(seed)
        self.name = "random"

    def act(self, state: State, t: int) -> int:
        return int(self.rng.integers(0, self.action_count))


class ProportionalPolicy:
    """Serve each action for a rate-proportional share of a fixed cycle.

    Shares are apportioned by largest remainder, ties to the lower action
    index; the cycle emits each action's share as one contiguous block.
    """

    def __init__(self, rates, period: int):
        if period < 1:
            raise ValueError("period must be >= 1")
        total = float(sum(rates))
        if total <= 0:
            raise ValueError("at least one positive rate required")
        quotas = [r * period / total for r in rates]
        shares = [int(math.floor(q)) for q in quotas]
        remainders = sorted(range(len(rates)),
                            key=lambda i: (-(quotas[i] - shares[i]), i))
        for i in remainders[:period - sum(shares)]:
            shares[i] += 1
        self.schedule = [a for a, n in enumerate(shares) for _ in range(n)]
        self.name = "proportional"

    def act(self, state: State, t: int) -> int:
        return self.schedule[t % len(self.schedule)]


class GreedyDerivedPolicy:
    """Greedy one-step-lookup policy over a solved derived MDP."""

    def __init__(self, mdp: DerivedMdp, solution: Solution,
                 index: NeighborIndex, k: int | None = None,
                 alpha: float | None = None):
        self.mdp = mdp
        self.solution = solution
        self.index = index
        self.k = mdp.k if k is None else k
        self.alpha = mdp.alpha if alpha is None else alpha
        self.name = "greedy-derived"

    def act(self, state: State, t: int) -> int:
        return greedy_action(self.mdp, self.solution, self.index,
                             state, self.k, self.alpha)


class EpsilonNoisyPolicy:
    """Base policy with probability 1 - epsilon, uniform random otherwise."""

    def __init__(self, base, epsilon: float, action_count: int, seed: int = 0):
        if not 0 <= epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        self.base = base
        self.epsilon = epsilon
        self.action_count = action_count
        self.rng = np.random.default_rng(seed)
        self.name = f"noisy({base.name}, eps={epsilon:g})"

    def act(self, state: State, t: int) -> int:
        if self.epsilon > 0 and self.rng.random() < self.epsilon:
            return int(self.rng.integers(0, self.action_count))
        return self.base.act(state, t)


def collect(config: IntersectionEnvConfig, policy, episodes: int,
            horizon: int, start: EnvState,
            rng: np.random.Generator | None = None) -> Batch:
    """Concatenate episode rollouts into one batch.

    The reward bound is the environment ceiling (capacity times the widest
    phase), not the observed maximum.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    transitions = []
    for ep in range(episodes):
        result = rollout(config, start, policy, horizon, rng=rng, traj_id=ep)
        transitions.extend(result.transitions)
    return transitions_to_batch(transitions, config)
