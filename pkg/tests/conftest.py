import math

import numpy as np
import pytest

from adac.dataset import Transition, make_batch
from adac.evaluation import worked_example_batch


@pytest.fixture
def table1():
    """The six-transition worked-example batch (actions 0=NS, 1=EW)."""
    return worked_example_batch()


def euclid(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def manhattan(a, b):
    return sum(abs(x - y) for x, y in zip(a, b))


def brute_force_knn(batch, s, a, k, alpha=math.inf, diam=None, dist=euclid):
    """Reference kNN: full scan, sort by (distance, transition index)."""
    if diam is None:
        diam = brute_force_diameter(batch, dist)
    cand = [(dist(s, tr.s), i) for i, tr in enumerate(batch.transitions)
            if tr.a == a]
    cand.sort()
    out = []
    for d, i in cand:
        if d / diam > alpha:
            continue
        out.append((i, d, d / diam))
        if len(out) == k:
            break
    return out


def brute_force_diameter(batch, dist=euclid):
    core = []
    for tr in batch.transitions:
        if tr.s_next not in core:
            core.append(tr.s_next)
    best = 0.0
    for i in range(len(core)):
        for j in range(i + 1, len(core)):
            best = max(best, dist(core[i], core[j]))
    return best if best > 0 else 1.0


def random_batch(rng, n=30, dim=2, actions=2, coord_max=6, reward_max=5.0,
                 integer_coords=True):
    """Random single-trajectory batch; integer coords make distance ties common."""
    transitions = []
    for t in range(n):
        if integer_coords:
            s = tuple(float(c) for c in rng.integers(0, coord_max + 1, size=dim))
            sp = tuple(float(c) for c in rng.integers(0, coord_max + 1, size=dim))
        else:
            s = tuple(float(c) for c in rng.uniform(0, coord_max, size=dim))
            sp = tuple(float(c) for c in rng.uniform(0, coord_max, size=dim))
        a = int(rng.integers(0, actions))
        r = float(np.round(rng.uniform(0, reward_max), 2))
        transitions.append(Transition(s, a, r, sp, 0, t))
    return make_batch(transitions, action_count=actions,
                      reward_bound=reward_max)


def scale_batch(batch, c):
    """Multiply every state coordinate by c."""
    transitions = [
        Transition(tuple(x * c for x in tr.s), tr.a, tr.r,
                   tuple(x * c for x in tr.s_next), tr.traj_id, tr.t)
        for tr in batch.transitions
    ]
    return make_batch(transitions, batch.action_count, batch.reward_bound)
