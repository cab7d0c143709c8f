"""Sample-complexity bound machinery for the derived MDP.

The value suboptimality gap of the greedy policy decomposes into a
sampling term (finite neighbor count, Hoeffding-style) and an estimation
term (neighbors at non-zero distance):

    gap = (2 * eps_s + d_bar_max * R_max) / (1 - gamma)

holding with probability 1 - delta when the derivation's k lies in
[ (q_max/eps_s)^2 * ln(2N/delta),  2N/delta ] for covering number N.
The covering number is estimated by a greedy net in file order; the exact
minimal-cover quantity is intractable and the greedy net is the standard
certificate-producing surrogate.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dataset import Batch
from .derivation import DerivedMdp, PenaltyMode
from .neighbors import MetricConfig, NeighborIndex, build_index, diameter
from .planner import Solution


@dataclass(frozen=True)
class PacReport:
    covering_number: int
    epsilon_s: float
    k_min: int
    k_max: int
    k_window_empty: bool
    d_bar_max: float
    gap: float
    delta: float
    q_max: float
    q_max_ceiling: float
    r_max_bound: float
    gamma: float


class KWindow(NamedTuple):
    k_min: int
    k_max: int
    empty: bool


def covering_number(batch: Batch, alpha: float,
                    metric: MetricConfig | None = None) -> int:
    """Greedy alpha-net size over the batch's (source state, action) pairs.

    Scan in file order; a pair becomes a center unless an existing center
    with the same action lies within normalized distance alpha. Pairs with
    different actions are infinitely distant.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    metric = metric or MetricConfig()
    diam = metric.diameter
    if diam is None:
        diam = diameter(batch, mode=metric.diameter_mode, probes=metric.probes,
                        norm=metric.norm, seed=metric.seed)
    centers: dict[int, list[np.ndarray]] = {}
    count = 0
    for tr in batch.transitions:
        s = np.asarray(tr.s, dtype=float)
        covered = False
        for c in centers.get(tr.a, ()):
            d = (np.sqrt(np.sum((c - s) ** 2)) if metric.norm == "euclidean"
                 else np.sum(np.abs(c - s)))
            if d / diam <= alpha:
                covered = True
                break
        if not covered:
            centers.setdefault(tr.a, []).append(s)
            count += 1
    return count


def sampling_error(q_max: float, k: int, n_cov: int, delta: float) -> float:
    """Deviation bound from averaging k neighbors instead of the expectation."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return q_max * math.sqrt(math.log(2.0 * n_cov / delta) / k)


def k_window(q_max: float, epsilon_s: float, n_cov: int,
             delta: float) -> KWindow:
    """Range of neighbor counts for which the guarantee holds at epsilon_s."""
    if q_max <= 0 or epsilon_s <= 0 or n_cov < 1 or not 0 < delta < 1:
        raise ValueError("inputs must be positive with delta in (0, 1)")
    k_min = math.ceil((q_max / epsilon_s) ** 2 * math.log(2.0 * n_cov / delta))
    k_max = math.floor(2.0 * n_cov / delta)
    return KWindow(k_min, k_max, k_min > k_max)


def value_gap(epsilon_s: float, d_bar: float, r_max: float,
              gamma: float) -> float:
    """Suboptimality bound: (2 eps_s + d_bar * R_max) / (1 - gamma)."""
    if not 0 <= gamma < 1:
        raise ValueError("gamma must lie in [0, 1)")
    return (2.0 * epsilon_s + d_bar * r_max) / (1.0 - gamma)


def d_bar_max(mdp: DerivedMdp, index: NeighborIndex) -> float:
    """Worst-case mean normalized neighbor distance over derivation queries."""
    worst = 0.0
    for s in mdp.core:
        for a in range(mdp.action_count):
            nn = index.query(s, a, mdp.k, mdp.alpha)
            if nn:
                worst = max(worst, sum(e.norm_distance for e in nn) / len(nn))
    return worst


def pac_bound(batch: Batch, mdp: DerivedMdp, solution: Solution,
              delta: float, alpha: float | None = None,
              index: NeighborIndex | None = None) -> PacReport:
    """Compose the full suboptimality report for a solved derivation."""
    if alpha is None:
        alpha = mdp.alpha
    if not math.isfinite(alpha):
        alpha = 1.0
    if index is None:
        metric = MetricConfig(norm=mdp.norm, diameter=mdp.diameter)
        index = build_index(batch, metric)
    n_cov = covering_number(
        batch, alpha, MetricConfig(norm=mdp.norm, diameter=mdp.diameter))
    q_max = float(np.max(solution.q))
    # heavily penalized MDPs can have all-negative Q; the bound still needs
    # a non-negative scale for the sampling term
    q_scale = max(q_max, 0.0)
    eps = sampling_error(q_scale, mdp.k, n_cov, delta)
    window = (k_window(q_scale, eps, n_cov, delta)
              if q_scale > 0 else KWindow(1, 0, True))
    dbar = d_bar_max(mdp, index)
    r_max = batch.reward_bound
    gap = value_gap(eps, dbar, r_max, mdp.gamma)
    ceiling = r_max / (1.0 - mdp.gamma)
    return PacReport(
        covering_number=n_cov, epsilon_s=eps,
        k_min=window.k_min, k_max=window.k_max, k_window_empty=window.empty,
        d_bar_max=dbar, gap=gap, delta=delta,
        q_max=q_max, q_max_ceiling=ceiling,
        r_max_bound=r_max, gamma=mdp.gamma,
    )


def canonical_shaping(k: int, r_max: float, d_near: float, d_far: float,
                      mode: PenaltyMode) -> float:
    """Shaped reward of the synthetic neighborhood with k - 1 neighbors at
    normalized distance d_near carrying reward 1 and one floating neighbor
    at d_far carrying reward r_max.

    The floating neighbor sweeps from the homogeneous configuration
    (r_max = 1) to a strongly under-explored one (large r_max); under the
    adaptive mode its reward also sets the penalty scale.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    if mode.kind == "averagers":
        coef = 0.0
    elif mode.kind == "fixed":
        coef = mode.c
    else:
        coef = max(1.0, r_max)
    total = (k - 1) * (1.0 - coef * d_near) + (r_max - coef * d_far)
    return total / k
