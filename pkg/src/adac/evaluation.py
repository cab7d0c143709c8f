"""Experiment harness: policy evaluation, hyperparameter sweeps, and the
bundled worked example.

The worked example is a six-transition two-flow dataset small enough to
check every derived quantity by hand; reproduce_table2 recomputes its
shaped-reward table under all penalty modes and compares against the
reference values, cell by cell. One reference cell, adaptive mode at state
(2, 3) action NS, is a known arithmetic slip in the reference (printed
1.58, recomputes to 1.65 under diameter normalization) and is reported
with its computed value and a mismatch flag. The fixed-cost C=2 reference
column was produced with a different normalizer and is reported as
computed values only.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Batch, Transition, make_batch
from .derivation import DerivedMdp, PenaltyMode, build_mdp, mdp_to_json
from .neighbors import MetricConfig, build_index
from .planner import value_iteration
from .policies import (CyclicPolicy, FixedCyclePolicy, GreedyDerivedPolicy,
                       collect)
from .traffic import EnvState, IntersectionEnvConfig, rollout, two_flow_config


@dataclass
class EvalReport:
    policy: str
    episodes: int
    mean_return: float
    min_return: float
    max_return: float
    mean_discounted: float
    episode_returns: list[float] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)


def evaluate(config: IntersectionEnvConfig, policy, episodes: int,
             horizon: int, gamma: float = 0.99, seeds=None,
             start: EnvState | None = None) -> EvalReport:
    """Independent episode rollouts, aggregated.

    Stochastic configs require one seed per episode; deterministic configs
    ignore seeds. With a rate schedule, episode i starts its environment
    clock at i * horizon so consecutive episodes sweep the schedule.
    """
    stochastic = config.arrivals == "poisson"
    if stochastic:
        if seeds is None or len(seeds) != episodes:
            raise ValueError("stochastic configs need one seed per episode")
    queues = start.queues if start is not None else (0,) * len(config.flows)
    returns, discounted = [], []
    for ep in range(episodes):
        rng = np.random.default_rng(seeds[ep]) if stochastic else None
        t0 = ep * horizon if config.schedule is not None else 0
        result = rollout(config, EnvState(queues, t0), policy, horizon,
                         gamma=gamma, rng=rng, traj_id=ep)
        returns.append(result.cumulative_reward)
        discounted.append(result.discounted_return)
    return EvalReport(
        policy=policy.name, episodes=episodes,
        mean_return=sum(returns) / episodes,
        min_return=min(returns), max_return=max(returns),
        mean_discounted=sum(discounted) / episodes,
        episode_returns=returns,
        seeds=list(seeds) if stochastic else [],
    )


def _derive_solve_policy(batch: Batch, k, alpha, gamma, mode, metric=None,
                         index=None, tol: float = 1e-8):
    index = index or build_index(batch, metric)
    mdp = build_mdp(batch, k, alpha, gamma, mode, index=index)
    solution = value_iteration(mdp, tol=tol)
    return mdp, solution, GreedyDerivedPolicy(mdp, solution, index)


def sweep_c(batch: Batch, c_values, k: int, alpha: float, gamma: float,
            config: IntersectionEnvConfig, episodes: int, horizon: int,
            seeds=None, start: EnvState | None = None,
            metric: MetricConfig | None = None,
            snapshot_dir=None) -> list[dict]:
    """Evaluate a fixed-cost grid plus the adaptive derivation.

    Returns one row per C value and a final row labeled "A-DAC"; when
    snapshot_dir is set, each derived MDP is written there as JSON so the
    rows can be reproduced from the snapshots alone.
    """
    if not c_values:
        raise ValueError("empty C grid")
    index = build_index(batch, metric)
    rows = []
    modes = [(f"{c:g}", PenaltyMode.fixed(c)) for c in c_values]
    modes.append(("A-DAC", PenaltyMode.adaptive()))
    for label, mode in modes:
        mdp, solution, policy = _derive_solve_policy(
            batch, k, alpha, gamma, mode, index=index)
        report = evaluate(config, policy, episodes, horizon, gamma,
                          seeds=seeds, start=start)
        if snapshot_dir is not None:
            path = f"{snapshot_dir}/mdp_c_{label.replace(':', '_')}.json"
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(mdp_to_json(mdp))
        rows.append({"c": label, "mean_return": report.mean_return})
    return rows


def sweep_k(batch: Batch, k_values, alpha: float, gamma: float,
            config: IntersectionEnvConfig, episodes: int, horizon: int,
            seeds=None, start: EnvState | None = None,
            metric: MetricConfig | None = None) -> list[dict]:
    """Evaluate the adaptive derivation across neighbor counts."""
    if not k_values:
        raise ValueError("empty k grid")
    index = build_index(batch, metric)
    rows = []
    for k in k_values:
        _, _, policy = _derive_solve_policy(
            batch, k, alpha, gamma, PenaltyMode.adaptive(), index=index)
        report = evaluate(config, policy, episodes, horizon, gamma,
                          seeds=seeds, start=start)
        rows.append({"k": k, "mean_return": report.mean_return})
    return rows


# ---------------------------------------------------------------------------
# Bundled worked example: the six-transition two-flow dataset, its derived
# reward table under four penalty modes, and the reference values.
# ---------------------------------------------------------------------------

NS, EW = 0, 1
ACTION_NAMES = ("NS", "EW")

_WORKED_EXAMPLE_ROWS = [
    # (s, action, s', r); three trajectories of two steps each
    ((1.0, 5.0), EW, (3.0, 3.0), 2.0),
    ((3.0, 3.0), NS, (1.0, 5.0), 2.0),
    ((6.0, 1.0), NS, (2.0, 3.0), 4.0),
    ((2.0, 3.0), EW, (6.0, 1.0), 2.0),
    ((0.0, 5.0), EW, (2.0, 3.0), 2.0),
    ((2.0, 3.0), NS, (0.0, 5.0), 2.0),
]

# reference shaped rewards, keyed by (state, action name); the adaptive
# reference for ((2, 3), NS) does not recompute (see module docstring)
_REFERENCE_STATES = [(2.0, 3.0), (6.0, 1.0), (3.0, 3.0), (1.0, 5.0), (0.0, 5.0)]
_REFERENCE = {
    "none": {s: (2.67, 2.00) for s in _REFERENCE_STATES},
    "fixed:1": {
        (2.0, 3.0): (2.41, 1.77),
        (6.0, 1.0): (2.29, 1.16),
        (3.0, 3.0): (2.45, 1.66),
        (1.0, 5.0): (2.14, 1.85),
        (0.0, 5.0): (2.03, 1.82),
    },
    "adaptive": {
        (2.0, 3.0): (1.58, 1.53),
        (6.0, 1.0): (1.17, 0.32),
        (3.0, 3.0): (1.82, 1.31),
        (1.0, 5.0): (0.55, 1.70),
        (0.0, 5.0): (0.14, 1.65),
    },
}
KNOWN_REFERENCE_SLIPS = (((2.0, 3.0), "NS", "adaptive"),)


def worked_example_batch() -> Batch:
    transitions = [
        Transition(s, a, r, sp, traj_id=i // 2, t=i % 2)
        for i, (s, a, sp, r) in enumerate(_WORKED_EXAMPLE_ROWS)
    ]
    return make_batch(transitions, action_count=2, reward_bound=4.0)


def worked_example_mdp(mode: PenaltyMode | None = None,
                       gamma: float = 0.99) -> DerivedMdp:
    return build_mdp(worked_example_batch(), k=3, alpha=math.inf,
                     gamma=gamma, mode=mode or PenaltyMode.adaptive())


@dataclass
class Table2Cell:
    state: tuple[float, float]
    action: str
    mode: str
    computed: float
    printed: float | None
    match: bool | None


def reproduce_table2(tolerance: float = 0.01) -> list[Table2Cell]:
    """Recompute the worked example's shaped-reward table under all modes.

    Cells with a reference value carry a match flag at the given absolute
    tolerance; the fixed-cost C=2 column is computed-only.
    """
    batch = worked_example_batch()
    index = build_index(batch)
    modes = [PenaltyMode.averagers(), PenaltyMode.fixed(1.0),
             PenaltyMode.fixed(2.0), PenaltyMode.adaptive()]
    cells = []
    for mode in modes:
        mdp = build_mdp(batch, k=3, alpha=math.inf, gamma=0.99, mode=mode,
                        index=index)
        core_pos = {s: i for i, s in enumerate(mdp.core)}
        reference = _REFERENCE.get(mode.label())
        for s in _REFERENCE_STATES:
            for a, aname in enumerate(ACTION_NAMES):
                computed = float(mdp.reward[core_pos[s], a])
                printed = match = None
                if reference is not None:
                    printed = reference[s][a]
                    match = abs(computed - printed) <= tolerance
                cells.append(Table2Cell(s, aname, mode.label(),
                                        computed, printed, match))
    return cells


# ---------------------------------------------------------------------------
# Two-flow experiment: cyclic behavior data, adaptive derivation, rollout
# comparison against the behavior policy and the throughput-optimal cycle.
# ---------------------------------------------------------------------------


def reconstruction_batch(collect_horizon: int = 10) -> Batch:
    """Two cyclic trajectories from queue state (1, 3), one leading with NS
    and one with EW.

    Longer trajectories let the unserved EW queue grow without bound, which
    inflates the core-cloud diameter, weakens the normalized penalties, and
    delays the learned policy's switch to NS; 10 steps per trajectory keeps
    the data inside the useful operating region.
    """
    config = two_flow_config()
    start = EnvState((1, 3))
    lead_ns = collect(config, CyclicPolicy(2), 1, collect_horizon, start)
    lead_ew = collect(config, FixedCyclePolicy([EW, NS]), 1,
                      collect_horizon, start)
    transitions = list(lead_ns.transitions)
    transitions += [Transition(tr.s, tr.a, tr.r, tr.s_next, 1, tr.t)
                    for tr in lead_ew.transitions]
    return make_batch(transitions, action_count=2,
                      reward_bound=lead_ns.reward_bound)


def two_flow_demo(collect_horizon: int = 10, horizon: int = 100,
                  k: int = 3, gamma: float = 0.99) -> dict:
    """Derive, solve, and roll out the two-flow experiment end to end."""
    config = two_flow_config()
    start = EnvState((1, 3))
    batch = reconstruction_batch(collect_horizon)
    _, _, greedy = _derive_solve_policy(batch, k, math.inf, gamma,
                                        PenaltyMode.adaptive(), tol=1e-9)
    out = {}
    for name, policy in [
        ("cyclic", CyclicPolicy(2)),
        ("adac", greedy),
        ("fixed_ew_ew_ns_ew", FixedCyclePolicy([EW, EW, NS, EW])),
    ]:
        result = rollout(config, start, policy, horizon, gamma=gamma)
        out[name] = result.cumulative_reward
    out["improvement"] = out["adac"] / out["cyclic"]
    out["batch_size"] = len(batch)
    return out
