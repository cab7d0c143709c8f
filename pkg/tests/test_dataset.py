import hashlib
import json

import numpy as np
import pytest

from adac.dataset import (BatchError, Transition, batch_stats, concat_batches,
                          core_states, load_batch, make_batch, save_batch)

from conftest import random_batch

TABLE1_JSONL = """\
{"s":[1,5],"a":1,"r":2,"sp":[3,3],"traj":0,"t":0}
{"s":[3,3],"a":0,"r":2,"sp":[1,5],"traj":0,"t":1}
{"s":[6,1],"a":0,"r":4,"sp":[2,3],"traj":1,"t":0}
{"s":[2,3],"a":1,"r":2,"sp":[6,1],"traj":1,"t":1}
{"s":[0,5],"a":1,"r":2,"sp":[2,3],"traj":2,"t":0}
{"s":[2,3],"a":0,"r":2,"sp":[0,5],"traj":2,"t":1}
"""


def write(tmp_path, text, name="batch.jsonl"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadBatch:
    def test_worked_example_file(self, tmp_path, table1):
        batch = load_batch(write(tmp_path, TABLE1_JSONL))
        assert len(batch) == 6
        assert batch.dim == 2
        assert batch.action_count == 2
        assert batch.transitions[0].s == (1.0, 5.0)
        assert batch.transitions[2].r == 4.0
        # identical to the embedded worked example up to the declared bound
        assert batch.transitions == table1.transitions

    def test_empty_file(self, tmp_path):
        with pytest.raises(BatchError, match="empty batch"):
            load_batch(write(tmp_path, ""))

    def test_single_row(self, tmp_path):
        batch = load_batch(write(
            tmp_path, '{"s":[0,0],"a":0,"r":0,"sp":[0,0],"traj":0,"t":0}\n'))
        assert len(batch) == 1
        assert batch.action_count == 1

    def test_malformed_line_reports_number(self, tmp_path):
        text = TABLE1_JSONL + "{not json\n"
        with pytest.raises(BatchError, match="line 7"):
            load_batch(write(tmp_path, text))

    def test_missing_field(self, tmp_path):
        with pytest.raises(BatchError, match="line 1.*missing"):
            load_batch(write(tmp_path, '{"s":[1],"a":0,"r":1,"sp":[2]}\n'))

    def test_dimension_mismatch(self, tmp_path):
        text = ('{"s":[1,5],"a":0,"r":1,"sp":[1,5],"traj":0,"t":0}\n'
                '{"s":[1],"a":0,"r":1,"sp":[1,5],"traj":0,"t":1}\n')
        with pytest.raises(BatchError, match="dimension mismatch"):
            load_batch(write(tmp_path, text))

    def test_negative_coordinate(self, tmp_path):
        with pytest.raises(BatchError, match="negative"):
            load_batch(write(
                tmp_path, '{"s":[-1,0],"a":0,"r":1,"sp":[0,0],"traj":0,"t":0}\n'))

    def test_non_integer_action(self, tmp_path):
        with pytest.raises(BatchError, match="action"):
            load_batch(write(
                tmp_path, '{"s":[1,0],"a":0.5,"r":1,"sp":[0,0],"traj":0,"t":0}\n'))


class TestValidation:
    def test_non_contiguous_trajectory(self):
        rows = [Transition((0.0,), 0, 0.0, (0.0,), 0, 0),
                Transition((0.0,), 0, 0.0, (0.0,), 1, 0),
                Transition((0.0,), 0, 0.0, (0.0,), 0, 1)]
        with pytest.raises(BatchError, match="not contiguous"):
            make_batch(rows)

    def test_non_increasing_step(self):
        rows = [Transition((0.0,), 0, 0.0, (0.0,), 0, 1),
                Transition((0.0,), 0, 0.0, (0.0,), 0, 1)]
        with pytest.raises(BatchError, match="strictly increasing"):
            make_batch(rows)

    def test_action_out_of_declared_range(self):
        rows = [Transition((0.0,), 3, 0.0, (0.0,), 0, 0)]
        with pytest.raises(BatchError, match="out of range"):
            make_batch(rows, action_count=2)

    def test_reward_bound_below_observed(self):
        rows = [Transition((0.0,), 0, 5.0, (0.0,), 0, 0)]
        with pytest.raises(BatchError, match="reward_bound"):
            make_batch(rows, reward_bound=4.0)


class TestCoreStates:
    def test_worked_example_order(self, table1):
        assert core_states(table1) == [
            (3.0, 3.0), (1.0, 5.0), (2.0, 3.0), (6.0, 1.0), (0.0, 5.0)]

    def test_all_identical_next_states(self):
        rows = [Transition((float(t), 0.0), 0, 1.0, (9.0, 9.0), 0, t)
                for t in range(5)]
        assert core_states(make_batch(rows)) == [(9.0, 9.0)]

    def test_matches_brute_force_dedup_on_reconstruction(self):
        from adac.evaluation import reconstruction_batch
        batch = reconstruction_batch()
        expected = []
        for tr in batch.transitions:   # first-appearance scan, list membership
            if tr.s_next not in expected:
                expected.append(tr.s_next)
        assert core_states(batch) == expected
        assert len(set(core_states(batch))) == len(core_states(batch))

    def test_every_core_state_is_some_next_state(self, table1):
        nexts = {tr.s_next for tr in table1.transitions}
        assert set(core_states(table1)) == nexts


class TestBatchStats:
    def test_worked_example(self, table1):
        stats = batch_stats(table1)
        assert stats.count == 6
        assert stats.per_action == {0: 3, 1: 3}
        assert stats.reward_max == 4.0
        assert stats.dim == 2

    def test_single_row_zero_reward(self):
        batch = make_batch([Transition((0.0,), 0, 0.0, (0.0,), 0, 0)])
        assert batch_stats(batch).reward_mean == 0.0

    def test_week_scale_aggregates_match_recount(self):
        # seven daily episodes from the multi-flow intersection
        from adac.policies import CyclicPolicy, collect
        from adac.traffic import EnvState, IntersectionEnvConfig
        config = IntersectionEnvConfig(
            flows=(("a", 0.4), ("b", 0.6), ("c", 0.8)),
            phases=((0,), (1,), (2,)), capacity=4, arrivals="poisson",
            horizon=360)
        batch = collect(config, CyclicPolicy(3), 7, 360, EnvState((0, 0, 0)),
                        rng=np.random.default_rng(3))
        assert len(batch) == 7 * 360
        stats = batch_stats(batch)
        count = 0
        per_action = {0: 0, 1: 0, 2: 0}
        total = 0.0
        lo, hi = float("inf"), float("-inf")
        for tr in batch.transitions:
            count += 1
            per_action[tr.a] += 1
            total += tr.r
            lo, hi = min(lo, tr.r), max(hi, tr.r)
        assert stats.count == count
        assert stats.per_action == per_action
        assert stats.reward_min == lo and stats.reward_max == hi
        assert stats.reward_mean == pytest.approx(total / count, abs=1e-12)

    def test_count_equals_sum_of_action_counts(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            batch = random_batch(rng, n=int(rng.integers(1, 50)), actions=3)
            stats = batch_stats(batch)
            assert stats.count == sum(stats.per_action.values())


class TestRoundTrip:
    def test_worked_example(self, tmp_path, table1):
        path = tmp_path / "t1.jsonl"
        save_batch(table1, path)
        assert load_batch(path) == table1

    def test_fractional_reward_verbatim(self, tmp_path):
        batch = make_batch([Transition((1.0,), 0, 2.5, (0.0,), 0, 0)])
        path = tmp_path / "b.jsonl"
        save_batch(batch, path)
        assert '"r": 2.5' in path.read_text()
        assert load_batch(path).transitions[0].r == 2.5

    def test_declared_bounds_survive(self, tmp_path):
        batch = make_batch([Transition((1.0,), 0, 1.0, (0.0,), 0, 0)],
                           action_count=4, reward_bound=10.0)
        path = tmp_path / "b.jsonl"
        save_batch(batch, path)
        loaded = load_batch(path)
        assert loaded.action_count == 4
        assert loaded.reward_bound == 10.0
        assert loaded == batch

    def test_large_batch_hash_equal(self, tmp_path):
        rng = np.random.default_rng(11)
        batch = random_batch(rng, n=10_000, dim=3, actions=4,
                             integer_coords=False)
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_batch(batch, p1)
        save_batch(load_batch(p1), p2)
        h1 = hashlib.sha256(p1.read_bytes()).hexdigest()
        h2 = hashlib.sha256(p2.read_bytes()).hexdigest()
        assert h1 == h2
        assert load_batch(p2) == batch

    def test_random_batches_identity(self, tmp_path):
        rng = np.random.default_rng(12)
        for i in range(10):
            batch = random_batch(rng, n=int(rng.integers(1, 60)),
                                 integer_coords=bool(i % 2))
            path = tmp_path / f"r{i}.jsonl"
            save_batch(batch, path)
            assert load_batch(path) == batch


class TestConcat:
    def test_renumbers_trajectories(self, table1):
        merged = concat_batches([table1, table1])
        assert len(merged) == 12
        assert sorted({tr.traj_id for tr in merged.transitions}) == list(range(6))

    def test_json_record_shape(self, tmp_path, table1):
        save_batch(table1, tmp_path / "b.jsonl")
        first = json.loads((tmp_path / "b.jsonl").read_text().splitlines()[0])
        assert set(first) == {"s", "a", "r", "sp", "traj", "t"}
