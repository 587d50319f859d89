from collections import Counter

import numpy as np
import pytest

from nsbandit import (
    Instance,
    InstanceId,
    build_block,
    format_block_schedule,
    resolve_active_sets,
    schedule_block,
    split_batches,
)
from nsbandit.config import RandomStream
from nsbandit.errors import EmptyReplay


def scale_census(schedule) -> Counter:
    return Counter(inst.id.scale for inst in schedule.instances)


class TestScheduleBlock:
    def test_scale_zero_single_instance(self):
        sched = schedule_block(0, 4, RandomStream(0, "s"))
        assert len(sched.instances) == 1
        inst = sched.instances[0]
        assert inst.id.scale == 0 and inst.id.offset == 0
        assert inst.span == (1, 4)

    def test_full_span_instance_always_present(self):
        for seed in range(20):
            sched = schedule_block(3, 2, RandomStream(seed, "s"))
            assert any(
                i.id.scale == 3 and i.id.offset == 0 for i in sched.instances
            )

    def test_offsets_align_to_scale_periods(self):
        sched = schedule_block(4, 2, RandomStream(5, "s"))
        for inst in sched.instances:
            period = sched.ratio * 2**inst.id.scale
            assert inst.id.offset % period == 0
            assert inst.span == (inst.id.offset + 1, inst.id.offset + period)

    def test_reference_census_reachable(self):
        # A 16-round block at b=2 can host one instance at each of the
        # scales 3, 2, 1 plus three at scale 0.
        target = Counter({3: 1, 2: 1, 1: 1, 0: 3})
        for seed in range(2000):
            sched = schedule_block(3, 2, RandomStream(seed, "s"))
            if scale_census(sched) == target:
                return
        pytest.fail("reference census never drawn in 2000 schedules")

    def test_expected_instance_count(self):
        # n=1, b=2: the full-span instance is certain and each of the two
        # scale-0 slots initiates with probability 2^(-1/2), so the mean
        # count is 1 + 2 * 2^(-1/2) ~ 2.4142 (1e5 draws, 1% tolerance).
        rng = RandomStream(123, "s").fresh_generator()
        total = 0
        draws = 100000
        for _ in range(draws):
            total += len(schedule_block(1, 2, rng).instances)
        expected = 1 + 2 * 2 ** (-0.5)
        assert abs(total / draws - expected) / expected < 0.01


class TestResolveActiveSets:
    def test_lone_instance_owns_whole_block(self):
        sched = schedule_block(0, 4, RandomStream(0, "s"))
        resolve_active_sets(sched)
        assert sched.instances[0].active_rounds == [1, 2, 3, 4]
        assert np.all(sched.owner == 0)

    def test_finer_scale_masks_coarser(self):
        # Hand-built: full-span instance plus one scale-0 instance at the
        # block start; the coarse active set must exclude rounds 1..b.
        from nsbandit.baque import BlockSchedule

        b, n = 3, 2
        sched = BlockSchedule(block_scale=n, ratio=b, length=b * 2**n)
        sched.instances = [
            Instance(InstanceId(n, n, 0), span_length=b * 2**n, arms=2),
            Instance(InstanceId(n, 0, 0), span_length=b, arms=2),
        ]
        resolve_active_sets(sched)
        coarse, fine = sched.instances
        assert fine.active_rounds == [1, 2, 3]
        assert coarse.active_rounds == list(range(4, 13))

    @pytest.mark.parametrize("n,b", [(0, 2), (1, 2), (2, 3), (3, 2), (4, 2), (5, 4), (6, 2)])
    def test_partition_property(self, n, b):
        # Brute force: every block round is active in exactly one instance.
        for seed in range(30):
            sched = resolve_active_sets(schedule_block(n, b, RandomStream(seed, "s")))
            length = sched.length
            coverage = np.zeros(length, dtype=int)
            for inst in sched.instances:
                for r in inst.active_rounds:
                    coverage[r - 1] += 1
            assert np.all(coverage == 1)
            assert np.all(sched.owner >= 0)

    def test_clipping_drops_tail_rounds(self):
        sched = schedule_block(2, 2, RandomStream(1, "s"), length=5)
        resolve_active_sets(sched)
        assert sched.length == 5
        for inst in sched.instances:
            assert all(r <= 5 for r in inst.active_rounds)
        total = sum(len(i.active_rounds) for i in sched.instances)
        assert total == 5


class TestSplitBatches:
    def fake_instance(self, active_count):
        inst = Instance(InstanceId(6, 6, 0), span_length=128, arms=2)
        inst.active_rounds = list(range(1, active_count + 1))
        return inst

    @pytest.mark.parametrize(
        "size,b,expected", [(50, 5, 10), (3, 5, 1), (16, 2, 8), (0, 4, 0)]
    )
    def test_batch_sizes(self, size, b, expected):
        inst = split_batches(self.fake_instance(size), b)
        assert len(inst.query_rounds) == expected
        assert inst.query_rounds == inst.active_rounds[:expected]

    def test_min_one_query_for_every_nonempty_instance(self):
        for seed in range(40):
            sched = build_block(3, 4, 2, RandomStream(seed, "s"))
            for inst in sched.instances:
                if inst.active_rounds:
                    assert len(inst.query_rounds) >= 1
                    assert inst.query_rounds == inst.active_rounds[: len(inst.query_rounds)]

    def test_block_query_fraction_bounds(self):
        # Mean query fraction per block stays within
        # [1/(2b), 1/b + 1/(b 2^n)] across scheduling draws.
        for n, b in [(0, 4), (2, 2), (3, 8), (5, 4)]:
            rng = RandomStream(77, "s").fresh_generator()
            fractions = []
            for _ in range(300):
                sched = build_block(n, b, 2, rng)
                q = int(sched.is_query.sum())
                fractions.append(q / sched.length)
            mean = float(np.mean(fractions))
            assert 1 / (2 * b) <= mean <= 1 / b + 1 / (b * 2**n), (n, b, mean)


class TestReplay:
    def primed_instance(self, freq):
        inst = Instance(InstanceId(2, 0, 0), span_length=4, arms=len(freq))
        for arm, count in enumerate(freq):
            for _ in range(count):
                inst.record_query(arm)
        return inst

    def test_degenerate_frequency(self):
        inst = self.primed_instance([0, 0, 7])
        rng = np.random.default_rng(0)
        assert all(inst.replay_arm(rng) == 2 for _ in range(50))

    def test_histogram_matches_frequencies(self):
        # Arm selected 20 of 50 query rounds replays with probability 0.4.
        inst = self.primed_instance([20, 30])
        rng = np.random.default_rng(3)
        draws = 100000
        hits = sum(inst.replay_arm(rng) == 0 for _ in range(draws))
        assert abs(hits / draws - 0.4) < 0.01

    def test_three_arm_histogram(self):
        freq = [10, 5, 35]
        inst = self.primed_instance(freq)
        rng = np.random.default_rng(9)
        counts = Counter(inst.replay_arm(rng) for _ in range(100000))
        for arm, f in enumerate(freq):
            assert abs(counts[arm] / 100000 - f / 50) < 0.01

    def test_empty_replay_raises(self):
        inst = Instance(InstanceId(1, 0, 0), span_length=2, arms=3)
        with pytest.raises(EmptyReplay):
            inst.replay_arm(np.random.default_rng(0))

    def test_frequency_updates_reflected(self):
        inst = self.primed_instance([5, 0])
        rng = np.random.default_rng(1)
        assert all(inst.replay_arm(rng) == 0 for _ in range(20))
        for _ in range(5):
            inst.record_query(1)
        hits = sum(inst.replay_arm(rng) == 1 for _ in range(40000))
        assert abs(hits / 40000 - 0.5) < 0.02


class TestFormatting:
    def test_listing_mentions_every_instance(self):
        sched = build_block(2, 2, 2, RandomStream(4, "s"))
        text = format_block_schedule(sched)
        assert f"instances={len(sched.instances)}" in text
        for inst in sched.instances:
            assert f"m={inst.id.scale} tau={inst.id.offset:>6}" in text
