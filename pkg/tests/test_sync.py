"""Tests for averaging operators, the dynamic protocol, and byte accounting."""

import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_chain, single_edge
from intfam.intmodel import DataSummary
from intfam.learning import accumulate
from intfam.sync import (
    CommLedger,
    CoordinatorState,
    ProtocolViolation,
    SyncConfig,
    account,
    floored_mean,
    local_condition,
    merge_summaries,
    pair_average_bittrick,
    periodic_sync,
    resolve_violation,
    squared_distance,
    summary_message_bytes,
    theta_message_bytes,
)

int_vectors = st.integers(min_value=1, max_value=8).flatmap(
    lambda d: st.lists(
        st.lists(st.integers(min_value=0, max_value=1000), min_size=d, max_size=d),
        min_size=1,
        max_size=8,
    )
)


class TestSyncConfig:
    def test_defaults_valid(self):
        cfg = SyncConfig()
        assert cfg.protocol == "none"
        assert cfg.seed == 0

    def test_unknown_protocol_rejected(self):
        with pytest.raises(ValueError):
            SyncConfig(protocol="gossip")

    def test_unknown_schedule_rejected(self):
        with pytest.raises(ValueError):
            SyncConfig(schedule="adaptive")

    def test_nonpositive_period_rejected(self):
        with pytest.raises(ValueError):
            SyncConfig(period=0)

    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError):
            SyncConfig(schedule="dynamic", delta=-1)

    def test_centralized_dynamic_rejected(self):
        with pytest.raises(ValueError):
            SyncConfig(protocol="centralized", schedule="dynamic")


class TestFlooredMean:
    def test_idempotent_on_identical_vectors(self):
        assert floored_mean([(3, 1), (3, 1), (3, 1)]) == (3, 1)

    def test_two_singletons(self):
        assert floored_mean([[2], [3]]) == (2,)

    def test_three_vectors(self):
        assert floored_mean([[1, 7], [2, 0], [4, 5]]) == (2, 4)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            floored_mean([])

    def test_ragged_rejected(self):
        with pytest.raises(ValueError):
            floored_mean([[1, 2], [3]])

    @given(int_vectors)
    @settings(max_examples=300)
    def test_result_within_coordinate_ranges(self, vectors):
        mean = floored_mean(vectors)
        for j, v in enumerate(mean):
            col = [vec[j] for vec in vectors]
            assert min(col) <= v <= max(col)

    @given(int_vectors)
    @settings(max_examples=300)
    def test_rounding_error_below_sqrt_d(self, vectors):
        mean = floored_mean(vectors)
        count = len(vectors)
        d = len(mean)
        err = sum(
            (sum(vec[j] for vec in vectors) / count - mean[j]) ** 2 for j in range(d)
        )
        assert math.sqrt(err) < math.sqrt(d)


class TestPairAverageBitTrick:
    def test_five_and_three(self):
        assert pair_average_bittrick(5, 3) == 4

    def test_equal_inputs(self):
        assert pair_average_bittrick(9, 9) == 9

    def test_matches_arithmetic_oracle(self, rng):
        for _ in range(5000):
            a = rng.randrange(1 << 16)
            b = rng.randrange(1 << 16)
            assert pair_average_bittrick(a, b) == (a + b) // 2

    @given(st.integers(min_value=0, max_value=2**62), st.integers(min_value=0, max_value=2**62))
    @settings(max_examples=300)
    def test_agrees_with_floored_mean(self, a, b):
        assert pair_average_bittrick(a, b) == floored_mean([[a], [b]])[0]


class TestLocalCondition:
    def test_zero_distance_never_violates(self):
        assert not local_condition((1, 2, 3), (1, 2, 3), 0)

    def test_strictly_above_threshold_violates(self):
        assert local_condition((1, 2), (0, 0), 4)

    def test_boundary_is_compliant(self):
        assert not local_condition((1, 2), (0, 0), 5)

    def test_squared_distance(self):
        assert squared_distance((1, 2), (0, 0)) == 5
        assert squared_distance((4,), (0,)) == 16


class TestPeriodicSync:
    def test_identical_vectors_unchanged(self):
        assert periodic_sync([(2, 5), (2, 5)]) == (2, 5)

    def test_two_learners(self):
        assert periodic_sync([[1], [2]]) == (1,)

    def test_close_to_real_mean(self, rng):
        for _ in range(200):
            d = rng.randint(1, 32)
            m = rng.randint(2, 16)
            vecs = [[rng.randrange(256) for _ in range(d)] for _ in range(m)]
            avg = periodic_sync(vecs)
            err = sum((sum(v[j] for v in vecs) / m - avg[j]) ** 2 for j in range(d))
            assert math.sqrt(err) < math.sqrt(d)


class TestMergeSummaries:
    def test_single_summary_is_itself(self):
        s = DataSummary((1, 0, 2, 0), 3)
        assert merge_summaries([s]) == s

    def test_disjoint_merge_equals_union_accumulation(self, rng):
        g = single_edge(2, 3)
        b1 = [(rng.randrange(2), rng.randrange(3)) for _ in range(6)]
        b2 = [(rng.randrange(2), rng.randrange(3)) for _ in range(9)]
        s1 = accumulate(DataSummary.zeros(6), b1, g)
        s2 = accumulate(DataSummary.zeros(6), b2, g)
        union = accumulate(DataSummary.zeros(6), b1 + b2, g)
        assert merge_summaries([s1, s2]) == union

    def test_weighted_average_identity(self):
        from fractions import Fraction

        s1 = DataSummary((2, 1, 0, 0), 3)
        s2 = DataSummary((0, 0, 5, 2), 7)
        merged = merge_summaries([s1, s2])
        n = merged.n
        for j in range(4):
            weighted = (
                Fraction(3, n) * Fraction(s1.counts[j], 3)
                + Fraction(7, n) * Fraction(s2.counts[j], 7)
            )
            assert Fraction(merged.counts[j], n) == weighted

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            merge_summaries([DataSummary((1,), 1), DataSummary((1, 0), 1)])


class StubRng:
    """random.Random stand-in whose sample() returns scripted picks."""

    def __init__(self, picks):
        self.picks = list(picks)

    def sample(self, pool, k):
        out = self.picks.pop(0)
        assert len(out) == k
        assert all(x in pool for x in out)
        return list(out)


class TestResolveViolation:
    def test_counter_reaching_m_forces_full_sync(self):
        coord = CoordinatorState(m=2, delta=0, reference=(0, 0))
        theta = {0: (3, 1), 1: (3, 1)}
        out = resolve_violation(coord, [0, 1], theta.__getitem__, random.Random(0))
        assert out.full
        assert out.members == (0, 1)
        assert out.theta_hat == (3, 1)
        assert coord.reference == (3, 1)
        assert coord.violations == 0

    def test_violator_already_at_reference_stays_partial(self):
        coord = CoordinatorState(m=4, delta=2, reference=(1, 1))
        fetched = []

        def fetch(i):
            fetched.append(i)
            return (1, 1)

        out = resolve_violation(coord, [2], fetch, random.Random(0))
        assert not out.full
        assert out.members == (2,)
        assert out.theta_hat == (1, 1)
        assert fetched == [2]
        assert coord.violations == 1
        assert coord.reference == (1, 1)

    def test_doubling_hand_trace(self):
        """One outlier forces the group to grow 1 -> 2 -> 4 and end in a
        full sync that moves the reference to the floored mean."""
        coord = CoordinatorState(m=4, delta=0, reference=(0,))
        theta = {0: (4,), 1: (0,), 2: (0,), 3: (0,)}
        rng = StubRng([[1], [2, 3]])
        out = resolve_violation(coord, [0], theta.__getitem__, rng)
        assert out.members == (0, 1, 2, 3)
        assert out.theta_hat == (1,)
        assert out.full
        assert coord.reference == (1,)
        assert coord.violations == 0

    def test_partial_outcome_lies_inside_the_ball(self, rng):
        for _ in range(50):
            m = rng.randint(3, 8)
            d = rng.randint(1, 4)
            coord = CoordinatorState(m=m, delta=rng.randint(4, 40), reference=(0,) * d)
            thetas = {i: tuple(rng.randrange(4) for _ in range(d)) for i in range(m)}
            violators = [i for i in range(m) if local_condition(thetas[i], coord.reference, coord.delta)]
            if not violators or coord.violations + len(violators) >= m:
                continue
            out = resolve_violation(coord, violators, thetas.__getitem__, rng)
            if not out.full:
                assert not local_condition(out.theta_hat, coord.reference, coord.delta)

    def test_each_member_fetched_exactly_once(self):
        coord = CoordinatorState(m=4, delta=0, reference=(0,))
        calls = []

        def fetch(i):
            calls.append(i)
            return (4,)

        resolve_violation(coord, [0, 1], fetch, random.Random(1))
        assert sorted(calls) == sorted(set(calls))

    def test_fetch_failure_propagates(self):
        coord = CoordinatorState(m=3, delta=0, reference=(0,))

        def fetch(i):
            raise ConnectionError("learner unreachable")

        with pytest.raises(ConnectionError):
            resolve_violation(coord, [0], fetch, random.Random(0))

    def test_empty_violators_rejected(self):
        coord = CoordinatorState(m=3, delta=0, reference=(0,))
        with pytest.raises(ValueError):
            resolve_violation(coord, [], lambda i: (0,), random.Random(0))

    def test_out_of_range_violator_rejected(self):
        coord = CoordinatorState(m=3, delta=0, reference=(0,))
        with pytest.raises(ValueError):
            resolve_violation(coord, [3], lambda i: (0,), random.Random(0))


class TestMessageSizes:
    def test_theta_message_bit_packing(self):
        assert theta_message_bytes(1600, 3) == 608
        assert theta_message_bytes(36, 3) == 22
        assert theta_message_bytes(1, 1) == 9

    def test_summary_message_fixed_width(self):
        assert summary_message_bytes(1600) == 6416
        assert summary_message_bytes(1) == 20


class TestAccount:
    def test_private_theta_upload(self):
        ledger = CommLedger("private")
        account(ledger, "theta", dim=1600, bits=3)
        assert ledger.bytes_up == 608
        assert ledger.bytes_down == 0
        assert ledger.messages["theta"] == 1

    def test_centralized_summary_upload(self):
        ledger = CommLedger("centralized")
        account(ledger, "summary", dim=1600, bits=3)
        assert ledger.bytes_up == 6416
        assert ledger.messages["summary"] == 1

    def test_private_summary_upload_is_a_privacy_violation(self):
        ledger = CommLedger("private")
        with pytest.raises(ProtocolViolation, match="privacy violation"):
            account(ledger, "summary", dim=16, bits=3)

    def test_centralized_theta_upload_rejected(self):
        ledger = CommLedger("centralized")
        with pytest.raises(ProtocolViolation):
            account(ledger, "theta", dim=16, bits=3)

    def test_broadcast_scales_with_recipients(self):
        ledger = CommLedger("private")
        account(ledger, "broadcast", dim=36, bits=3, recipients=16)
        assert ledger.bytes_down == 22 * 16
        assert ledger.messages["broadcast"] == 16

    def test_naive_broadcast_ships_theta_and_summary(self):
        ledger = CommLedger("naive")
        account(ledger, "broadcast", dim=36, bits=3, recipients=4)
        assert ledger.bytes_down == (22 + summary_message_bytes(36)) * 4

    def test_no_communication_protocol_rejects_everything(self):
        for payload in ("theta", "summary", "broadcast"):
            ledger = CommLedger("none")
            with pytest.raises(ProtocolViolation):
                account(ledger, payload, dim=4, bits=3)

    def test_uploads_have_one_recipient(self):
        ledger = CommLedger("private")
        with pytest.raises(ValueError):
            account(ledger, "theta", dim=4, bits=3, recipients=2)

    def test_totals_are_monotone(self, rng):
        ledger = CommLedger("naive")
        last = 0
        for _ in range(50):
            payload = rng.choice(["theta", "summary", "broadcast"])
            recipients = rng.randint(1, 4) if payload == "broadcast" else 1
            account(ledger, payload, dim=8, bits=3, recipients=recipients)
            assert ledger.total_bytes >= last
            last = ledger.total_bytes
