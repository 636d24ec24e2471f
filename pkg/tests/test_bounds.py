import math

import mpmath
import numpy as np
import pytest

from noisyperm import bounds
from noisyperm.bounds import (
    Bec,
    BoundMethod,
    Bsc,
    achievability_general,
    achievability_summands,
    bec_achievability,
    bsc_achievability,
    bsc_summands,
    decoding_metric,
    error_event_prob,
    evaluate_bound,
    lower_threshold,
    neighbor_dominance_threshold,
    neighbor_set,
    rate_of,
    search_max_m,
    union_error_prob,
    upper_threshold,
)
from noisyperm.core_prob import binomial_tail
from noisyperm.errors import InputValidationError, ResourceLimitError, SupportError
from noisyperm.packing import (
    ChannelMatrix,
    build_binary_message_set_by_size,
    build_dmc_message_set,
    r0_for_grid,
)


def bsc_set(m, delta=0.11):
    return build_binary_message_set_by_size(delta, delta, m)


class TestNeighborSet:

    def test_binary_interior_and_ends(self):
        s = bsc_set(5)
        assert neighbor_set(s, 2).indices == [1, 3]
        assert neighbor_set(s, 0).indices == [1]
        assert neighbor_set(s, 4).indices == [3]

    def test_grid_interior_has_six(self):
        w = ChannelMatrix([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
        s = build_dmc_message_set(w, r0_for_grid(6))
        centre = s.index_of((2, 2, 2))
        assert centre is not None
        assert len(neighbor_set(s, centre)) == 6

    def test_neighbors_are_one_step_apart(self, three_by_three):
        s = build_dmc_message_set(three_by_three, r0_for_grid(9))
        for m in range(len(s)):
            for j in neighbor_set(s, m).indices:
                diff = np.subtract(s.lattice[j], s.lattice[m])
                assert sorted(diff.tolist()) == [-1] + [0] * (s.k - 2) + [1]

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            neighbor_set(bsc_set(3), 3)


class TestDecodingMetric:

    def test_values(self):
        p, q = (0.89, 0.11), (0.695, 0.305)
        assert decoding_metric(p, q, 0) == pytest.approx(math.log2(0.89 / 0.695), rel=1e-14)
        assert decoding_metric(p, q, 1) == pytest.approx(math.log2(0.11 / 0.305), rel=1e-14)
        assert decoding_metric(p, q, 0) == pytest.approx(0.3567924, abs=1e-7)
        assert decoding_metric(p, q, 1) == pytest.approx(-1.4713057, abs=1e-7)
        assert decoding_metric(p, p, 1) == 0.0

    def test_support(self):
        with pytest.raises(SupportError):
            decoding_metric((1.0, 0.0), (0.5, 0.5), 1)


class TestErrorEventProb:

    def test_identical_is_certain_error(self):
        assert error_event_prob((0.3, 0.7), (0.3, 0.7), 10) == 1.0

    def test_single_symbol(self):
        assert error_event_prob((0.89, 0.11), (0.11, 0.89), 1) == pytest.approx(0.11, rel=1e-14)

    def test_adjacent_binary_equals_binomial_tail(self):
        p, q = (0.11, 0.89), (0.5, 0.5)
        t_bar = upper_threshold(0.5, 0.11, 100)
        assert t_bar == 28
        assert error_event_prob(p, q, 100) == pytest.approx(binomial_tail(100, t_bar, 100, 0.11), rel=1e-12)

    def test_tie_counts_as_error(self):
        # n = 2 with one symbol of each kind gives a metric total of exactly zero
        p, q = (0.89, 0.11), (0.11, 0.89)
        expected = 0.11 ** 2 + 2 * 0.89 * 0.11
        assert error_event_prob(p, q, 2) == pytest.approx(expected, rel=1e-14)

    def test_ternary_against_sequence_enumeration(self, rng):
        for _ in range(5):
            p, q = rng.dirichlet(np.ones(3) * 3), rng.dirichlet(np.ones(3) * 3)
            n = 6
            llr = np.log2(p / q)
            total = mpmath.mpf(0)
            for seq in np.ndindex(*(3,) * n):
                if sum(llr[y] for y in seq) <= 1e-12 * n:
                    total += mpmath.fprod(mpmath.mpf(p[y]) for y in seq)
            assert error_event_prob(p, q, n) == pytest.approx(float(total), rel=1e-10, abs=1e-15)

    def test_cap(self):
        with pytest.raises(ResourceLimitError):
            error_event_prob((0.2, 0.2, 0.2, 0.4), (0.25, 0.25, 0.25, 0.25), 1000, cap=10_000)


class TestThresholds:

    def test_upper_threshold_example(self):
        assert upper_threshold(0.5, 0.11, 100) == 28

    def test_symmetric_pair(self):
        # centers 0.11 and 0.89 are tied at weight n/2
        assert lower_threshold(0.11, 0.89, 10) == 5
        assert upper_threshold(0.89, 0.11, 10) == 5

    def test_clamped(self):
        assert -1 <= lower_threshold(0.11, 0.12, 1) <= 1
        assert 0 <= upper_threshold(0.12, 0.11, 1) <= 2

    def test_dominance_threshold_scales(self):
        assert 100 * neighbor_dominance_threshold(0.5, 0.11) == pytest.approx(27.58, abs=5e-3)

    def test_dominance_threshold_increasing(self, rng):
        checked = 0
        while checked < 1000:
            a, b, c = np.sort(rng.uniform(0.01, 0.99, size=3))
            if b - a < 1e-3 or c - b < 1e-3:
                continue
            assert neighbor_dominance_threshold(a, b) < neighbor_dominance_threshold(c, b)
            assert neighbor_dominance_threshold(b, a) < neighbor_dominance_threshold(c, a)
            assert neighbor_dominance_threshold(a, c) < neighbor_dominance_threshold(b, c)
            checked += 1


class TestBscAchievability:

    def test_two_centers_one_symbol(self):
        assert bsc_achievability(0.11, bsc_set(2), 1) == pytest.approx(0.11, rel=1e-14)

    def test_single_center(self):
        s = build_dmc_message_set(ChannelMatrix.bsc(0.11), r0_for_grid(2))
        assert len(s) == 1
        assert achievability_general(s, 10) == 0.0

    def test_matches_general_bound(self):
        s = bsc_set(5)
        assert bsc_achievability(0.11, s, 100) == pytest.approx(achievability_general(s, 100), rel=1e-10)

    @pytest.mark.parametrize("m", [3, 4, 6])
    def test_summands_match_type_enumeration(self, m):
        s = bsc_set(m)
        for n in (1, 2, 7, 30):
            closed = bsc_summands([c[0] for c in s.centers], n)
            exact, _ = achievability_summands(s, n)
            np.testing.assert_allclose(closed, exact, rtol=1e-10, atol=1e-15)

    def test_summand_symmetry(self):
        summands = bsc_summands([c[0] for c in bsc_set(6).centers], 80)
        np.testing.assert_allclose(summands, summands[::-1], rtol=1e-12)

    def test_wrong_crossover(self):
        with pytest.raises(InputValidationError):
            bsc_achievability(0.2, bsc_set(3), 10)


class TestBecAchievability:

    def test_single_symbol(self):
        assert bec_achievability(0.22, 2, 1) == pytest.approx(0.11, rel=1e-14)

    def test_equals_bsc_at_half_erasure(self, rng):
        for _ in range(20):
            n, m = int(rng.integers(1, 300)), int(rng.integers(2, 10))
            assert bec_achievability(0.22, m, n) == bsc_achievability(0.11, bsc_set(m), n)

    def test_decreasing_in_erasure_probability(self):
        values = [bec_achievability(eta, 2, 20) for eta in (0.4, 0.3, 0.2, 0.1, 0.05)]
        assert all(b < a for a, b in zip(values, values[1:]))


class TestUnionErrorProb:

    @pytest.mark.parametrize("m_count", [3, 4, 5])
    def test_neighbors_suffice_for_binary(self, m_count):
        s = bsc_set(m_count)
        for n in range(1, 8):
            for m in range(m_count):
                full = union_error_prob(s, m, n, "full")
                near = union_error_prob(s, m, n, "neighbors")
                assert full == pytest.approx(near, abs=1e-12)

    def test_bounded_by_neighbor_sum(self):
        s = bsc_set(4)
        summands, _ = achievability_summands(s, 6)
        for m in range(4):
            assert union_error_prob(s, m, 6) <= summands[m] + 1e-12

    def test_cap(self):
        with pytest.raises(ResourceLimitError):
            union_error_prob(bsc_set(3), 0, 30, cap=1000)


class TestSearchMaxM:

    def test_infeasible_at_one_symbol(self):
        point = search_max_m(Bsc(0.11), 1, 1e-3)
        assert point.m_achieved == 1
        assert point.log2_m == 0.0
        assert not point.feasible
        assert point.rate == 0.0

    def test_half_capacity_near_three_hundred(self):
        point = search_max_m(Bsc(0.11), 300, 1e-3)
        assert point.method is BoundMethod.THM3_BSC
        assert point.eps_bound <= 1e-3
        assert 0.25 <= point.rate <= 0.32
        assert bsc_achievability(0.11, bsc_set(point.m_achieved + 1), 300) > 1e-3

    def test_bec_matches_bsc(self):
        bsc = search_max_m(Bsc(0.11), 300, 1e-3)
        bec = search_max_m(Bec(0.22), 300, 1e-3)
        assert bec.m_achieved == bsc.m_achieved
        assert bec.method is BoundMethod.THM4_BEC

    def test_general_matrix(self, three_by_three):
        point = search_max_m(three_by_three, 200, 1e-2)
        assert point.method is BoundMethod.THM2_EXACT
        assert point.m_achieved >= 2
        assert point.eps_bound <= 1e-2

    def test_general_falls_back_past_type_cap(self, three_by_three):
        point = evaluate_bound(three_by_three, 200, 4, cap=100)
        assert point.method is BoundMethod.THM2_BERRY_ESSEEN
        assert point.m_achieved == 3
        assert 0.0 < point.eps_bound <= 1.0

    def test_rejects_bad_eps(self):
        with pytest.raises(InputValidationError):
            search_max_m(Bsc(0.11), 10, 1.0)

    def test_monotone_in_n(self):
        sizes = [search_max_m(Bsc(0.11), n, 1e-3).m_achieved for n in (50, 100, 200, 400, 800)]
        assert sizes == sorted(sizes)

    def test_cap_during_lookahead_keeps_best(self):
        def evaluate(size):
            if size == 3:
                raise ResourceLimitError("too many types")
            return (0.0 if size == 1 else 1.0), size + 1, None

        assert bounds._scan(evaluate, 0.5, 1) == (1, 0.0, 2, None)


class TestEvaluateBound:

    def test_fixed_size(self):
        point = evaluate_bound(Bsc(0.11), 1, 2)
        assert point.eps_bound == pytest.approx(0.11)
        assert math.isnan(point.eps_target)

    def test_rate_conventions(self):
        assert rate_of(0.0, 1) == 0.0
        assert math.isnan(rate_of(1.0, 1))
        assert rate_of(3.0, 8) == pytest.approx(1.0)
