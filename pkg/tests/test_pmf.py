"""Core PMF operations: examples, invariants, and oracle cross-checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlaysim import pmf as P
from overlaysim.pmf import (
    Pmf,
    bin_plus,
    binomial_pmf,
    compound_poisson,
    connectivity_prob,
    convolve,
    cpoi_mixture_merge,
    cpoi_perturbation_bound,
    expected_transitive_degree,
    poisson_pmf,
    tv_distance,
)

from helpers import enumerated_bin_plus, mc_component_mean


class TestBinomial:
    def test_empty_trials_is_point_mass(self):
        b = binomial_pmf(0, 0.7)
        assert b.offset == 0 and b.weights.tolist() == [1.0]

    def test_fair_coin_pair(self):
        assert np.allclose(binomial_pmf(2, 0.5).weights, [0.25, 0.5, 0.25])

    def test_direct_formula(self):
        # 4 * 0.3 * 0.7^3
        assert binomial_pmf(4, 0.3).p(1) == pytest.approx(0.4116, abs=1e-12)

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            binomial_pmf(3, 1.2)
        with pytest.raises(ValueError):
            binomial_pmf(3, -0.1)

    def test_support_exact(self):
        b = binomial_pmf(7, 0.3)
        assert b.max_support == 7 and b.tail_mass == 0.0


class TestPoisson:
    def test_zero_rate(self):
        assert poisson_pmf(0.0).weights.tolist() == [1.0]

    def test_unit_rate_at_zero(self):
        assert poisson_pmf(1.0, 1e-12).p(0) == pytest.approx(math.exp(-1), abs=1e-15)

    def test_mean(self):
        assert poisson_pmf(2.0, 1e-12).mean() == pytest.approx(2.0, abs=1e-9)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            poisson_pmf(-1.0)

    def test_tail_recorded(self):
        f = poisson_pmf(5.0, 1e-6)
        assert 0 < f.tail_mass <= 1e-6


class TestConvolve:
    def test_identity_element(self):
        g = binomial_pmf(3, 0.4)
        c = convolve(Pmf.delta(0), g)
        assert np.allclose(c.weights, g.weights) and c.offset == 0

    def test_bernoulli_pair(self):
        c = convolve(Pmf.bernoulli(0.5), Pmf.bernoulli(0.5))
        assert np.allclose(c.weights, binomial_pmf(2, 0.5).weights)

    def test_binomial_additivity(self):
        c = convolve(binomial_pmf(2, 0.3), binomial_pmf(3, 0.3))
        assert np.abs(c.weights - binomial_pmf(5, 0.3).weights).max() < 1e-12

    def test_offsets_add(self):
        c = convolve(Pmf.delta(2), Pmf.delta(3))
        assert c.offset == 5 and c.p(5) == 1.0


class TestTvDistance:
    def test_self_distance(self):
        f = binomial_pmf(5, 0.3)
        assert tv_distance(f, f) == 0.0

    def test_disjoint_points(self):
        assert tv_distance(Pmf.delta(0), Pmf.delta(1)) == 1.0

    def test_two_point(self):
        assert tv_distance(Pmf.bernoulli(0.5), Pmf.bernoulli(0.6)) == pytest.approx(0.1, abs=1e-15)

    @given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6), st.floats(0.05, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_metric_properties(self, a, b, c, y):
        f, g, h = binomial_pmf(a, y), binomial_pmf(b, 1 - y), binomial_pmf(c, y / 2)
        assert tv_distance(f, g) == tv_distance(g, f)
        assert tv_distance(f, h) <= tv_distance(f, g) + tv_distance(g, h) + 1e-12


class TestCompoundPoisson:
    def test_unit_increments_reduce_to_poisson(self):
        cp = compound_poisson(1.7, Pmf.delta(1), 1e-12)
        ref = poisson_pmf(1.7, 1e-12)
        hi = min(cp.max_support, ref.max_support)
        assert np.abs(cp.dense(hi) - ref.dense(hi)).max() < 1e-12

    def test_zero_rate(self):
        assert compound_poisson(0.0, Pmf.bernoulli(0.3)).weights.tolist() == [1.0]

    def test_atom_at_zero(self):
        cp = compound_poisson(1.0, Pmf.bernoulli(0.5), 1e-12)
        assert cp.p(0) == pytest.approx(math.exp(-0.5), abs=1e-12)
        # cross-check by direct Poisson mixture: sum_N Poi(1)(N) Bin(N, 0.5)(0)
        direct = sum(poisson_pmf(1.0, 1e-16).p(n) * 0.5**n for n in range(60))
        assert cp.p(0) == pytest.approx(direct, abs=1e-12)

    @given(st.floats(0.1, 3.0), st.integers(1, 5), st.floats(0.05, 0.95))
    @settings(max_examples=30, deadline=None)
    def test_moment_identities(self, lam, x, y):
        g = binomial_pmf(x, y)
        cp = compound_poisson(lam, g, 1e-13)
        assert cp.tail_mass < 1e-12
        assert cp.mean() == pytest.approx(lam * g.mean(), rel=1e-8)
        second = float(np.dot(g.support().astype(float) ** 2, g.weights))
        assert cp.variance() == pytest.approx(lam * second, rel=1e-8)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            compound_poisson(-1.0, Pmf.delta(1))


class TestMixtureMerge:
    def test_singleton(self):
        lam, g = cpoi_mixture_merge([(1.0, Pmf.delta(1))])
        assert lam == 1.0 and g.p(1) == 1.0

    def test_two_points(self):
        lam, g = cpoi_mixture_merge([(1.0, Pmf.delta(1)), (1.0, Pmf.delta(2))])
        assert lam == 2.0 and g.p(1) == 0.5 and g.p(2) == 0.5

    def test_merged_law_equals_convolution(self):
        comps = [(0.5, Pmf.bernoulli(0.3)), (1.5, binomial_pmf(2, 0.3))]
        lam, g = cpoi_mixture_merge(comps)
        merged = compound_poisson(lam, g, 1e-14)
        conv = convolve(
            compound_poisson(0.5, comps[0][1], 1e-14), compound_poisson(1.5, comps[1][1], 1e-14)
        )
        assert tv_distance(merged, conv) < 1e-10

    def test_rejects_empty_and_zero(self):
        with pytest.raises(ValueError):
            cpoi_mixture_merge([])
        with pytest.raises(ValueError):
            cpoi_mixture_merge([(0.0, Pmf.delta(1))])


class TestPerturbationBound:
    def test_trivial_cases(self):
        assert cpoi_perturbation_bound(1, 1, 0) == 0
        assert cpoi_perturbation_bound(1, 2, 0) == 1
        assert cpoi_perturbation_bound(2, 2, 0.1) == pytest.approx(0.2)

    @given(st.floats(0.2, 2.5), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
    @settings(max_examples=25, deadline=None)
    def test_bound_holds_numerically(self, lam, y1, y2):
        f, g = Pmf.bernoulli(y1), Pmf.bernoulli(y2)
        observed = tv_distance(
            compound_poisson(lam, f, 1e-13), compound_poisson(lam, g, 1e-13)
        )
        assert observed <= cpoi_perturbation_bound(lam, lam, tv_distance(f, g)) + 1e-9


class TestConnectivity:
    def test_single_node(self):
        assert connectivity_prob(1, 0.3) == 1.0

    def test_single_edge(self):
        assert connectivity_prob(2, 0.5) == 0.5

    def test_three_nodes(self):
        # 8 edge configurations, 4 connected
        assert connectivity_prob(3, 0.5) == pytest.approx(0.5, abs=1e-14)

    def test_rejects_zero_nodes(self):
        with pytest.raises(ValueError):
            connectivity_prob(0, 0.5)

    def test_extremes(self):
        assert connectivity_prob(5, 1.0) == 1.0
        assert connectivity_prob(5, 0.0) == 0.0


class TestBinPlus:
    def test_two_node_graph_is_bernoulli(self):
        for y in (0.2, 0.7):
            assert np.allclose(bin_plus(1, y).weights, [1 - y, y])

    def test_extreme_strengths(self):
        assert bin_plus(4, 0.0).p(0) == 1.0
        assert bin_plus(4, 1.0).p(4) == 1.0

    def test_three_node_enumeration(self):
        assert np.allclose(bin_plus(2, 0.5).weights, [0.25, 0.25, 0.5], atol=1e-14)

    @pytest.mark.parametrize("x", range(0, 5))
    def test_matches_exhaustive_enumeration(self, x):
        for y in np.arange(0.1, 0.95, 0.1):
            ref = enumerated_bin_plus(x, float(y))
            got = bin_plus(x, float(y)).dense(x)
            assert np.abs(got - ref).max() < 1e-12

    def test_dp_and_recursion_agree_at_boundary(self):
        # the fast recursion is used through x = 12; the DP takes over above
        for y in (0.01, 0.1, 0.5, 0.9):
            fast = bin_plus(12, y).weights
            dp = P._component_size_distribution(13, y)[1:]
            assert np.abs(fast - dp / dp.sum()).max() < 1e-11

    def test_stochastic_dominance_over_binomial(self):
        for x in range(1, 6):
            for y in np.arange(0.1, 0.95, 0.1):
                cb = binomial_pmf(x, float(y)).cdf()
                cp = bin_plus(x, float(y)).cdf()
                assert np.all(cb >= cp - 1e-12)

    def test_moderate_size_against_monte_carlo(self):
        y = 1.2 / 100
        mean = bin_plus(100, y).mean()
        mc = mc_component_mean(101, y, 40000, seed=11)
        assert mean == pytest.approx(mc, rel=0.05)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            bin_plus(100000, 0.001)


class TestExpectedTransitiveDegree:
    def test_single_pair(self):
        assert expected_transitive_degree(1, 0.37) == pytest.approx(0.37)

    def test_full_clique(self):
        assert expected_transitive_degree(9, 1.0) == 9.0

    def test_three_node_value(self):
        assert expected_transitive_degree(2, 0.5) == pytest.approx(1.25)

    def test_lower_bound_and_monotonicity(self):
        for x in (3, 10, 40):
            vals = [expected_transitive_degree(x, y) for y in np.linspace(0.0, 1.0, 11)]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
            for y, v in zip(np.linspace(0.0, 1.0, 11), vals):
                assert v >= x * y - 1e-12

    def test_approximation_tracks_exact_far_from_critical(self):
        # branching approximation vs the exact DP, outside the critical window
        for c, tol in ((0.5, 0.03), (2.0, 0.01), (3.0, 0.01)):
            x = 300
            exact = expected_transitive_degree(x, c / x, exact_limit=512)
            approx = expected_transitive_degree(x, c / x, exact_limit=0)
            assert approx == pytest.approx(exact, rel=tol)

    def test_approximation_documented_band_near_critical(self):
        # near criticality the approximation is only good to tens of percent
        x = 512
        for c in (0.9, 1.1):
            exact = expected_transitive_degree(x, c / x, exact_limit=1024)
            approx = expected_transitive_degree(x, c / x, exact_limit=0)
            assert approx == pytest.approx(exact, rel=0.35)


class TestPmfInvariants:
    def test_normalisation_enforced(self):
        with pytest.raises(ValueError):
            Pmf(0, np.array([0.5, 0.3]), 0.0)

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            Pmf(0, np.array([1.1, -0.1]))

    def test_canonical_strips_zeros(self):
        f = Pmf(0, np.array([0.0, 1.0, 0.0]))
        c = f.canonical()
        assert c.offset == 1 and c.weights.tolist() == [1.0]
