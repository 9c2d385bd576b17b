"""Layer-type distributions: moments, mixed laws, families, transforms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlaysim.layers import (
    LayerType,
    LayerTypeDistribution,
    bond_scaled,
    cross_moment,
    mixed_bin_plus,
    mixed_binomial,
    power_law_distribution,
    site_thinned,
    truncate_sizes,
)
from overlaysim.pmf import UndefinedDistributionError, bin_plus, binomial_pmf


def random_distribution(rng: np.random.Generator, n_atoms: int = 4) -> LayerTypeDistribution:
    xs = rng.integers(0, 8, size=n_atoms)
    ys = rng.uniform(0, 1, size=n_atoms)
    ps = rng.dirichlet(np.ones(n_atoms))
    return LayerTypeDistribution(xs, ys, ps)


class TestTypes:
    def test_layer_type_validation(self):
        with pytest.raises(ValueError):
            LayerType(-1, 0.5)
        with pytest.raises(ValueError):
            LayerType(3, 1.5)

    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            LayerTypeDistribution([1, 2], [0.5, 0.5], [0.6, 0.6])

    def test_duplicate_atoms_merged(self):
        d = LayerTypeDistribution([2, 2, 3], [0.5, 0.5, 0.5], [0.25, 0.25, 0.5])
        assert len(d.xs) == 2
        assert d.ps[d.xs.tolist().index(2)] == pytest.approx(0.5)

    def test_size_zero_atoms_retained(self):
        d = LayerTypeDistribution([0, 3], [0.4, 0.4], [0.5, 0.5])
        assert 0 in d.xs.tolist()
        assert cross_moment(d, 1, 0).value == pytest.approx(1.5)


class TestCrossMoment:
    def test_point_mass_mean_size(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        assert cross_moment(d, 1, 0).value == 3.0

    def test_point_mass_pair_moment(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        assert cross_moment(d, 2, 1).value == pytest.approx(3.0)

    def test_two_atom_hand_value(self):
        d = LayerTypeDistribution([2, 4], [1.0, 0.25], [0.5, 0.5])
        assert cross_moment(d, 3, 3).value == pytest.approx(0.1875)

    @given(st.data())
    @settings(max_examples=30, deadline=None)
    def test_nonincreasing_in_strength_power(self, data):
        rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
        d = random_distribution(rng)
        r = data.draw(st.integers(0, 3))
        vals = [cross_moment(d, r, s).value for s in range(4)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_nonincreasing_under_truncation(self):
        d = LayerTypeDistribution([2, 5, 9], [0.5, 0.6, 0.7], [0.3, 0.3, 0.4])
        for M in (1, 3, 6, 9):
            t = truncate_sizes(d, M)
            for r, s in ((1, 0), (2, 1), (3, 2)):
                assert cross_moment(t, r, s).value <= cross_moment(d, r, s).value + 1e-12


class TestMixedBinomial:
    def test_point_mass_reduces_to_binomial(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        assert np.allclose(mixed_binomial(d, 1, 0).weights, binomial_pmf(2, 0.5).weights)

    @given(st.integers(1, 7), st.floats(0.05, 0.95), st.integers(0, 3))
    @settings(max_examples=40, deadline=None)
    def test_point_mass_identity_generic(self, x, y, r):
        if r > x:
            return
        d = LayerTypeDistribution.point_mass(x, y)
        got = mixed_binomial(d, r, 1)
        ref = binomial_pmf(x - r, y)
        assert np.abs(got.dense(x) - ref.dense(x)).max() < 1e-12

    def test_two_atom_mixture(self):
        d = LayerTypeDistribution([2, 4], [0.5, 0.5], [0.5, 0.5])
        got = mixed_binomial(d, 1, 0)
        ref = (1 / 3) * binomial_pmf(1, 0.5).dense(3) + (2 / 3) * binomial_pmf(3, 0.5).dense(3)
        assert np.abs(got.dense(3) - ref).max() < 1e-14

    def test_zero_moment_rejected(self):
        d = LayerTypeDistribution.point_mass(0, 0.5)
        with pytest.raises(UndefinedDistributionError):
            mixed_binomial(d, 1, 0)

    def test_analytically_infinite_moment_rejected(self):
        d = power_law_distribution(2.5, 1.0, 2.0, 1, 200)
        with pytest.raises(UndefinedDistributionError):
            mixed_binomial(d, 3, 1)  # alpha + s beta = 3.5 <= r + 1 = 4

    def test_truncation_records_tail(self):
        d = LayerTypeDistribution.point_mass(50, 0.5)
        g = mixed_binomial(d, 1, 0, t_max=10)
        assert g.max_support == 10 and g.tail_mass > 0.1


class TestMixedBinPlus:
    def test_single_edge_layers(self):
        d = LayerTypeDistribution.point_mass(2, 1.0)
        g = mixed_bin_plus(d, 1, 0)
        assert g.p(1) == pytest.approx(1.0)

    def test_point_mass_three(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        assert np.allclose(mixed_bin_plus(d, 1, 0).weights, bin_plus(2, 0.5).weights)

    def test_all_zero_strength(self):
        d = LayerTypeDistribution([2, 5], [0.0, 0.0], [0.5, 0.5])
        assert mixed_bin_plus(d, 1, 0).p(0) == pytest.approx(1.0)


class TestPowerLawFamily:
    def test_single_support_point(self):
        d = power_law_distribution(3.0, 0.0, 0.5, 1, 1)
        assert d.xs.tolist() == [1] and d.ys.tolist() == [0.5] and d.ps.tolist() == [1.0]

    def test_mass_ratio(self):
        d = power_law_distribution(3.5, 0.5, 1.0, 1, 10**4)
        assert d.ps[1] / d.ps[0] == pytest.approx(2**-3.5, rel=1e-12)

    def test_strength_clamped(self):
        d = power_law_distribution(2.5, 1.0, 2.0, 1, 10**4)
        assert d.ys[0] == 1.0 and d.ys[3] == pytest.approx(0.5)

    def test_rejects_small_alpha(self):
        with pytest.raises(ValueError):
            power_law_distribution(2.0, 0.5, 1.0, 1, 100)

    def test_moment_converges_iff_condition(self):
        # (P)_{rs} finite iff alpha + s beta > r + 1; watch the finite-range
        # sums as the range grows
        conv = [
            cross_moment(power_law_distribution(3.5, 0.5, 1.0, 1, xm), 1, 0).value
            for xm in (10**3, 10**4, 10**5)
        ]
        assert abs(conv[2] - conv[1]) < abs(conv[1] - conv[0])
        assert abs(conv[2] - conv[1]) < 1e-2
        div = [
            cross_moment(power_law_distribution(2.5, 1.0, 2.0, 1, xm), 3, 1).value
            for xm in (10**3, 10**4, 10**5)
        ]
        assert div[2] > 2 * div[1] > 4 * div[0] / 2.1
        assert cross_moment(power_law_distribution(2.5, 1.0, 2.0, 1, 10**3), 3, 1).infinite


class TestTruncateSizes:
    def test_noop_when_cap_large(self):
        d = LayerTypeDistribution([2, 5], [0.5, 0.5], [0.5, 0.5])
        assert truncate_sizes(d, 5) == d

    def test_large_sizes_zeroed(self):
        d = LayerTypeDistribution([2, 5], [0.3, 0.3], [0.5, 0.5])
        t = truncate_sizes(d, 3)
        assert sorted(t.xs.tolist()) == [0, 2]
        assert t.ps.sum() == pytest.approx(1.0)

    def test_power_law_capped_moment(self):
        d = power_law_distribution(3.0, 0.5, 1.0, 1, 200)
        M = 40
        t = truncate_sizes(d, M)
        direct = float(np.sum(d.xs[d.xs <= M] * d.ps[d.xs <= M]))
        assert cross_moment(t, 1, 0).value == pytest.approx(direct, rel=1e-12)


class TestPercolationTransforms:
    def test_site_identity_at_one(self):
        d = LayerTypeDistribution([3, 5], [0.5, 0.2], [0.5, 0.5])
        assert site_thinned(d, 1.0) == d

    def test_site_all_mass_at_zero(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        t = site_thinned(d, 0.0)
        assert t.xs.tolist() == [0]

    def test_site_moment_identity_point(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        assert cross_moment(site_thinned(d, 0.5), 1, 0).value == pytest.approx(1.5, rel=1e-12)

    def test_bond_identity_at_one(self):
        d = LayerTypeDistribution([3, 5], [0.5, 0.2], [0.5, 0.5])
        assert bond_scaled(d, 1.0) == d

    def test_bond_point_mass(self):
        d = LayerTypeDistribution.point_mass(3, 0.5)
        b = bond_scaled(d, 0.4)
        assert b.xs.tolist() == [3] and b.ys.tolist() == [pytest.approx(0.2)]

    @given(st.integers(0, 10**6), st.floats(0.05, 1.0))
    @settings(max_examples=30, deadline=None)
    def test_moment_identities_random(self, seed, theta):
        rng = np.random.default_rng(seed)
        d = random_distribution(rng)
        for r, s in ((1, 0), (2, 1), (3, 2)):
            base = cross_moment(d, r, s).value
            thin = cross_moment(site_thinned(d, theta), r, s).value
            scale = cross_moment(bond_scaled(d, theta), r, s).value
            assert thin == pytest.approx(theta**r * base, rel=1e-10, abs=1e-12)
            assert scale == pytest.approx(theta**s * base, rel=1e-10, abs=1e-12)


class TestSerialization:
    def test_round_trip_atoms(self):
        d = LayerTypeDistribution([2, 4], [0.25, 0.75], [0.4, 0.6])
        assert LayerTypeDistribution.from_json(d.to_json()) == d

    def test_round_trip_family(self):
        d = power_law_distribution(3.5, 0.5, 1.0, 1, 500)
        rt = LayerTypeDistribution.from_json(d.to_json())
        assert rt == d and rt.family == d.family
