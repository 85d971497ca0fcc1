import math

import numpy as np
import pytest

from permkit.concentration import (
    ConcStats,
    bernstein_linear_bound,
    dependent_rademacher_chaos,
    empirical_tail_check,
    exponential_tail_shape,
    hoeffding_linear_bound,
    lambda_m,
    sigma_indep_exact,
    sigma_indep_uppers,
    sigma_two_sample_upper,
)
from permkit.kernels import Gaussian, GramMatrix, MultinomialIndicator, gram
from permkit.perm_core import replicate_rng
from permkit.ustats import linear_stat_many, two_sample_u_many


def _gram_from_values(values, zero_diag=True):
    v = np.asarray(values, dtype=float)
    if zero_diag:
        v = v.copy()
        np.fill_diagonal(v, 0.0)
    return GramMatrix(values=v, diagonal_zeroed=zero_diag)


class TestSigmaTwoSample:
    def test_zero_kernel(self):
        g = _gram_from_values(np.zeros((4, 4)))
        assert sigma_two_sample_upper(g, 2) == 0.0

    def test_single_pair_hand_value(self):
        g = _gram_from_values([[0.0, 1.0], [1.0, 0.0]])
        assert sigma_two_sample_upper(g, 2) == pytest.approx(1 / math.sqrt(2))

    def test_homogeneity(self):
        rng = np.random.default_rng(0)
        v = rng.normal(size=(6, 6))
        v = v + v.T
        g1 = _gram_from_values(v)
        g2 = _gram_from_values(3.5 * v)
        assert sigma_two_sample_upper(g2, 3) == pytest.approx(
            3.5 * sigma_two_sample_upper(g1, 3), rel=1e-12
        )

    def test_n1_domain(self):
        g = _gram_from_values(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            sigma_two_sample_upper(g, 1)


class TestSigmaIndep:
    def test_zero_z(self):
        gy = _gram_from_values(np.ones((3, 3)))
        gz = _gram_from_values(np.zeros((3, 3)))
        assert sigma_indep_uppers(gy, gz) == (0.0, 0.0)

    def test_constant_data_hand_value(self):
        # all off-diagonal g = 1 at n = 3: both bounds equal sqrt(1/6)
        gy = _gram_from_values(np.ones((3, 3)))
        gz = _gram_from_values(np.ones((3, 3)))
        a, b = sigma_indep_uppers(gy, gz)
        assert a == pytest.approx(math.sqrt(1 / 6))
        assert b == pytest.approx(math.sqrt(1 / 6))

    def test_bounds_dominate_exact_supremum(self):
        rng = np.random.default_rng(1)
        for n in (3, 4, 5):
            for _ in range(10):
                y = rng.integers(0, 3, n)
                z = rng.normal(size=n)
                gy = gram(MultinomialIndicator(3), y, zero_diagonal=True)
                gz = gram(Gaussian([0.8]), z, zero_diagonal=True)
                exact = sigma_indep_exact(gy, gz)
                a, b = sigma_indep_uppers(gy, gz)
                assert a >= exact - 1e-12
                assert b >= exact - 1e-12

    def test_exact_refuses_large_n(self):
        g = _gram_from_values(np.zeros((6, 6)))
        with pytest.raises(ValueError):
            sigma_indep_exact(g, g)


class TestLambdaM:
    def test_all_ones(self):
        g = GramMatrix(values=np.ones((4, 4)), diagonal_zeroed=False)
        lam, m = lambda_m(g, g)
        assert lam == pytest.approx(1.0)
        assert m == pytest.approx(1.0)

    def test_zero_z(self):
        gy = GramMatrix(values=np.ones((4, 4)), diagonal_zeroed=False)
        gz = GramMatrix(values=np.zeros((4, 4)), diagonal_zeroed=False)
        assert lambda_m(gy, gz) == (0.0, 0.0)

    def test_gaussian_max_bounded_by_peaks(self):
        rng = np.random.default_rng(2)
        ky, kz = Gaussian([0.5]), Gaussian([1.5])
        gy = gram(ky, rng.normal(size=8), zero_diagonal=False)
        gz = gram(kz, rng.normal(size=8), zero_diagonal=False)
        _, m = lambda_m(gy, gz)
        assert m <= ky.max_value * kz.max_value + 1e-15

    def test_requires_full_matrices(self):
        g = _gram_from_values(np.ones((4, 4)), zero_diag=True)
        with pytest.raises(ValueError):
            lambda_m(g, g)


class TestLinearBounds:
    def test_hoeffding_hand_value(self):
        # n=2, a=b=(-1,1), t=0.5: n^2 t^2 = 1, range^2 * sum = 4 * 2 = 8
        got = hoeffding_linear_bound(0.5, [-1.0, 1.0], [-1.0, 1.0])
        assert got == pytest.approx(math.exp(-1.0 / 8.0))

    def test_bernstein_hand_value(self):
        # n=2: denom = 2 * (2*2)/4 + (2/3)*0.5*1 = 2 + 1/3 -> exp(-0.5/(7/3))
        got = bernstein_linear_bound(0.5, [-1.0, 1.0], [-1.0, 1.0])
        assert got == pytest.approx(math.exp(-3.0 / 14.0))

    def test_limits_at_zero_t(self):
        a = np.array([-1.0, 0.0, 1.0])
        assert hoeffding_linear_bound(1e-12, a, a) == pytest.approx(1.0, abs=1e-9)
        assert bernstein_linear_bound(1e-12, a, a) == pytest.approx(1.0, abs=1e-9)

    def test_monotone_decreasing_in_t(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=10)
        a -= a.mean()
        b = rng.normal(size=10)
        b -= b.mean()
        ts = np.linspace(0.01, 2.0, 25)
        ho = [hoeffding_linear_bound(t, a, b) for t in ts]
        be = [bernstein_linear_bound(t, a, b) for t in ts]
        assert all(x > y for x, y in zip(ho, ho[1:]))
        assert all(x > y for x, y in zip(be, be[1:]))

    def test_degenerate_inputs_bound_zero(self):
        zeros = np.zeros(5)
        spread = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        assert hoeffding_linear_bound(0.1, zeros, spread) == 0.0
        assert bernstein_linear_bound(0.1, zeros, spread) == 0.0

    def test_t_domain(self):
        with pytest.raises(ValueError):
            hoeffding_linear_bound(0.0, [-1.0, 1.0], [-1.0, 1.0])

    def test_empirical_tail_respects_bounds_small(self):
        # 2e4 Monte Carlo permutations of the linear statistic on one dataset
        rng = np.random.default_rng(4)
        n = 20
        y = rng.normal(size=n)
        z = rng.normal(size=n)
        a = y - y.mean()
        b = z - z.mean()
        perms = np.array([replicate_rng(5, i).permutation(n) for i in range(20_000)])
        draws = linear_stat_many(y, z, perms)
        grid = np.linspace(0.05, 1.0, 10) * float(np.abs(draws).max())
        for bound_fn in (
            lambda t: hoeffding_linear_bound(t, a, b),
            lambda t: bernstein_linear_bound(t, a, b),
        ):
            emp = np.array([(draws >= t).mean() for t in grid])
            se = np.sqrt(emp * (1 - emp) / draws.size)
            bounds = np.array([bound_fn(t) for t in grid])
            assert not np.any(emp - 3 * se > bounds)


class TestDependentRademacherChaos:
    def test_constant_matrix_always_zero(self):
        a = np.ones((6, 6)) - np.eye(6)
        rng = np.random.default_rng(6)
        for _ in range(10):
            assert dependent_rademacher_chaos(a, rng) == pytest.approx(0.0)

    def test_n2_hand_case(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        rng = np.random.default_rng(7)
        assert dependent_rademacher_chaos(a, rng) == pytest.approx(0.0)

    def test_mean_near_zero(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(8, 8))
        a = a + a.T
        np.fill_diagonal(a, 0.0)
        draws = np.array(
            [dependent_rademacher_chaos(a, rng) for _ in range(20_000)]
        )
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean()) <= 3 * se

    def test_odd_n_rejected(self):
        a = np.zeros((3, 3))
        with pytest.raises(ValueError):
            dependent_rademacher_chaos(a, np.random.default_rng(0))


def _normal_sampler(rng, size):
    return rng.normal(size=size)


class TestEmpiricalTailCheck:
    def test_trivial_bound_one(self):
        report = empirical_tail_check(
            _normal_sampler, lambda t: 1.0, [0.5, 1.0, 2.0], 2000, seed=1
        )
        assert report.violations == 0

    def test_zero_bound_violated(self):
        report = empirical_tail_check(
            _normal_sampler, lambda t: 0.0, [0.1, 0.5], 2000, seed=2
        )
        assert report.violations > 0

    def test_csv_roundtrip(self, tmp_path):
        report = empirical_tail_check(
            _normal_sampler, lambda t: 1.0, [0.5, 1.0], 1500, seed=3
        )
        path = tmp_path / "tail.csv"
        report.to_csv(path)
        text = path.read_text().splitlines()
        assert text[0].startswith("# permkit-csv v1")
        assert text[1] == "t,empirical,se,bound,violation"
        assert len(text) == 4

    def test_replicate_floor(self):
        with pytest.raises(ValueError):
            empirical_tail_check(_normal_sampler, lambda t: 1.0, [1.0], 10)


class TestExponentialShape:
    def test_shape_values(self):
        assert exponential_tail_shape(1.0, 1.0, 2.0) == pytest.approx(math.exp(-2.0))
        # quadratic regime below sigma
        assert exponential_tail_shape(0.5, 1.0, 2.0) == pytest.approx(math.exp(-0.5))
        assert exponential_tail_shape(0.5, 0.0, 2.0) == 0.0

    def test_qualitative_decay_of_permuted_u(self):
        # the permuted two-sample U-statistic tail decays at least as fast as
        # some exponential shape in t / sigma (constant not asserted)
        rng = np.random.default_rng(9)
        n1 = n2 = 10
        pts = rng.normal(size=n1 + n2)
        g = gram(Gaussian([0.7]), pts, zero_diagonal=True)
        sigma = sigma_two_sample_upper(g, n1)
        perms = np.array(
            [replicate_rng(11, i).permutation(n1 + n2) for i in range(40_000)]
        )
        draws = two_sample_u_many(g, n1, n2, perms)
        grid = sigma * np.array([0.5, 1.0, 1.5, 2.0, 3.0])
        tails = np.array([(draws >= t).mean() for t in grid])
        assert np.all(np.diff(tails) <= 0)
        weak_shape = np.array([exponential_tail_shape(t, sigma, 0.05) for t in grid])
        assert np.all(tails <= weak_shape)


class TestConcStats:
    def test_nonnegativity_enforced(self):
        with pytest.raises(ValueError):
            ConcStats(
                sigma_two_sample=-1.0,
                sigma_indep_bounds=(0.0, 0.0),
                lambda_n=0.0,
                m_n=0.0,
            )

    def test_bundle_roundtrip(self):
        s = ConcStats(
            sigma_two_sample=1.0, sigma_indep_bounds=(2.0, 3.0), lambda_n=4.0, m_n=5.0
        )
        assert s.sigma_indep_bounds == (2.0, 3.0)
