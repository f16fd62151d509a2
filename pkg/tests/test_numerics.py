import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from hurricast.errors import DegenerateSeriesError, DomainError, OptimizationError, SingularDesignError
from hurricast.numerics import (
    KPSS_CRITICAL_VALUES,
    aicc,
    kpss_auto_lags,
    kpss_statistic,
    nelder_mead_min,
    normal_cdf,
    normal_quantile,
    ols_fit,
    pinball,
)
from oracles import normal_equations

finite = st.floats(-1e3, 1e3, allow_nan=False)
taus = st.floats(0.01, 0.99)


class TestOls:
    def test_exact_line(self):
        x = np.arange(1.0, 11.0)
        fit = ols_fit(np.column_stack([np.ones(10), x]), 2 * x)
        np.testing.assert_allclose(fit.beta, [0.0, 2.0], atol=1e-12)
        assert fit.residual_variance == pytest.approx(0.0, abs=1e-20)

    def test_duplicated_column_is_singular(self):
        x = np.arange(8.0)
        with pytest.raises(SingularDesignError):
            ols_fit(np.column_stack([np.ones(8), x, x]), x)

    def test_matches_normal_equations(self, rng):
        X = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
        y = X @ [1.0, -2.0, 0.5] + rng.normal(size=50)
        np.testing.assert_allclose(ols_fit(X, y).beta, normal_equations(X, y), atol=1e-8)

    @given(st.integers(0, 10_000))
    def test_residuals_orthogonal_to_columns(self, seed):
        r = np.random.default_rng(seed)
        X = np.column_stack([np.ones(30), r.normal(size=(30, 2)) * r.uniform(0.1, 10)])
        y = r.normal(size=30) * 5
        fit = ols_fit(X, y)
        res = y - X @ fit.beta
        assert np.max(np.abs(X.T @ res)) < 1e-8 * max(1.0, np.abs(X).max() * np.abs(y).max())


class TestNelderMead:
    def test_quadratic_bowl(self):
        res = nelder_mead_min(lambda x: np.sum((x - [1.0, 2.0]) ** 2), [0.0, 0.0])
        np.testing.assert_allclose(res.x, [1.0, 2.0], atol=1e-5)
        assert res.converged

    def test_rosenbrock(self):
        rosen = lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
        res = nelder_mead_min(rosen, [-1.2, 1.0], tol=1e-10, max_iter=20000)
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-3)

    def test_deterministic(self):
        f = lambda x: np.sum(np.cos(x) + 0.1 * x ** 2)
        a = nelder_mead_min(f, [0.3, -2.0, 1.0])
        b = nelder_mead_min(f, [0.3, -2.0, 1.0])
        assert np.array_equal(a.x, b.x) and a.fun == b.fun and a.nit == b.nit

    def test_all_nonfinite_raises(self):
        with pytest.raises(OptimizationError):
            nelder_mead_min(lambda x: np.nan, [0.0, 0.0])

    def test_infinite_region_acts_as_wall(self):
        f = lambda x: np.inf if x[0] < 0.5 else (x[0] - 0.0) ** 2 + x[1] ** 2
        res = nelder_mead_min(f, [2.0, 1.0])
        assert res.x[0] >= 0.5 and res.x[0] == pytest.approx(0.5, abs=1e-4)


class TestKpss:
    def test_auto_lags(self):
        assert kpss_auto_lags(100) == 4
        assert kpss_auto_lags(200) == int(np.floor(4 * 2 ** 0.25))

    def test_constant_rejected(self):
        with pytest.raises(DegenerateSeriesError):
            kpss_statistic(np.full(30, 2.0))

    def test_too_short(self):
        with pytest.raises(Exception):
            kpss_statistic(np.arange(9.0))

    @pytest.mark.filterwarnings("ignore::Warning")
    def test_matches_statsmodels(self, rng):
        from statsmodels.tsa.stattools import kpss

        for _ in range(5):
            y = np.cumsum(rng.normal(size=120)) * 0.3 + rng.normal(size=120)
            ours = kpss_statistic(y, lags=6).statistic
            ref = kpss(y, regression="c", nlags=6)[0]
            assert ours == pytest.approx(ref, rel=1e-10)

    def test_critical_values(self):
        assert KPSS_CRITICAL_VALUES == {0.10: 0.347, 0.05: 0.463, 0.01: 0.739}

    def test_white_noise_mostly_accepted(self):
        r = np.random.default_rng(7)
        rejects = sum(kpss_statistic(r.normal(size=200)).reject_at_5pct for _ in range(500))
        assert rejects <= 50

    def test_random_walk_mostly_rejected(self):
        r = np.random.default_rng(8)
        rejects = sum(kpss_statistic(np.cumsum(r.normal(size=200))).reject_at_5pct for _ in range(500))
        assert rejects >= 450

    @given(st.integers(0, 10_000), finite)
    def test_shift_invariant(self, seed, c):
        y = np.random.default_rng(seed).normal(size=40)
        a = kpss_statistic(y).statistic
        b = kpss_statistic(y + c).statistic
        assert b == pytest.approx(a, abs=1e-10 * max(1.0, abs(c)))

    @given(st.integers(0, 10_000))
    def test_nonnegative(self, seed):
        y = np.random.default_rng(seed).normal(size=25)
        assert kpss_statistic(y).statistic >= 0


class TestAicc:
    def test_k_zero(self):
        assert aicc(-10.0, 0, 20) == pytest.approx(20.0)

    def test_formula(self):
        assert aicc(-10.0, 2, 20) == pytest.approx(24 + 12 / 17, abs=1e-12)
        assert aicc(-10.0, 2, 20) == pytest.approx(24.70588, abs=1e-5)

    def test_undefined(self):
        with pytest.raises(DomainError):
            aicc(-10.0, 4, 5)

    @given(finite, st.floats(0.01, 100), st.integers(0, 5), st.integers(8, 200))
    def test_monotone(self, ll, dl, k, n):
        assert aicc(ll + dl, k, n) < aicc(ll, k, n)
        assert aicc(ll, k + 1, n) > aicc(ll, k, n)


class TestNormal:
    def test_median(self):
        assert normal_quantile(0.5) == 0.0

    def test_table_value(self):
        assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_inverse_identity(self, rng):
        u = rng.uniform(1e-6, 1 - 1e-6, 1000)
        np.testing.assert_allclose(normal_cdf(normal_quantile(u)), u, atol=1e-7)

    def test_against_scipy_stats(self, rng):
        x = rng.normal(size=200) * 3
        np.testing.assert_allclose(normal_cdf(x), stats.norm.cdf(x), atol=1e-12)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            normal_quantile(bad)


class TestPinball:
    def test_zero_residual(self):
        assert pinball(3.0, 3.0, 0.3) == 0.0

    def test_upper_branch(self):
        assert pinball(10.0, 8.0, 0.9) == pytest.approx(1.8)

    def test_lower_branch_uses_one_minus_tau(self):
        assert pinball(8.0, 10.0, 0.9) == pytest.approx(0.2)

    def test_median_is_half_absolute(self, rng):
        y, q = rng.normal(size=1000), rng.normal(size=1000)
        np.testing.assert_allclose(pinball(y, q, 0.5), 0.5 * np.abs(y - q), atol=1e-15)

    @given(finite, finite, taus)
    def test_complementary_levels_sum_to_abs(self, y, q, tau):
        assert pinball(y, q, tau) + pinball(y, q, 1 - tau) == pytest.approx(abs(y - q), abs=1e-12 * max(1, abs(y - q)))

    @given(finite, finite, taus)
    def test_nonnegative(self, y, q, tau):
        assert pinball(y, q, tau) >= 0

    @pytest.mark.parametrize("bad", [0.0, 1.0])
    def test_tau_domain(self, bad):
        with pytest.raises(DomainError):
            pinball(1.0, 2.0, bad)
