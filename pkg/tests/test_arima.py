import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hurricast.arima import (
    ArimaOrder,
    PointForecast,
    arima_loglik,
    fit_arima,
    forecast_arima,
    near_unit_root,
    pacf_to_poly,
    poly_to_pacf,
    select_arima_order,
    select_differencing,
)
from hurricast.errors import EstimationError, PreconditionError, SchemaError
from oracles import fd_gradient


def ar1(phi, n, seed, mu=0.0, burn=100):
    r = np.random.default_rng(seed)
    e = r.normal(size=n + burn)
    y = np.zeros(n + burn)
    for t in range(1, n + burn):
        y[t] = phi * y[t - 1] + e[t]
    return mu + y[burn:]


def arma(phi, theta, n, seed, burn=200):
    r = np.random.default_rng(seed)
    e = r.normal(size=n + burn)
    y = np.zeros(n + burn)
    for t in range(2, n + burn):
        y[t] = sum(p * y[t - 1 - i] for i, p in enumerate(phi)) + e[t] + sum(
            th * e[t - 1 - j] for j, th in enumerate(theta))
    return y[burn:]


class TestOrderType:
    def test_ranges(self):
        with pytest.raises(PreconditionError):
            ArimaOrder(0, 3, 0)
        with pytest.raises(PreconditionError):
            ArimaOrder(6, 0, 0)
        assert ArimaOrder(1, 1, 1).tuple == (1, 1, 1)

    def test_point_forecast_needs_positive_sd(self):
        with pytest.raises(EstimationError):
            PointForecast(1.0, 0.0)


class TestTransforms:
    @given(st.lists(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=5))
    def test_round_trip_and_stationary(self, u):
        a = pacf_to_poly(u)
        roots = np.roots(np.concatenate([-a[::-1], [1.0]]))
        assert np.all(np.abs(roots) > 1.0 - 1e-9)
        np.testing.assert_allclose(poly_to_pacf(a), u, atol=1e-6)


class TestFit:
    def test_ar1_recovery(self):
        fit = fit_arima(ar1(0.6, 500, seed=3), order=(1, 0, 0))
        assert 0.5 <= fit.phi[0] <= 0.7

    def test_regression_coefficient(self, rng):
        x = rng.normal(size=300)
        y = 3 * x + rng.normal(size=300)
        fit = fit_arima(y, x, (0, 0, 0))
        assert 2.8 <= fit.beta[0] <= 3.2

    def test_white_noise_closed_form(self, rng):
        y = rng.normal(2.0, 1.5, size=80)
        fit = fit_arima(y, order=(0, 0, 0))
        assert fit.intercept == pytest.approx(y.mean(), abs=1e-6)
        assert fit.sigma2 == pytest.approx(y.var(ddof=0), abs=1e-6)

    def test_matches_statsmodels_loglik(self):
        sm = pytest.importorskip("statsmodels.api")
        y = arma([0.5, -0.2], [0.4], 400, seed=1)
        ours = fit_arima(y, order=(2, 0, 1))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = sm.tsa.SARIMAX(y, order=(2, 0, 1), trend="c").fit(disp=0)
        assert ours.loglik == pytest.approx(ref.llf, abs=1e-3)
        assert ours.loglik >= ref.llf - 1e-6

    def test_roots_outside_unit_circle(self):
        fit = fit_arima(arma([0.5, -0.2], [0.4, 0.2], 300, seed=2), order=(2, 0, 2))
        for poly in (fit.phi, -fit.theta):
            roots = np.roots(np.concatenate([-poly[::-1], [1.0]]))
            assert np.all(np.abs(roots) > 1.0)

    def test_sigma2_positive(self):
        assert fit_arima(ar1(0.3, 60, 1), order=(1, 0, 1)).sigma2 > 0

    def test_differencing_consistency(self):
        y = np.cumsum(arma([0.4], [0.3], 200, seed=4))
        a = fit_arima(y, order=(1, 1, 1))
        b = fit_arima(np.diff(y), order=(1, 0, 1), include_mean=False)
        assert a.loglik == pytest.approx(b.loglik, abs=1e-6)
        assert a.intercept == 0.0

    @pytest.mark.parametrize("order", [(1, 0, 0), (2, 0, 1), (0, 1, 1), (1, 1, 0)])
    def test_gradient_vanishes_at_optimum(self, order, rng):
        x = rng.normal(size=150)
        y = 0.5 * x + arma([0.5], [0.3], 150, seed=5)
        fit = fit_arima(y, x, order)
        p, q = fit.order.p, fit.order.q

        def ll(v):
            return arima_loglik(fit, y, x, phi=v[:p], theta=v[p:p + q], beta=v[p + q:p + q + 1],
                                intercept=v[-2] if fit.include_mean else 0.0, sigma2=v[-1])

        theta0 = np.concatenate([fit.phi, fit.theta, fit.beta,
                                 [fit.intercept] if fit.include_mean else [], [fit.sigma2]])
        if not fit.include_mean:
            ll_ = ll
            ll = lambda v: ll_(np.concatenate([v[:-1], [0.0], v[-1:]]))
        g = fd_gradient(ll, theta0, h=1e-6)
        assert np.max(np.abs(g)) < 1e-3 * abs(fit.loglik)
        assert arima_loglik(fit, y, x, intercept=fit.intercept, sigma2=fit.sigma2) == pytest.approx(fit.loglik, abs=1e-8)

    def test_equation_form_is_arx_least_squares(self, rng):
        x = rng.normal(size=200)
        y = np.zeros(200)
        for t in range(1, 200):
            y[t] = 1.0 + 0.5 * y[t - 1] + 2.0 * x[t] + rng.normal()
        fit = fit_arima(y, x, (1, 0, 0), xreg="equation")
        D = np.column_stack([np.ones(199), y[:-1], x[1:]])
        c, phi, b = np.linalg.lstsq(D, y[1:], rcond=None)[0]
        assert fit.phi[0] == pytest.approx(phi, abs=1e-4)
        assert fit.beta[0] == pytest.approx(b, abs=1e-4)
        assert fit.intercept == pytest.approx(c, abs=1e-4)

    def test_too_short(self):
        with pytest.raises(PreconditionError):
            fit_arima(np.arange(7.0), order=(1, 0, 1))

    def test_bad_xreg(self):
        with pytest.raises(PreconditionError):
            fit_arima(np.arange(30.0), order=(0, 0, 0), xreg="inside")

    def test_json_summary(self):
        d = json.loads(fit_arima(ar1(0.5, 50, 1), order=(1, 0, 0)).to_json())
        assert {"order", "phi", "theta", "beta", "loglik", "aicc"} <= set(d)


class TestForecast:
    def test_ar1_hand_recursion(self, rng):
        x = rng.normal(size=120)
        y = 4.0 + 0.7 * x + ar1(0.6, 120, seed=9)
        fit = fit_arima(y, x, (1, 0, 0))
        xn = 0.3
        mu, phi, b = fit.intercept, fit.phi[0], fit.beta[0]
        hand = mu + b * xn + phi * (y[-1] - mu - b * x[-1])
        pf = forecast_arima(fit, y, x, [xn])
        assert pf.mean == pytest.approx(hand, abs=1e-9)

    def test_white_noise_forecast_is_intercept(self, rng):
        y = rng.normal(5, 1, 40)
        fit = fit_arima(y, order=(0, 0, 0))
        assert forecast_arima(fit, y).mean == pytest.approx(fit.intercept, abs=1e-12)

    def test_sd_is_root_sigma2(self):
        y = ar1(0.4, 80, 2)
        fit = fit_arima(y, order=(1, 0, 0))
        assert forecast_arima(fit, y).sd == np.sqrt(fit.sigma2)

    def test_random_walk_with_d1(self):
        y = np.cumsum(np.random.default_rng(3).normal(size=60))
        fit = fit_arima(y, order=(0, 1, 0))
        assert forecast_arima(fit, y).mean == pytest.approx(y[-1], abs=1e-12)

    def test_equation_form_hand_recursion(self, rng):
        x = rng.normal(size=80)
        y = 2 + x + ar1(0.5, 80, 4)
        fit = fit_arima(y, x, (1, 0, 0), xreg="equation")
        hand = fit.intercept + fit.beta[0] * 0.2 + fit.phi[0] * y[-1]
        assert forecast_arima(fit, y, x, [0.2]).mean == pytest.approx(hand, abs=1e-9)

    def test_column_mismatch(self, rng):
        x = rng.normal(size=50)
        y = rng.normal(size=50)
        fit = fit_arima(y, x, (0, 0, 0))
        with pytest.raises(SchemaError):
            forecast_arima(fit, y, x, [1.0, 2.0])
        with pytest.raises(SchemaError):
            forecast_arima(fit, y, np.column_stack([x, x]), [1.0])

    def test_history_rows_beyond_training_ignored(self, rng):
        """Fitting on a prefix and forecasting from it never reads later rows."""
        x = rng.normal(size=70)
        y = x + rng.normal(size=70)
        fit = fit_arima(y[:50], x[:50], (1, 0, 0))
        a = forecast_arima(fit, y[:50], x[:50], x[50])
        y2 = y.copy()
        y2[50:] = 1e6
        b = forecast_arima(fit, y2[:50], x[:50], x[50])
        assert a == b


class TestSelection:
    def test_too_short(self):
        with pytest.raises(PreconditionError):
            select_arima_order(np.random.default_rng(0).normal(size=10))

    def test_white_noise_picks_000(self):
        # n = 40 matches the length of the training series in the application
        hits = sum(select_arima_order(np.random.default_rng(s).normal(size=40)).tuple == (0, 0, 0)
                   for s in range(100))
        assert hits >= 80

    def test_random_walk_differenced(self):
        hits = sum(select_differencing(np.cumsum(np.random.default_rng(500 + s).normal(size=200))) >= 1
                   for s in range(100))
        assert hits >= 90

    def test_selected_fit_has_no_near_unit_roots(self):
        y = arma([0.6], [], 80, seed=11)
        order, table = select_arima_order(y, return_table=True)
        assert order.d == 0
        assert np.isfinite(table[(order.p, order.q)])
        assert not near_unit_root(fit_arima(y, order=order))

    def test_stepwise_table_contains_starting_models(self):
        _, table = select_arima_order(np.random.default_rng(1).normal(size=40), return_table=True)
        assert {(2, 2), (0, 0), (1, 0), (0, 1)} <= set(table)

    def test_fallback_when_everything_fails(self, monkeypatch):
        import hurricast.arima as A

        def boom(*a, **k):
            raise EstimationError("nope")

        monkeypatch.setattr(A, "fit_arima", boom)
        order = A.select_arima_order(np.random.default_rng(2).normal(size=30))
        assert order.tuple == (0, 0, 0) and order.fallback

    def test_with_regressors(self, rng):
        x = rng.normal(size=40)
        y = 5 + 2 * x + rng.normal(size=40)
        order = select_arima_order(y, x)
        assert order.d == 0
