import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insiderdrift import strategy as sg
from insiderdrift.errors import InvalidInput, InvalidRegime, WealthRuin
from insiderdrift.market import MarketCoefficients, PiecewiseConstant
from insiderdrift.paths import GridSpec, simulate_path
from insiderdrift.verify import unit_jump_closed_form

from oracles import argmax_growth, discrete_compounding, growth_rate, quadratic_roots

M = MarketCoefficients.constant


def test_merton_examples():
    assert sg.merton_strategy(M(mu=0.04, sigma=0.2), 0.0) == pytest.approx(1.0, abs=1e-14)
    assert sg.merton_strategy(M(rho=0.03, mu=0.03, sigma=0.2), 0.0) == 0.0
    assert sg.merton_strategy(M(mu=0.03, sigma=0.1), 0.0) == pytest.approx(3.0, abs=1e-13)
    assert argmax_growth(0.0, 0.03, 0.1, 1e-9, 1e-12) == pytest.approx(3.0, abs=1e-5)
    with pytest.raises(InvalidRegime):
        sg.merton_strategy(M(mu=0.04), 0.0)


def test_pure_jump_uninformed_examples(pure_jump):
    pi = sg.pure_jump_uninformed(pure_jump, 0.0)
    assert pi == pytest.approx(-0.05 / 1.05, abs=1e-15)
    assert pi == pytest.approx(argmax_growth(0.0, -0.05, 0.0, 1.0, 1.0), abs=1e-7)
    assert sg.pure_jump_uninformed(M(rho=0.02, mu=0.02), 0.0) == 0.0
    with pytest.raises(InvalidRegime, match="hyp4"):
        sg.pure_jump_uninformed(M(mu=-0.05, theta=-0.5, lam=2.0), 0.0)
    with pytest.raises(InvalidRegime):
        sg.pure_jump_uninformed(M(mu=-0.05, sigma=0.2), 0.0)


def test_pure_jump_informed_examples(pure_jump):
    assert sg.pure_jump_informed(pure_jump, 0.0, 0.0) == sg.pure_jump_uninformed(pure_jump, 0.0)
    pi = sg.pure_jump_informed(pure_jump, 0.0, -1.0)
    assert pi == pytest.approx(-1.0, abs=1e-15)
    assert 1 + pi == pytest.approx(0.0, abs=1e-15)
    pi = sg.pure_jump_informed(pure_jump, 0.0, 1.0)
    assert pi == pytest.approx(0.9047619047619048, abs=1e-15)
    assert abs(sg.foc_residual(sg.coef_values(pure_jump, 0.0), pi, 0.0, 1.0)) <= 1e-12
    with pytest.raises(InvalidInput):
        sg.pure_jump_informed(pure_jump, 0.0, -1.5)


def test_mixed_examples(mixed):
    near = M(mu=0.04, sigma=0.2, theta=1e-6)
    assert abs(sg.mixed_informed(near, 0.0, 0.0, 0.0) - sg.merton_strategy(near, 0.0)) <= 1e-4
    c = M(mu=-0.05, sigma=0.2)
    pi = sg.mixed_informed(c, 0.0, 0.0, 0.0)
    roots = quadratic_roots(0.2, 1.0, -1.05, 1.0)
    assert pi == pytest.approx(roots[roots > -1][0], abs=1e-12)
    assert roots[roots < -1].size == 1
    assert abs(sg.foc_residual(sg.coef_values(c, 0.0), pi)) <= 1e-10
    assert sg.mixed_uninformed(mixed, 0.0) == pytest.approx(
        unit_jump_closed_form(sg.coef_values(mixed, 0.0)), abs=1e-12)
    assert sg.mixed_uninformed(mixed, 0.0) >= 0
    assert sg.mixed_uninformed(M(rho=0.03, mu=0.03, sigma=0.2), 0.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidRegime):
        sg.mixed_informed(M(mu=0.04, sigma=0.2, theta=0.0), 0.0, 0.0, 0.0)


def test_mixed_boundary_gamma():
    c = M(mu=0.04, sigma=0.2, theta=0.5)
    pi = sg.mixed_informed(c, 0.0, 0.0, -1.0)
    assert 1 + 0.5 * pi >= -1e-15
    negative = M(mu=0.04, sigma=0.2, theta=-0.5)
    pi = sg.mixed_informed(negative, 0.0, 0.3, -1.0)
    assert 1 - 0.5 * pi >= -1e-15


mixed_draws = st.tuples(
    st.floats(-0.2, 0.2), st.floats(-0.3, 0.3), st.floats(0.05, 1.0),
    st.floats(0.05, 2.0) | st.floats(-0.9, -0.05), st.floats(0.1, 5.0),
    st.floats(-2.0, 2.0), st.floats(-0.99, 5.0))


@settings(deadline=None, max_examples=300)
@given(mixed_draws)
def test_mixed_foc_and_optimality(draw):
    rho, excess, sigma, theta, lam, alpha, gamma = draw
    c = M(rho=rho, mu=rho + excess, sigma=sigma, theta=theta, lam=lam)
    v = sg.coef_values(c, 0.0)
    pi = sg.mixed_informed(c, 0.0, alpha, gamma)
    assert 1 + pi * theta > 0
    assert abs(sg.foc_residual(v, pi, alpha, gamma)) <= 1e-10
    base = growth_rate(pi, rho, excess, sigma, theta, lam, alpha, gamma)
    for h in (1e-4, -1e-4):
        if 1 + (pi + h) * theta > 0:
            assert growth_rate(pi + h, rho, excess, sigma, theta, lam, alpha, gamma) < base
    other = [r for r in quadratic_roots(sigma, theta, excess + alpha * sigma - lam * theta, lam * (1 + gamma))
             if abs(r - pi) > 1e-9 * max(1.0, abs(pi))]
    assert all(1 + r * theta < 0 for r in other)


@settings(deadline=None, max_examples=300)
@given(st.floats(0.01, 0.3), st.floats(0.05, 2.0), st.booleans(), st.floats(0.1, 5.0), st.floats(-0.99, 5.0))
def test_pure_jump_foc_and_optimality(size, theta_abs, negative, lam, gamma):
    theta = -theta_abs if negative else theta_abs
    excess = size if negative else -size
    c = M(mu=excess, theta=theta, lam=lam)
    pi = sg.pure_jump_informed(c, 0.0, gamma)
    assert 1 + pi * theta > 0
    assert abs(sg.foc_residual(sg.coef_values(c, 0.0), pi, 0.0, gamma)) <= 1e-12
    base = growth_rate(pi, 0.0, excess, 0.0, theta, lam, 0.0, gamma)
    for h in (1e-4, -1e-4):
        assert growth_rate(pi + h, 0.0, excess, 0.0, theta, lam, 0.0, gamma) < base


def test_informed_matches_numerical_argmax():
    pi = sg.mixed_informed(M(mu=0.05, sigma=0.3, theta=-0.4, lam=2.0), 0.0, 0.5, 0.7)
    assert pi == pytest.approx(argmax_growth(0.0, 0.05, 0.3, -0.4, 2.0, 0.5, 0.7), abs=1e-6)


def test_piecewise_coefficients_are_left_continuous():
    c = MarketCoefficients(0.0, PiecewiseConstant((0.04, 0.09), (0.5,)), 0.2, 1.0, 1.0, 1.0)
    assert sg.merton_strategy(c, 0.5) == pytest.approx(1.0)
    assert sg.merton_strategy(c, 0.50001) == pytest.approx(2.25)


# --- wealth ------------------------------------------------------------------

def series(path, pi, kind="custom"):
    return sg.StrategySeries(path.times, np.broadcast_to(np.asarray(pi, float), path.times.shape).copy(), kind)


def test_bond_only(mixed):
    c = M(rho=0.03, mu=0.04, sigma=0.2)
    path = simulate_path(c, GridSpec(50, 1.0), seed=1)
    w = sg.evolve_log_wealth(c, path, series(path, 0.0))
    assert w.log_x[0] == 0.0
    assert w.log_x[-1] == pytest.approx(0.03, abs=1e-15)


def test_full_investment_tracks_the_stock():
    c = M(rho=0.01, mu=0.06, sigma=0.25, theta=-0.3, lam=2.0)
    for i in range(5):
        path = simulate_path(c, GridSpec(100, 1.0), seed=2, index=i)
        log_s = ((0.06 - 0.5 * 0.25**2 - 2.0 * -0.3) * path.times + 0.25 * path.w + path.n * math.log(0.7))
        w = sg.evolve_log_wealth(c, path, series(path, 1.0))
        np.testing.assert_allclose(w.log_x, log_s, atol=1e-12)


def test_discrete_compounding_refinement():
    rho, mu, theta, lam = 0.2, -0.6, 1.0, 3.0
    c = M(rho=rho, mu=mu, theta=theta, lam=lam)
    errors = []
    for steps in (50, 100, 200):
        err = 0.0
        # averaged over paths: the jump-interval part depends on where jumps fall within a step
        for i in range(40):
            path = simulate_path(c, GridSpec(steps, 1.0), seed=11, index=i)
            pi = 0.4 + 0.3 * np.cos(5 * path.times)
            ours = sg.evolve_log_wealth(c, path, sg.StrategySeries(path.times, pi)).log_x[-1]
            err += abs(ours - discrete_compounding(path.times, path.n, pi, rho, mu, theta, lam))
        errors.append(err / 40)
    assert 1.6 < errors[0] / errors[1] < 2.4
    assert 1.6 < errors[1] / errors[2] < 2.4


def test_ruin_and_boundary(pure_jump):
    path = simulate_path(pure_jump, GridSpec(20, 1.0), seed=0)
    assert len(path.jump_times) > 0
    with pytest.raises(WealthRuin):
        sg.evolve_log_wealth(pure_jump, path, series(path, -1.0))
    quiet = next(simulate_path(pure_jump, GridSpec(20, 1.0), seed=0, index=i) for i in range(50)
                 if len(simulate_path(pure_jump, GridSpec(20, 1.0), seed=0, index=i).jump_times) == 0)
    w = sg.evolve_log_wealth(pure_jump, quiet, series(quiet, -1.0))
    assert np.all(np.isfinite(w.log_x))


def test_series_validation():
    with pytest.raises(InvalidInput):
        sg.StrategySeries(np.arange(3.0), np.zeros(2))
    with pytest.raises(InvalidInput):
        sg.StrategySeries(np.arange(3.0), np.zeros(3), kind="nope")


def test_csv_writers(mixed):
    path = simulate_path(mixed, GridSpec(4, 1.0), seed=0)
    s = series(path, 0.5, "constant")
    buf = io.StringIO()
    sg.write_strategy_csv(mixed, s, buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "time,pi,one_plus_pi_theta"
    assert len(rows) == len(path.times) + 1
    assert rows[1].split(",")[2] == "1.5"
    buf = io.StringIO()
    sg.write_wealth_csv(sg.evolve_log_wealth(mixed, path, s), buf)
    assert buf.getvalue().splitlines()[0] == "time,log_x"
