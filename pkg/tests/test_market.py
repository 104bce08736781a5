import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insiderdrift.errors import InvalidConfiguration, InvalidInput
from insiderdrift.market import (AdmissibilityConfig, MarketCoefficients, PiecewiseConstant,
                                 check_strategy_admissible, validate_coefficients)


def test_piecewise_left_and_right_values():
    f = PiecewiseConstant((2.0, 1.0), (0.5,))
    assert f(0.5) == 2.0 and f.right(0.5) == 1.0
    assert f(0.25) == 2.0 and f(0.75) == 1.0
    np.testing.assert_array_equal(f(np.array([0.0, 0.5, 0.6])), [2.0, 2.0, 1.0])


def test_piecewise_integral_exact():
    f = PiecewiseConstant((2.0, 1.0), (0.5,))
    assert f.antiderivative(1.0) == pytest.approx(1.5, abs=1e-15)
    assert f.integral(0.25, 0.75) == pytest.approx(0.75, abs=1e-15)


@given(st.lists(st.floats(0.1, 5.0), min_size=1, max_size=5), st.floats(0.0, 3.0))
def test_inverse_antiderivative_roundtrip(values, y):
    breaks = tuple(np.cumsum(np.full(len(values) - 1, 0.3)))
    f = PiecewiseConstant(tuple(values), breaks)
    t = f.inverse_antiderivative(y)
    assert f.antiderivative(t) == pytest.approx(y, abs=1e-12)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_integral_additive(a, b, c):
    s, m, t = sorted((a, b, c))
    f = PiecewiseConstant((1.5, 0.5, 3.0), (0.2, 0.7))
    assert f.integral(s, t) == pytest.approx(f.integral(s, m) + f.integral(m, t), abs=1e-12)


def test_is_constant_on():
    f = PiecewiseConstant((2.0, 1.0), (0.5,))
    assert f.is_constant_on(0.5, 1.0)
    assert f.is_constant_on(0.0, 0.5)
    assert not f.is_constant_on(0.4, 1.0)


def test_bad_breaks_rejected():
    with pytest.raises(InvalidConfiguration):
        PiecewiseConstant((1.0, 2.0), (0.5, 0.4))
    with pytest.raises(InvalidConfiguration):
        PiecewiseConstant((1.0,), (0.5,))


def test_validate_clean_market(pure_jump, mixed):
    assert validate_coefficients(pure_jump) == []
    assert validate_coefficients(mixed) == []


def test_validate_reports_conditions():
    bad = MarketCoefficients.constant(mu=-0.05, theta=-0.5, lam=2.0)
    assert [v.condition for v in validate_coefficients(bad)] == ["hyp4"]
    bad = MarketCoefficients.constant(theta=-1.5, lam=-1.0, mu=0.1)
    names = {v.condition for v in validate_coefficients(bad)}
    assert {"hyp1", "lambda_positive"} <= names


def test_validate_first_violation_time():
    mu = PiecewiseConstant((-0.05, 0.05), (0.5,))
    report = validate_coefficients(MarketCoefficients(0.0, mu, 0.0, 1.0, 1.0, 1.0))
    assert report[0].condition == "hyp4" and report[0].time > 0.5


def test_hyp4_not_applied_with_diffusion(mixed):
    # the mixed scenarios have (mu - rho)/theta > 0 and must still validate
    assert validate_coefficients(mixed) == []


def test_validate_horizon():
    with pytest.raises(InvalidConfiguration):
        validate_coefficients(MarketCoefficients.constant(horizon=0.0))


def test_admissibility():
    ok = check_strategy_admissible([0.5, -0.5], [1.0, 1.0])
    assert ok.admissible and ok.first_violation is None
    bad = check_strategy_admissible([0.5, -1.0, -2.0], [1.0, 1.0, 1.0], AdmissibilityConfig(1e-6))
    assert not bad.admissible and bad.first_violation == 1
    with pytest.raises(InvalidInput):
        check_strategy_admissible([0.5], [1.0, 1.0])
    with pytest.raises(InvalidConfiguration):
        AdmissibilityConfig(epsilon_adm=0.0)
