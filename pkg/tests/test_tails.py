import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsdlab import model, tails
from qsdlab.errors import (
    ClassificationRefusedError,
    IndeterminateRateError,
    NotSmoothlyVaryingError,
    ParameterDomainError,
    RegimeError,
)


# stub measures exposing only a log_tail, to force the numeric paths
class _LogTailOnly(model.InitialMeasure):
    name = "stub"

    def __init__(self, log_tail_fn, **meta):
        self._lt = log_tail_fn
        for k, v in meta.items():
            setattr(self, k, v)

    def log_tail(self, x):
        return self._lt(np.asarray(x, dtype=float))

    def tail(self, x):
        return np.exp(self.log_tail(x))


# --- exp_rate --------------------------------------------------------------

def test_exp_rate_analytic_examples():
    assert tails.exp_rate(model.Exponential(0.5)) == (0.5, 0.5)
    assert tails.exp_rate(model.HalfNormal(1.0)) == (np.inf, np.inf)
    assert tails.exp_rate(model.Pareto(1.0, 1.0)) == (0.0, 0.0)
    assert tails.exp_rate(model.Dirac(1.0)) == (np.inf, np.inf)


def test_exp_rate_numeric_exponential():
    mu = _LogTailOnly(lambda x: -0.7 * x)
    lo, hi = tails.exp_rate(mu)
    assert lo == pytest.approx(0.7, rel=1e-9)
    assert hi == pytest.approx(0.7, rel=1e-9)


def test_exp_rate_numeric_blowup_is_infinite():
    # -ln tail / x = x grows without bound: a clean infinite rate
    mu = _LogTailOnly(lambda x: -x * x)
    assert tails.exp_rate(mu) == (np.inf, np.inf)


def test_exp_rate_numeric_underflowed_window_is_infinite():
    # tail identically zero past a point: the whole window is +inf
    mu = _LogTailOnly(lambda x: np.where(x < 5.0, -x, -np.inf))
    assert tails.exp_rate(mu) == (np.inf, np.inf)


def test_exp_rate_oscillating_tail_is_indeterminate():
    mu = _LogTailOnly(lambda x: -x * (1.25 + 0.75 * np.sin(np.log(x))))
    with pytest.raises(IndeterminateRateError):
        tails.exp_rate(mu)


# --- sv_index ---------------------------------------------------------------

def test_sv_index_analytic_examples():
    assert tails.sv_index(model.Weibull(1.0, 0.3)) == 0.3
    assert tails.sv_index(model.HalfCauchy(1.0)) == 0.0
    assert tails.sv_index(model.HalfNormal(1.0)) == 2.0


def test_sv_index_numeric_power():
    mu = _LogTailOnly(lambda x: -(x**0.3))
    assert tails.sv_index(mu) == pytest.approx(0.3, abs=1e-6)


def test_sv_index_nonmonotone_F_refused():
    mu = _LogTailOnly(lambda x: -(x**0.3) * (1.0 + 0.5 * np.sin(np.log(x))))
    with pytest.raises(NotSmoothlyVaryingError):
        tails.sv_index(mu)


# --- classify ----------------------------------------------------------------

def test_classify_examples():
    p = tails.classify(model.Exponential(2.0), 1.0)
    assert p.regime == "AttractedTo" and p.gamma == 0.0
    p = tails.classify(model.Exponential(0.5), 1.0)
    assert p.regime == "AttractedTo" and p.gamma == pytest.approx(0.5)
    assert p.describe() == "AttractedTo(0.5)"
    p = tails.classify(model.Weibull(1.0, 0.7), 1.0)
    assert p.regime == "Unknown"
    assert p.describe() == "Unknown"


def test_classify_critical_equality_routes_to_zero():
    # rho exactly alpha still yields the minimal law
    p = tails.classify(model.Exponential(1.0), 1.0)
    assert p.regime == "AttractedTo" and p.gamma == 0.0


def test_classify_heavy_regimes():
    p = tails.classify(model.Weibull(1.0, 0.3), 1.0)
    assert p.regime == "HeavyScaled" and p.law.family == "Exponential"
    assert p.rule.kind == "power"
    p = tails.classify(model.Pareto(1.0, 1.0), 1.0)
    assert p.law.family == "Lomax" and p.rule.kind == "linear"
    assert p.kappa == pytest.approx(1.0)
    p = tails.classify(model.LogTail(), 1.0)
    assert p.law.family == "ParetoLog" and p.rule.kind == "logpower"


def test_classify_refuses_on_indeterminate_rate_straddling_alpha():
    mu = _LogTailOnly(lambda x: -x, rho_liminf=0.5, rho_limsup=2.0)
    with pytest.raises(ClassificationRefusedError):
        tails.classify(mu, 1.0)


def test_classify_scale_consistency():
    for alpha in (0.5, 1.0, 2.0):
        for rho in (0.1, 0.4, 1.5, 3.0):
            p = tails.classify(model.Exponential(rho), alpha)
            assert p.regime == "AttractedTo"
            assert p.gamma == pytest.approx(max(alpha - rho, 0.0))


def test_classify_domain_error():
    with pytest.raises(ParameterDomainError):
        tails.classify(model.Exponential(1.0), 0.0)


# --- scaling rules -------------------------------------------------------------

def test_scaling_rule_power_arithmetic():
    rule = tails.ScalingRule.power(lambda x: 0.5 * x**-0.5, 1.0)
    assert rule.evaluate(100.0, 1.0) == pytest.approx(20.0, rel=1e-12)


def test_scaling_rule_linear_and_logpower():
    assert tails.scaling_rule(model.HalfCauchy(1.0), 1.0).evaluate(50.0, 2.0) == 100.0
    got = tails.scaling_rule(model.LogTail(), 1.0).evaluate(np.exp(10.0), 1.5)
    assert got == pytest.approx(np.exp(15.0), rel=1e-10)


def test_scaling_rule_increasing_in_c():
    for mu in (model.Weibull(1.0, 0.3), model.Pareto(1.0, 1.0), model.LogTail()):
        rule = tails.scaling_rule(mu, 1.0)
        cs = np.linspace(0.2, 5.0, 25)
        vals = [rule.evaluate(37.0, c) for c in cs]
        assert all(a < b for a, b in zip(vals, vals[1:]))


def test_scaling_rule_regime_error():
    with pytest.raises(RegimeError):
        tails.scaling_rule(model.Exponential(0.5), 1.0)
    with pytest.raises(RegimeError):
        tails.scaling_rule(model.Weibull(1.0, 0.7), 1.0)


def test_scaling_rule_domain_errors():
    rule = tails.ScalingRule.linear()
    with pytest.raises(ParameterDomainError):
        rule.evaluate(0.0, 1.0)
    with pytest.raises(ParameterDomainError):
        rule.evaluate(1.0, -1.0)


def test_scaling_rule_matches_defining_property():
    # |F(alpha t + R(t,c)) - F(alpha t) - c| -> 0 along a dyadic t grid
    mu = model.Weibull(1.0, 0.3)
    rule = tails.scaling_rule(mu, 1.0)
    F = lambda x: -float(mu.log_tail(x))
    for c in (0.5, 1.0, 2.0):
        devs = [
            abs(F(t + rule.evaluate(t, c)) - F(t) - c)
            for t in 2.0 ** np.arange(10, 61, 10)  # deviation decays like t^{-0.3}
        ]
        assert all(a > b for a, b in zip(devs, devs[1:]))
        assert devs[-1] < 1e-3


# --- limit laws -----------------------------------------------------------------

def test_limit_law_values():
    law = tails.limit_law(model.Weibull(1.0, 0.3), 1.0)
    assert law.tail_function(1.0) == pytest.approx(np.exp(-0.3), rel=1e-9)
    law = tails.limit_law(model.HalfCauchy(1.0), 1.0)
    assert law.tail_function(1.0) == pytest.approx(0.5, rel=1e-12)
    law = tails.limit_law(model.LogTail(), 1.0)
    assert law.tail_function(2.0) == pytest.approx(0.5)
    assert law.tail_function(0.5) == 1.0


def test_limit_law_tail_function_shape():
    for mu in (model.Weibull(1.0, 0.3), model.Pareto(1.0, 1.0), model.HalfCauchy(1.0)):
        law = tails.limit_law(mu, 1.0)
        cs = np.linspace(1e-9, 50.0, 400)
        vals = law.tail_function(cs)
        assert np.all(np.diff(vals) <= 1e-15)
        assert np.all((vals >= 0) & (vals <= 1))
        assert law.tail_function(1e-12) == pytest.approx(1.0, abs=1e-9)
        assert law.tail_function(1e6) < 1e-4
    # the log-tail law plateaus at 1 on c <= 1 instead of tending to 1 only at 0
    law = tails.limit_law(model.LogTail(), 1.0)
    assert np.all(law.tail_function(np.linspace(0.01, 1.0, 50)) == 1.0)


def test_limit_law_scale_matches_rule_normalization():
    law = tails.limit_law(model.Pareto(1.0, 1.0), 1.0)
    assert law.scale(50.0, 2.0) == 100.0
    law = tails.limit_law(model.LogTail(), 1.0)
    assert law.scale(np.e**10, 1.5) == pytest.approx(np.e**15, rel=1e-10)
    law = tails.limit_law(model.Weibull(1.0, 0.3), 1.0)
    assert law.scale(100.0, 1.0) == pytest.approx(100.0**0.7, rel=1e-9)


def test_limit_law_drift_independence_of_logtail():
    cs = np.linspace(0.1, 10.0, 100)
    base = tails.limit_law(model.LogTail(), 0.5).tail_function(cs)
    for alpha in (1.0, 2.0):
        law = tails.limit_law(model.LogTail(), alpha)
        assert np.array_equal(law.tail_function(cs), base)
        assert law.family == "ParetoLog"


def test_limit_law_regime_error():
    with pytest.raises(RegimeError):
        tails.limit_law(model.HalfNormal(1.0), 1.0)


@given(st.floats(0.2, 3.0), st.floats(0.2, 3.0))
@settings(max_examples=40, deadline=None)
def test_lomax_law_nonincreasing_property(kappa, alpha):
    law = tails.lomax_law(kappa, alpha)
    cs = np.sort(np.linspace(0.0, 20.0, 64))
    vals = law.tail_function(cs)
    assert np.all(np.diff(vals) <= 1e-15)
    assert vals[0] == 1.0


# --- joint tail prediction --------------------------------------------------------

def test_joint_tail_prediction_pareto_value():
    got = tails.joint_tail_prediction(model.Pareto(1.0, 1.0), 100.0, 100.0, 1.0)
    assert got == pytest.approx(0.005, rel=1e-14)


def test_joint_tail_prediction_vs_quadrature():
    from qsdlab import kernel

    mu = model.Weibull(1.0, 0.3)
    t, a = 100.0, 100.0**0.7
    pred = tails.joint_tail_prediction(mu, t, a, 1.0)
    truth = kernel.joint_tail(mu, t, a, 1.0).value
    assert 0.8 < pred / truth < 1.25


def test_joint_tail_prediction_lomax_ratio_structure():
    mu = model.HalfCauchy(1.0)
    t, c = 1e8, 2.0
    ratio = tails.joint_tail_prediction(mu, t, c * t, 1.0) / float(mu.tail(t))
    assert ratio == pytest.approx(1.0 / (1.0 + c), rel=1e-6)


def test_joint_tail_prediction_domain_errors():
    with pytest.raises(ParameterDomainError):
        tails.joint_tail_prediction(model.Pareto(1.0, 1.0), 0.0, 1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        tails.joint_tail_prediction(model.Pareto(1.0, 1.0), 1.0, -1.0, 1.0)
