import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqtune.adam import AdamConfig, AdamOptimizer, AdamState, adam_step
from seqtune.errors import ContractViolation, NumericError, ValidationError


def fresh(var):
    return AdamState.for_variable(var)


def test_zero_gradient_leaves_variable_unchanged():
    var = np.array([1.0, -2.0, 3.0])
    new, state = adam_step(fresh(var), AdamConfig(), var, np.zeros(3))
    assert np.array_equal(new, var)
    assert state.t == 1


def test_first_step_is_signed_rate():
    cfg = AdamConfig(rate=0.001)
    for g in (1e-6, 0.5, 4.0, 1e4):
        grad = np.array([g, -g])
        new, _ = adam_step(fresh(grad), cfg, np.zeros(2), grad)
        # bias correction makes m_hat / sqrt(v_hat) = sign(g) at t = 1,
        # up to the eps guard which bites for tiny gradients
        assert new[0] == pytest.approx(-cfg.rate, rel=0.02)
        assert new[1] == pytest.approx(cfg.rate, rel=0.02)


def test_default_training_configuration_accepted():
    cfg = AdamConfig()
    assert (cfg.rate, cfg.beta1, cfg.beta2) == (0.001, 0.9, 0.999)


def test_config_validation():
    with pytest.raises(ValidationError):
        AdamConfig(rate=0.0)
    with pytest.raises(ValidationError):
        AdamConfig(beta1=1.0)
    with pytest.raises(ValidationError):
        AdamConfig(beta2=-0.1)


def test_shape_mismatch_and_nonfinite_grad_rejected():
    var = np.zeros(3)
    with pytest.raises(ContractViolation):
        adam_step(fresh(var), AdamConfig(), var, np.zeros(4))
    with pytest.raises(NumericError):
        adam_step(fresh(var), AdamConfig(), var, np.array([1.0, np.nan, 0.0]))


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False), min_size=1, max_size=8),
       st.floats(min_value=1e-5, max_value=0.1))
@settings(max_examples=100, deadline=None)
def test_first_step_magnitude_bounded_by_rate(grad_values, rate):
    grad = np.array(grad_values)
    cfg = AdamConfig(rate=rate)
    new, _ = adam_step(fresh(grad), cfg, np.zeros_like(grad), grad)
    assert np.all(np.abs(new) <= rate * (1.0 + 1e-9))


@given(st.floats(min_value=1.0, max_value=1e3),
       st.floats(min_value=0.1, max_value=100.0))
@settings(max_examples=50, deadline=None)
def test_first_step_invariant_under_gradient_scaling(g, scale):
    # exact up to the eps guard, so keep gradients well above eps
    cfg = AdamConfig()
    grad = np.array([g])
    a, _ = adam_step(fresh(grad), cfg, np.zeros(1), grad)
    b, _ = adam_step(fresh(grad), cfg, np.zeros(1), grad * scale)
    assert a[0] == pytest.approx(b[0], rel=1e-6)


def test_quadratic_descent():
    # convex quadratic in 10 dims: 500 steps at rate 0.01 cut >= 99%
    rng = np.random.default_rng(0)
    scales = rng.uniform(0.5, 5.0, 10)
    x = rng.normal(0, 2, 10)
    f0 = float(np.sum(scales * x ** 2))
    state = fresh(x)
    cfg = AdamConfig(rate=0.01)
    for _ in range(500):
        x, state = adam_step(state, cfg, x, 2.0 * scales * x)
    assert np.sum(scales * x ** 2) <= 0.01 * f0


def test_optimizer_wrapper_tracks_named_variables():
    cfg = AdamConfig(rate=0.1)
    variables = {"a": np.ones(2), "b": np.zeros(3)}
    opt = AdamOptimizer(cfg, variables)
    out = opt.step(variables, {"a": np.ones(2), "b": np.zeros(3)})
    assert out["a"][0] == pytest.approx(0.9, rel=1e-6)
    assert np.array_equal(out["b"], np.zeros(3))
    assert opt.states["a"].t == 1
