import math

import numpy as np
import pytest
from scipy.integrate import quad

from spikectl.model import FlowState, builtin_model, flow, flow_step, piecewise_linear_model, reset
from spikectl.prior import make_atomic_prior, uniform_prior


def ou_closed_form(y0, c, t):
    return c + (y0 - c) * math.exp(-t)


def test_reset_examples():
    s = FlowState(1.0, 2.3, 0.7)
    assert reset(s) == FlowState(1.0, 0.0, 0.7)
    assert reset(reset(s)) == reset(s)


def test_builtin_shapes():
    m = builtin_model("ou_exp")
    assert m.g(np.array([1.0]))[0] == pytest.approx(1.0)
    assert m.g(np.array([10.0]))[0] == pytest.approx(math.e ** 2)
    assert m.g_max == pytest.approx(math.e ** 2)
    s = builtin_model("ou_sigmoid")
    assert s.g(np.array([1.0]))[0] == pytest.approx(0.5)
    assert s.g(np.array([0.9]))[0] == pytest.approx(1 / (1 + math.exp(10)))
    c = builtin_model("const_unit")
    np.testing.assert_array_equal(c.g(np.array([-1.0, 5.0])), [1.0, 1.0])
    np.testing.assert_array_equal(c.b(np.array([-1.0, 5.0])), [0.0, 0.0])
    with pytest.raises(ValueError):
        builtin_model("nope")


def test_custom_cap():
    m = builtin_model("ou_exp", intensity_cap=3.0)
    assert m.g_max == pytest.approx(3.0)
    assert np.max(m.g(np.linspace(-5, 5, 101))) <= 3.0 + 1e-12


def _flow_error(dt):
    m = builtin_model("ou_exp")
    s = flow(m, FlowState(0.0, 0.2, 0.0), 0.8, 1.0, dt)
    y_ex = ou_closed_form(0.2, 0.8, 1.0)
    z_ex = quad(lambda u: math.exp(2 * (ou_closed_form(0.2, 0.8, u) - 1)), 0, 1, epsabs=1e-15)[0]
    return abs(s.y - y_ex), abs(s.z - z_ex)


def test_rk4_order():
    e1, e2 = _flow_error(0.1), _flow_error(0.05)
    assert e1[0] / e2[0] >= 12
    assert e1[1] / e2[1] >= 12


def test_z_nondecreasing():
    m = builtin_model("ou_sigmoid")
    s = FlowState(0.0, -0.5, 0.0)
    zs = []
    for k in range(200):
        s = flow_step(m, s, 2.0 * math.sin(k / 7), 0.01)
        zs.append(s.z)
    assert np.all(np.diff(zs) >= 0)


def test_flow_step_validation():
    m = builtin_model("const_unit")
    with pytest.raises(ValueError):
        flow_step(m, FlowState(0, 0, 0), 0.0, 0.0)
    with pytest.raises(ValueError):
        flow_step(m, FlowState(0, float("nan"), 0), 0.0, 0.1)


@pytest.mark.parametrize("name", ["ou_exp", "ou_sigmoid", "const_unit"])
def test_intensity_cap(name):
    m = builtin_model(name)
    ys = np.linspace(-10, 10, 2001)
    for pr in (make_atomic_prior([(0, 1), (0.25, 2), (0.5, 4), (0.75, 2), (1, 1)]), uniform_prior(0, 2)):
        lam = pr.lambdas[:, None]
        assert np.all(lam * m.g(ys)[None, :] <= pr.lambda_max * m.g_max + 1e-12)


def test_piecewise_linear_table():
    m = piecewise_linear_model([[0, 0.0], [1, 2.0], [2, 1.0]])
    np.testing.assert_allclose(m.g(np.array([-1, 0.5, 1.5, 3])), [0.0, 1.0, 1.5, 1.0])
    assert m.g_max == pytest.approx(2.0)
    with pytest.raises(ValueError):
        piecewise_linear_model([[0, -1.0], [1, 1.0]])
