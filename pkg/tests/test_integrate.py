import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirac_riesz.integrate import IntegrationError, integrate


@given(re=st.floats(-20, 20), im=st.floats(-2, 2))
def test_scalar_exponential(re, im):
    lam = complex(re, im)
    x = np.linspace(0, 1, 17)
    ys, err = integrate(lambda t, y: 1j * lam * y, np.ones((1, 1, 1)), x, 1e-11)
    exact = np.exp(1j * lam * x)
    assert np.max(np.abs(ys[:, 0, 0, 0] - exact) / np.abs(exact)) < 1e-9
    assert err >= 0


def test_batch_members_share_steps_but_stay_independent():
    lams = np.array([1.0, 5.0, 20.0 + 0.5j])
    y0 = np.ones((3, 1, 1), dtype=complex)
    x = np.linspace(0, 1, 9)
    ys, _ = integrate(lambda t, y: 1j * lams[:, None, None] * y, y0, x, 1e-11, batch_ndim=1)
    assert np.allclose(ys[:, :, 0, 0], np.exp(1j * np.outer(x, lams)), rtol=1e-9, atol=0)


def test_stops_resolve_a_kink():
    # y' = |x - 1/3| y has a kinked coefficient; landing on the kink keeps full accuracy
    def rhs(t, y):
        return abs(t - 1 / 3) * y

    x = np.array([0.0, 1.0])
    ys, _ = integrate(rhs, np.ones((1, 1)), x, 1e-12, stops=[1 / 3])
    exact = np.exp((1 / 3) ** 2 / 2 + (2 / 3) ** 2 / 2)
    assert abs(ys[-1, 0, 0] - exact) < 1e-11


def test_rejects_bad_nodes():
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, np.ones((1, 1)), [0.0, 0.5, 0.5], 1e-8)


def test_non_finite_values_raise():
    with pytest.raises(IntegrationError):
        integrate(lambda t, y: np.full_like(y, np.nan), np.ones((1, 1)), [0.0, 1.0], 1e-8)


def test_step_budget():
    with pytest.raises(IntegrationError, match="maximum number of steps"):
        integrate(lambda t, y: 1j * 400 * y, np.ones((1, 1)), [0.0, 1.0], 1e-12, max_steps=5)
