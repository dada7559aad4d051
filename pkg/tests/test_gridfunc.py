import numpy as np
import pytest

from dirac_riesz.gridfunc import GridFunction, cumulative_integral, derivative, quadrature_weights


def test_weights_integrate_cubics_exactly():
    x = np.linspace(0, 1, 9)
    w = quadrature_weights(x)
    for k in range(4):
        assert w @ x**k == pytest.approx(1 / (k + 1), abs=1e-14)


def test_cumulative_integral_matches_weights():
    x = np.linspace(0, 1, 33)
    f = np.exp(2 * x) * np.cos(5 * x)
    F = cumulative_integral(f, x)
    assert F[0] == 0
    assert F[-1] == pytest.approx(quadrature_weights(x) @ f, rel=1e-13)


@pytest.mark.parametrize("func, dfunc", [(np.sin, np.cos), (np.exp, np.exp)])
def test_derivative_is_fourth_order(func, dfunc):
    errs = []
    for n in (33, 65, 129):
        x = np.linspace(0, 1, n)
        errs.append(np.max(np.abs(derivative(func(3 * x), x) - 3 * dfunc(3 * x))))
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


def test_uniform_grid_required():
    with pytest.raises(ValueError):
        quadrature_weights(np.array([0.0, 0.1, 0.3, 0.6, 1.0]))
    with pytest.raises(ValueError):
        GridFunction(np.linspace(0, 1, 5), np.zeros((4, 2)))


def test_norm_and_inner_product():
    x = np.linspace(0, 1, 65)
    f = GridFunction(x, np.stack([np.ones_like(x), 1j * x], -1))
    assert f.norm() ** 2 == pytest.approx(1 + 1 / 3, rel=1e-13)
    assert f.inner(f) == pytest.approx(f.norm() ** 2)
    assert (2 * f - f).norm() == pytest.approx(f.norm())
