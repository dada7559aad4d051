import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirac_riesz import (
    SingularCharacteristicMatrix,
    c_matrix,
    char_det,
    char_det_derivative,
    characteristic,
    constant_potential,
    m_matrix,
    nonnormal_potential,
    random_smooth_potential,
    s_matrix,
    trig_potential,
    verify_paley_wiener,
    zero_potential,
)
from dirac_riesz.characteristic import adjugate, evaluate, sinc


def const_closed_form(c, lam):
    """s, c for r = 1, q1 = q2 = c: omega = sqrt(lam^2 - c^2)."""
    w = np.sqrt(complex(lam) ** 2 - c**2)
    s = (lam - c) * np.sin(w) / w if w != 0 else lam - c
    return s, np.cos(w)


@pytest.mark.parametrize("r", [1, 2])
def test_free_examples(r):
    # global error of the local-error-controlled integrator is a few tol per unit |lam|
    Q, I = zero_potential(r), np.eye(r)
    assert np.allclose(s_matrix(Q, np.pi / 2), I, rtol=0, atol=1e-10)
    assert np.allclose(s_matrix(Q, 3 * np.pi), 0, rtol=0, atol=1e-9)
    assert np.allclose(c_matrix(Q, 0.0), I, rtol=0, atol=1e-14)
    assert np.allclose(c_matrix(Q, np.pi / 2), 0, rtol=0, atol=1e-10)
    assert np.allclose(m_matrix(Q, np.pi / 2), 0, rtol=0, atol=1e-10)
    assert np.allclose(m_matrix(Q, np.pi / 4), -I, rtol=0, atol=1e-10)


@pytest.mark.parametrize("n", [-2, 0, 1, 5])
def test_m_is_singular_at_free_eigenvalues(n):
    with pytest.raises(SingularCharacteristicMatrix):
        m_matrix(zero_potential(1), np.pi * n)


@pytest.mark.parametrize("lam", [0.0, 1.0, 2.5 + 0.5j, -4 - 1j, 9.0])
def test_constant_potential_closed_form(lam):
    c = 1.0
    s_ref, c_ref = const_closed_form(c, lam)
    Q = constant_potential(c)
    assert s_matrix(Q, lam)[0, 0] == pytest.approx(s_ref, abs=1e-9)
    assert c_matrix(Q, lam)[0, 0] == pytest.approx(c_ref, abs=1e-9)


def test_constant_potential_frozen_value_at_zero():
    # s(0) = -c sin(i c)/(i c) = -sinh(1), c(0) = cosh(1) for c = 1
    Q = constant_potential(1.0)
    assert s_matrix(Q, 0.0)[0, 0] == pytest.approx(-1.1752011936438014, abs=1e-10)
    assert c_matrix(Q, 0.0)[0, 0] == pytest.approx(1.5430806348152437, abs=1e-10)


def test_free_r2_det_and_derivative():
    Q = zero_potential(2)
    for lam in (0.3, 1.7 + 0.4j, -2.2 - 0.8j):
        assert char_det(Q, lam) == pytest.approx(np.sin(lam) ** 2, abs=1e-9)
        assert char_det_derivative(Q, lam) == pytest.approx(2 * np.sin(lam) * np.cos(lam), abs=1e-9)
    assert char_det(zero_potential(1), np.pi / 2) == pytest.approx(1.0, abs=1e-10)
    assert char_det_derivative(zero_potential(1), np.pi / 2) == pytest.approx(0.0, abs=1e-10)


@given(seed=st.integers(0, 40), re=st.floats(-15, 15), im=st.floats(-1, 1))
def test_derivative_matches_central_difference(seed, re, im):
    Q = random_smooth_potential(r=2, seed=seed)
    lam = complex(re, im)
    h = 1e-5
    b = evaluate(Q, [lam - h, lam + h], tol=1e-12)
    fd = (b.det[1] - b.det[0]) / (2 * h)
    exact = char_det_derivative(Q, lam, tol=1e-12)
    assert abs(fd - exact) <= 1e-5 * max(1.0, abs(exact))


def test_det_is_determinant_of_s():
    Q = nonnormal_potential(r=2)
    smp = characteristic(Q, 1.1 + 0.2j)
    assert smp.det == pytest.approx(np.linalg.det(smp.s), rel=1e-14)
    assert not smp.singular and smp.s_inv_norm > 0


def test_adjugate_identity():
    rng = np.random.default_rng(3)
    for r in (1, 2, 3):
        m = rng.standard_normal((4, r, r)) + 1j * rng.standard_normal((4, r, r))
        lhs = adjugate(m) @ m
        rhs = np.linalg.det(m)[:, None, None] * np.eye(r)
        assert np.allclose(lhs, rhs)


def test_det_zeros_coincide_with_singular_flags():
    # shared sample set: r = 1 constant potential eigenvalues plus generic points
    c = 1.0
    eig = [c, np.hypot(np.pi, c), -np.hypot(2 * np.pi, c)]
    generic = [0.3 + 0.2j, 2.0, -5.0 + 0.5j]
    Q = constant_potential(c)
    for lam in eig + generic:
        smp = characteristic(Q, lam)
        is_zero = abs(smp.det) < 1e-8 * max(1.0, abs(smp.det_prime))
        assert is_zero == smp.singular
        assert is_zero == (lam in eig)


def test_sinc():
    assert sinc(0.0) == 1.0
    assert sinc(np.pi) == pytest.approx(0.0, abs=1e-16)
    assert sinc(1j) == pytest.approx(np.sinh(1.0))


def test_paley_wiener_free_is_zero():
    rep = verify_paley_wiener(zero_potential(2), 16)
    # samples reach |lam| = 16 pi, where integration error is about 1e-9
    assert np.max(np.abs(rep.f1_hat)) < 1e-8 and np.max(np.abs(rep.f2_hat)) < 1e-8
    assert rep.off_grid_residual < 1e-8


def test_paley_wiener_needs_K_at_least_8():
    with pytest.raises(ValueError):
        verify_paley_wiener(zero_potential(1), 7)


@pytest.mark.parametrize("Q", [constant_potential(1.0), trig_potential(), nonnormal_potential(r=2)],
                         ids=["const", "trig", "nonnormal"])
def test_paley_wiener_coefficients_are_square_summable(Q):
    e64 = sum(verify_paley_wiener(Q, 64).energy())
    e128 = sum(verify_paley_wiener(Q, 128).energy())
    assert e128 >= e64
    assert (e128 - e64) < 0.05 * e64


def test_paley_wiener_residual_decreases_for_constant_potential():
    Q = constant_potential(1.0)
    res = [verify_paley_wiener(Q, K).off_grid_residual for K in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(res, res[1:]))
