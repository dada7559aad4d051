import math

import numpy as np
import pytest

from dirac_riesz import (
    constant_potential,
    free_projector_kernel,
    nonnormal_potential,
    trig_potential,
    zero_potential,
)
from dirac_riesz.oracle import (
    compare,
    discretize_operator,
    oracle_spectrum,
    oracle_strip,
    pair_eigenvalues,
)


def const_eig(n, c=1.0):
    """Strip-n eigenvalue of q1 = q2 = c (r = 1)."""
    if n == 0:
        return complex(c)
    return math.copysign(1, n) * math.sqrt(math.pi**2 * n**2 + c**2)


@pytest.mark.parametrize("r", [1, 2])
def test_free_eigenvalues(r):
    D = discretize_operator(zero_potential(r), 512)
    assert D.size == 2 * r * 512
    for n in range(-3, 4):
        lam = oracle_spectrum(D, n).eigenvalues
        assert lam.size == r
        assert np.max(np.abs(lam - math.pi * n)) < 1e-3
    # the extrapolated oracle meets 1e-3 on the 11 smallest eigenvalues
    for n in range(-5, 6):
        lam = oracle_strip(zero_potential(r), n, 512, projector=False).eigenvalues
        assert lam.size == r
        assert np.max(np.abs(lam - math.pi * n)) < 1e-5


def test_node_values_respect_boundary_conditions():
    D = discretize_operator(trig_potential(r=2), 64)
    z = np.arange(D.size) + 1j
    y = D.node_values(z)
    assert y.shape == (65, 4)
    assert np.array_equal(y[0, :2], y[0, 2:]) and np.array_equal(y[-1, :2], y[-1, 2:])


def test_free_pencil_decouples_components():
    # with Q = 0 the copies of C^2 in C^{2r} never couple
    D = discretize_operator(zero_potential(2), 64)
    A = D.A.tocoo()
    comp = lambda idx: np.where(idx < 2, idx, (idx - 2) % 4) % 2  # noqa: E731
    assert np.all(comp(A.row) == comp(A.col))


def test_free_eigenvalues_converge():
    errs = {}
    for m in (256, 512):
        D = discretize_operator(zero_potential(1), m)
        errs[m] = np.array([abs(oracle_spectrum(D, n).eigenvalues[0] - math.pi * n) for n in range(1, 11)])
    assert np.all(errs[512] < errs[256])


def test_zero_diagonal_blocks_stay_zero():
    # Q has vanishing diagonal blocks, so an equation of one half never sees
    # the other r - 1 components of its own half
    r = 2
    D = discretize_operator(nonnormal_potential(r), 64)
    A = D.A.tocoo()
    interior = (A.col >= r) & (A.col < D.size - r)
    row_half, row_idx = (A.row % (2 * r)) // r, A.row % r
    c = A.col - r
    col_half, col_idx = (c % (2 * r)) // r, c % r
    same_half = interior & (row_half == col_half)
    assert np.all(row_idx[same_half] == col_idx[same_half])
    # and the off-diagonal blocks are really populated
    assert np.any(interior & (row_half != col_half) & (row_idx != col_idx))


@pytest.mark.parametrize("n", [2, -3])
def test_richardson_error_drops(n):
    # strip 0 is exact for the box scheme (constant eigenfunction), so use higher strips
    Q = constant_potential(1.0)
    errs = []
    raw = []
    for m in (128, 256, 512):
        ext = oracle_strip(Q, n, m, projector=False)
        errs.append(abs(ext.eigenvalues[0] - const_eig(n)))
        raw.append(abs(ext.fine.eigenvalues[0] - const_eig(n)))
    # second-order raw scheme, fourth order after one Richardson step
    assert raw[0] / raw[1] > 3.5 and raw[1] / raw[2] > 3.5
    assert errs[0] / errs[1] >= 8 and errs[1] / errs[2] >= 8
    assert errs[2] < 1e-6


@pytest.mark.parametrize("r", [1, 2])
def test_projector_against_free(r):
    ext = oracle_strip(zero_potential(r), 1, 512)
    P0 = free_projector_kernel(1, ext.x, r)
    assert np.max(np.abs(ext.kernel - P0.matrix)) < 1e-3
    fine = ext.fine
    assert fine.idempotency() < 1e-8
    assert np.max(np.abs(fine.gram - np.eye(r))) < 1e-10


def test_compare_nonnormal_and_convergence():
    Q = nonnormal_potential(2)
    reps = [compare(Q, 0, m) for m in (256, 512)]
    for rep in reps:
        assert rep.counts_match
        assert rep.eigenvalue_deviation < 1e-3
        assert rep.kernel_deviation < 1e-3
    assert reps[1].eigenvalue_deviation < reps[0].eigenvalue_deviation
    assert reps[1].kernel_deviation < reps[0].kernel_deviation


def test_compare_eigenvalues_only():
    rep = compare(trig_potential(), 2, 256, projector=False)
    assert rep.kernel_deviation is None
    assert rep.counts_match and rep.eigenvalue_deviation < 1e-4


def test_pairing_is_optimal():
    a = np.array([0, 1, 2 + 1j])
    b = np.array([2 + 1.1j, 0.1, 0.9])
    i, j = pair_eigenvalues(a, b)
    assert np.max(np.abs(a[i] - b[j])) < 0.15


@pytest.mark.parametrize("m", [32, 63])
def test_discretize_rejects_small_m(m):
    with pytest.raises(ValueError):
        discretize_operator(zero_potential(1), m)


@pytest.mark.parametrize("m", [100, 129])
def test_oracle_strip_rejects_bad_m(m):
    with pytest.raises(ValueError):
        oracle_strip(zero_potential(1), 0, m)
