import math

import numpy as np
import pytest

from dirac_riesz import (
    ContourSpec,
    EigenvalueRecord,
    compute_spectrum,
    constant_potential,
    count_zeros,
    eigenvalues_in_strip,
    index_spectrum,
    nonnormal_potential,
    random_smooth_potential,
    trig_potential,
    zero_potential,
)
from dirac_riesz import spectrum as sp
from dirac_riesz.characteristic import evaluate
from dirac_riesz.oracle import oracle_strip, pair_eigenvalues

from conftest import suite


def const_eigs(c, n_max):
    """Closed-form spectrum of q1 = q2 = c (r = 1): c and +-sqrt(pi^2 n^2 + c^2)."""
    vals = [complex(c)]
    for n in range(1, n_max + 1):
        w = np.sqrt(complex(math.pi**2 * n**2 + c**2))
        vals += [w, -w]
    return np.array(vals)


# --- contours ---------------------------------------------------------------


@pytest.mark.parametrize("r", [1, 2])
@pytest.mark.parametrize("n", [-3, 0, 2])
def test_count_free_circle_holds_r(r, n):
    Q = zero_potential(r)
    assert count_zeros(Q, ContourSpec(math.pi * n, math.pi / 2)) == r


@pytest.mark.parametrize("n", [-2, 0, 1])
def test_count_zero_free_disc(n):
    Q = zero_potential(2)
    assert count_zeros(Q, ContourSpec(math.pi * n + math.pi / 2, 0.5)) == 0


def test_count_constant_potential():
    Q = constant_potential(1.0)
    # disc of radius 2 about 0 holds only lam = 1
    assert count_zeros(Q, ContourSpec(0.0, 2.0)) == 1
    assert count_zeros(Q, ContourSpec(0.0, 4.0)) == 3


def test_zero_on_contour_raises():
    with pytest.raises(sp.ZeroOnContour):
        count_zeros(zero_potential(1), ContourSpec(0.0, math.pi))


@pytest.mark.parametrize("kw", [{"radius": 0.0}, {"radius": -1.0}, {"radius": 1.0, "nodes": 16}])
def test_contour_spec_validation(kw):
    with pytest.raises(ValueError):
        ContourSpec(0.0, **kw)


def test_contour_weights_integrate_inverse():
    c = ContourSpec(1 + 1j, 0.7, 64)
    assert abs(np.sum(c.weights() / (c.points() - (1.2 + 0.9j))) - 1) < 1e-13


# --- strips -----------------------------------------------------------------


@pytest.mark.parametrize("r", [1, 2])
@pytest.mark.parametrize("n", [-4, 0, 3])
def test_free_strip(r, n):
    res = eigenvalues_in_strip(zero_potential(r), n)
    assert len(res.records) == 1
    rec = res.records[0]
    assert rec.multiplicity == r
    assert abs(rec.value - math.pi * n) < 1e-9
    assert res.box_count == r


def test_strip_boundary_rule():
    assert sp.strip_of(math.pi / 2) == 0
    assert sp.strip_of(-math.pi / 2) == -1
    assert sp.strip_of(math.pi / 2 + 1e-12) == 1
    assert sp.strip_of(3 * math.pi + 0.1j) == 3


def test_constant_potential_closed_form():
    c = 1.0
    S = compute_spectrum(constant_potential(c), range(-5, 6))
    got = np.sort_complex(S.values())
    want = np.sort_complex(const_eigs(c, 5))
    assert got.size == want.size
    assert np.max(np.abs(got - want)) < 1e-9


def test_complex_constant_potential_finds_offaxis_zero():
    # q = 3i: eigenvalues 3i and +-sqrt(pi^2 n^2 - 9); strip 0 holds 3i and +-0.93
    c = 3j
    res = eigenvalues_in_strip(constant_potential(c), 0, height=2.0)
    got = np.sort_complex(np.array([r.value for r in res.records]))
    w = np.sqrt(complex(math.pi**2 - 9))
    want = np.sort_complex(np.array([-w, w, c]))
    assert got.size == 3
    assert np.max(np.abs(got - want)) < 1e-9
    assert res.height >= 4.0


def test_search_height_exceeded(monkeypatch):
    monkeypatch.setattr(sp, "MAX_HEIGHT", 3.0)
    with pytest.raises(sp.SearchHeightExceeded):
        eigenvalues_in_strip(constant_potential(3j), 0, height=2.0)


@pytest.mark.parametrize("label,Q", suite() + [("random", random_smooth_potential(2, seed=4))])
def test_polished_residual_and_count(label, Q):
    for n in (-1, 0, 2):
        res = eigenvalues_in_strip(Q, n)
        assert res.total_multiplicity == res.box_count
        for rec in res.records:
            assert rec.residual <= 1e-9
            assert rec.strip == n == sp.strip_of(rec.value)
            b = evaluate(Q, np.array([rec.value]), derivative=True)
            assert abs(b.det[0]) <= 1e-9 * max(1.0, abs(b.ddet[0])) or rec.multiplicity > 1


def test_box_count_conservation():
    Q = nonnormal_potential(r=2)
    box = sp._Box(-math.pi / 2, math.pi / 2, -3.0, 3.0)
    whole = sp.box_count(Q, box)[0]
    left, right = box.split(0.41)
    assert whole == sp.box_count(Q, left)[0] + sp.box_count(Q, right)[0]
    assert whole == 2


@pytest.mark.parametrize("Q", [trig_potential(), random_smooth_potential(1, seed=2)])
def test_panel_width_does_not_change_counts(Q):
    for n in (-2, 0, 1):
        box = sp._Box(math.pi * n - math.pi / 2, math.pi * n + math.pi / 2, -4.0, 4.0)
        counts = {sp.box_count(Q, box, panel=p)[0] for p in (0.25, 0.5, 1.0)}
        assert len(counts) == 1


# --- indexing ---------------------------------------------------------------


def rec(z, m=1):
    return EigenvalueRecord(complex(z), m, sp.strip_of(z))


def test_index_free_r1():
    recs = index_spectrum(rec(math.pi * n) for n in range(-2, 3))
    assert [r.index for r in recs] == [-2, -1, 0, 1, 2]
    assert recs[2].value == 0


def test_index_zero_real_part_is_lambda0():
    recs = index_spectrum([rec(1.0), rec(-2.0), rec(1e-12 + 1j), rec(3.0)])
    by = {r.index: r.value for r in recs}
    assert by[0] == 1e-12 + 1j
    assert by[1] == 1.0


def test_index_ties_ordered_by_imag():
    recs = index_spectrum([rec(2 + 1j), rec(2 - 1j), rec(-1.0)])
    assert [r.value for r in recs] == [-1.0, 2 - 1j, 2 + 1j]
    assert [r.index for r in recs] == [0, 1, 2]


def test_index_stable_under_conjugation(rng):
    z = rng.normal(size=8) * 5 + 1j * rng.normal(size=8)
    vals = np.concatenate([z, z.conj(), [0.7, -2.2]])
    a = index_spectrum(rec(v) for v in vals)
    b = index_spectrum(rec(v) for v in vals.conj())
    assert [r.index for r in a] == [r.index for r in b]
    assert np.allclose([r.value.real for r in a], [r.value.real for r in b])
    assert np.allclose(np.sort_complex([r.value for r in a]), np.sort_complex(np.conj([r.value for r in b])))


# --- asymptotics ------------------------------------------------------------


@pytest.mark.parametrize("r", [1, 2])
def test_asymptotics_free(r):
    rep = sp.asymptotics_report(compute_spectrum(zero_potential(r), range(-6, 7)))
    assert max(rep.deviation.values()) < 1e-16
    assert rep.max_count_per_strip == 1
    assert all(c == r for c in rep.counts.values())
    assert rep.threshold == 0


def test_asymptotics_smooth_tail_converges():
    S = compute_spectrum(trig_potential(), range(-32, 33))
    rep = sp.asymptotics_report(S)
    assert rep.partial_sums[32] - rep.partial_sums[16] < 0.2 * rep.partial_sums[16]
    assert rep.threshold is not None and rep.threshold <= 2
    assert rep.max_count_per_strip <= 2


@pytest.mark.parametrize("label,Q", suite())
def test_max_count_per_strip(label, Q):
    rep = sp.asymptotics_report(compute_spectrum(Q, range(-4, 5)))
    assert rep.max_count_per_strip <= Q.r + 1
    assert all(rep.counts[n] == Q.r for n in rep.strips if abs(n) >= rep.threshold)


# --- against the independent discretization ---------------------------------


@pytest.mark.slow
def test_random_r2_against_oracle():
    Q = random_smooth_potential(2, seed=7)
    worst = 0.0
    for n in range(-10, 11):
        shoot = np.array([r.value for r in eigenvalues_in_strip(Q, n).records
                          for _ in range(r.multiplicity)])
        orc = oracle_strip(Q, n, m=1024, projector=False).eigenvalues
        assert shoot.size == orc.size, n
        i, j = pair_eigenvalues(shoot, orc)
        worst = max(worst, float(np.max(np.abs(shoot[i] - orc[j]), initial=0.0)))
    assert worst < 1e-3


def test_empty_strip():
    # q = 3i: strips 0 and +-2 are occupied, strips +-1 hold no eigenvalue
    res = eigenvalues_in_strip(constant_potential(3j), 1)
    assert res.records == () and res.box_count == 0
