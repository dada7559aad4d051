import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirac_riesz import (
    MatrixPotential,
    PotentialSpecError,
    adjoint_potential,
    constant_potential,
    l2_norm,
    load_potential,
    nonnormal_potential,
    random_smooth_potential,
    trig_potential,
    zero_potential,
)
from dirac_riesz.potentials import is_self_adjoint
from dirac_riesz.propagator import J_matrix

X = np.linspace(0, 1, 101)


def _mat(m):
    m = np.asarray(m, dtype=complex)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def test_zero_spec_gives_free_potential():
    Q = load_potential({"r": 1, "q1": {"kind": "zero"}, "q2": {"kind": "zero"}})
    assert Q.is_zero()
    assert np.array_equal(Q(X), np.zeros((X.size, 2, 2)))


def test_const_spec_gives_constant_off_diagonal_blocks():
    c = 0.7 - 0.2j
    Q = load_potential({"r": 1, "q1": {"kind": "const", **_mat([[c]])}, "q2": {"kind": "const", **_mat([[c]])}})
    vals = Q(X)
    assert np.all(vals[:, 0, 1] == c) and np.all(vals[:, 1, 0] == c)
    assert np.all(vals[:, 0, 0] == 0) and np.all(vals[:, 1, 1] == 0)


def test_sampled_spec_round_trips_at_nodes(rng):
    x = np.linspace(0, 1, 257)
    q1 = np.stack([np.cos(2 * np.pi * x), np.sin(x), x**2, 1 + 0j * x], -1).reshape(-1, 2, 2) * (1 + 0.5j)
    q2 = np.stack([x, np.exp(x), np.cos(3 * x), x**3], -1).reshape(-1, 2, 2)
    spec = {
        "r": 2,
        "q1": {"kind": "samples", "x": x.tolist(), "re": q1.real.tolist(), "im": q1.imag.tolist()},
        "q2": {"kind": "samples", "x": x.tolist(), "re": q2.real.tolist(), "im": q2.imag.tolist()},
    }
    Q = load_potential(json.dumps(spec))
    a, b = Q.blocks(x)
    assert np.array_equal(a, q1) and np.array_equal(b, q2)


def test_sampled_blocks_interpolate_linearly():
    x = np.array([0.0, 0.5, 1.0])
    spec = {"r": 1, "q1": {"kind": "samples", "x": x.tolist(), "re": [[[0.0]], [[1.0]], [[0.0]]]},
            "q2": {"kind": "zero"}}
    Q = load_potential(spec)
    assert Q.q1(np.array([0.25]))[0, 0, 0] == pytest.approx(0.5)
    assert Q.breakpoints == (0.5,)


def test_potential_file_and_inline_json(tmp_path):
    doc = {"r": 1, "q1": {"kind": "builtin", "name": "trig", "params": {"cos": [1.0]}}, "q2": {"kind": "zero"}}
    p = tmp_path / "pot.json"
    p.write_text(json.dumps(doc))
    Q1, Q2 = load_potential(p), load_potential(json.dumps(doc))
    assert np.array_equal(Q1(X), Q2(X))
    assert Q1.label == "pot"


@pytest.mark.parametrize(
    "doc, fragment",
    [
        ("{not json", "malformed"),
        ({"r": 0, "q1": {"kind": "zero"}, "q2": {"kind": "zero"}}, "positive integer"),
        ({"r": 1, "q1": {"kind": "zero"}}, "missing block"),
        ({"r": 1, "q1": {"kind": "const", "re": [[1, 2]]}, "q2": {"kind": "zero"}}, "expected 1x1"),
        ({"r": 1, "q1": {"kind": "const", "re": [[float("nan")]]}, "q2": {"kind": "zero"}}, "non-finite"),
        ({"r": 1, "q1": {"kind": "wavelet"}, "q2": {"kind": "zero"}}, "unknown block kind"),
        ({"r": 1, "q1": {"kind": "builtin", "name": "nope"}, "q2": {"kind": "zero"}}, "unknown builtin"),
        ({"r": 1, "q1": {"kind": "samples", "x": [0.5, 0.2], "re": [[[1]], [[2]]]}, "q2": {"kind": "zero"}},
         "increase strictly"),
    ],
)
def test_malformed_documents_are_rejected(doc, fragment):
    with pytest.raises(PotentialSpecError, match=fragment):
        load_potential(doc)


def test_block_size_mismatch_is_rejected():
    from dirac_riesz.potentials import ConstBlock

    with pytest.raises(PotentialSpecError, match="block sizes differ"):
        MatrixPotential(ConstBlock(np.eye(1)), ConstBlock(np.eye(2)))


def test_missing_file_names_the_path(tmp_path):
    path = tmp_path / "absent.json"
    with pytest.raises(FileNotFoundError, match="absent.json"):
        load_potential(path)


def test_adjoint_of_zero_is_zero():
    assert adjoint_potential(zero_potential(2)).is_zero()


def test_adjoint_of_constant_i():
    Q = constant_potential(1j, 0.0)
    Qs = adjoint_potential(Q)
    v = Qs(X)
    assert np.all(v[:, 0, 1] == 0)
    assert np.all(v[:, 1, 0] == -1j)


def test_adjoint_of_selfadjoint_r2_equals_itself(rng):
    M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    Q = load_potential({"r": 2, "q1": {"kind": "builtin", "name": "exp", "params": {"matrix": _mat(M)}},
                        "q2": {"kind": "zero"}})
    # q2 = q1^* pointwise; compare at 100 random x
    Q = MatrixPotential(Q.q1, _adj(Q.q1))
    x = rng.uniform(0, 1, 100)
    assert np.allclose(adjoint_potential(Q)(x), Q(x), atol=0, rtol=0)


def _adj(block):
    from dirac_riesz.potentials import AdjointBlock

    return AdjointBlock(block)


def test_adjoint_swaps_and_conjugates_nonnormal():
    Q = nonnormal_potential(r=2)
    Qs = adjoint_potential(Q)
    q1, q2 = Q.blocks(X)
    s1, s2 = Qs.blocks(X)
    assert np.array_equal(s1, np.conj(np.swapaxes(q2, -1, -2)))
    assert np.array_equal(s2, np.conj(np.swapaxes(q1, -1, -2)))


def test_self_adjointness_is_recognised_structurally():
    assert is_self_adjoint(zero_potential(2))
    assert is_self_adjoint(constant_potential(1.0))
    assert is_self_adjoint(trig_potential())
    assert not is_self_adjoint(constant_potential(1j))
    assert not is_self_adjoint(nonnormal_potential(r=2))
    assert not is_self_adjoint(random_smooth_potential(r=2, seed=3))


def test_l2_norm_examples():
    assert l2_norm(zero_potential(2)) == 0.0
    # ||[[0,1],[1,0]]|| = 1 pointwise
    assert l2_norm(constant_potential(1.0)) == pytest.approx(1.0, abs=1e-14)
    val, err = l2_norm(trig_potential(), return_error=True)
    # q = cos 2 pi x + 0.5 sin 4 pi x has mean square 1/2 + 1/8
    assert val == pytest.approx(np.sqrt(0.625), abs=1e-12)
    assert err < 1e-10


def test_l2_norm_rejects_non_finite():
    from dirac_riesz.potentials import FunctionBlock

    bad = FunctionBlock(1, lambda x: np.where(x > 0.5, np.nan, 0.0)[:, None, None])
    with pytest.raises(PotentialSpecError):
        l2_norm(MatrixPotential(bad, bad))


@given(scale=st.floats(0.1, 10.0), seed=st.integers(0, 50))
def test_l2_norm_is_homogeneous(scale, seed):
    Q = random_smooth_potential(r=2, seed=seed)
    Q2 = random_smooth_potential(r=2, seed=seed, amplitude=scale)
    assert l2_norm(Q2) == pytest.approx(scale * l2_norm(Q), rel=1e-10)


@given(seed=st.integers(0, 200), r=st.integers(1, 3))
def test_diagonal_blocks_vanish_and_J_anticommutes(seed, r):
    Q = random_smooth_potential(r=r, seed=seed)
    x = np.random.default_rng(seed).uniform(0, 1, 20)
    v = Q(x)
    assert np.all(v[:, :r, :r] == 0) and np.all(v[:, r:, r:] == 0)
    J = J_matrix(r)
    assert np.array_equal(J @ v, -(v @ J))


@given(seed=st.integers(0, 200), r=st.integers(1, 3))
def test_adjoint_is_an_involution(seed, r):
    Q = random_smooth_potential(r=r, seed=seed)
    x = np.linspace(0, 1, 33)
    assert np.array_equal(adjoint_potential(adjoint_potential(Q))(x), Q(x))
