"""Characteristic matrices s_Q, c_Q, the Weyl-Titchmarsh function m_Q and det s_Q."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potentials import MatrixPotential
from .propagator import DEFAULT_TOL, J_matrix, a_matrix, propagate

__all__ = [
    "SINGULAR_RTOL",
    "SingularCharacteristicMatrix",
    "CharacteristicSample",
    "CharacteristicBatch",
    "evaluate",
    "characteristic",
    "s_matrix",
    "c_matrix",
    "m_matrix",
    "char_det",
    "char_det_derivative",
    "adjugate",
    "PaleyWienerReport",
    "verify_paley_wiener",
    "sinc",
]

SINGULAR_RTOL = 1e-8


class SingularCharacteristicMatrix(ArithmeticError):
    """s_Q(lambda) is numerically singular: lambda is at or near an eigenvalue."""

    def __init__(self, lam, sigma_min, scale):
        self.lam = complex(lam)
        self.sigma_min = float(sigma_min)
        self.scale = float(scale)
        super().__init__(
            f"s_Q({self.lam:.6g}) is singular: sigma_min={sigma_min:.3e} "
            f"(threshold {SINGULAR_RTOL:g} * {scale:.3e})"
        )


def adjugate(m: np.ndarray) -> np.ndarray:
    """Adjugate of a stack of square matrices via cofactors (no inversion)."""
    m = np.asarray(m)
    r = m.shape[-1]
    if r == 1:
        return np.ones_like(m)
    if r == 2:
        out = np.empty_like(m)
        out[..., 0, 0] = m[..., 1, 1]
        out[..., 1, 1] = m[..., 0, 0]
        out[..., 0, 1] = -m[..., 0, 1]
        out[..., 1, 0] = -m[..., 1, 0]
        return out
    out = np.empty_like(m)
    idx = np.arange(r)
    for i in range(r):
        for j in range(r):
            minor = m[..., idx != i, :][..., :, idx != j]
            # adj = transpose of the cofactor matrix
            out[..., j, i] = (-1) ** (i + j) * np.linalg.det(minor)
    return out


@dataclass(frozen=True, eq=False)
class CharacteristicBatch:
    """s_Q, c_Q and det s_Q (optionally with lambda-derivatives) at many lambdas."""

    lams: np.ndarray
    s: np.ndarray
    c: np.ndarray
    det: np.ndarray
    ds: np.ndarray | None = None
    ddet: np.ndarray | None = None


def evaluate(
    Q: MatrixPotential, lams, derivative: bool = False, tol: float = DEFAULT_TOL, grid=None
) -> CharacteristicBatch:
    """Evaluate the characteristic data at an array of spectral parameters.

    Only Y_Q(1, lambda) is needed, so by default the integration outputs the
    endpoint alone.  Passing ``grid`` reproduces the step sequence of a
    propagation on that grid.
    """
    lams = np.asarray(lams, dtype=complex)
    shape = lams.shape
    flat = lams.ravel()
    r = Q.r
    nodes = np.array([0.0, 1.0]) if grid is None else grid
    Y, dY, _ = propagate([Q], flat[None, :], nodes, tol, derivative=derivative)
    Y1 = Y[-1, 0]
    a = a_matrix(r)
    Ja = J_matrix(r) @ a.conj().T
    # same association order as phi = Y (J a*), so s = a phi(1) bit for bit
    s = a @ (Y1 @ Ja)
    c = a @ (Y1 @ a.conj().T)
    det = np.linalg.det(s)
    ds = ddet = None
    if derivative:
        ds = a @ dY[-1, 0] @ Ja
        # Jacobi's formula
        ddet = np.einsum("...ij,...ji->...", adjugate(s), ds)
        ds = ds.reshape(shape + (r, r))
        ddet = ddet.reshape(shape)
    return CharacteristicBatch(
        lams=lams,
        s=s.reshape(shape + (r, r)),
        c=c.reshape(shape + (r, r)),
        det=det.reshape(shape),
        ds=ds,
        ddet=ddet,
    )


@dataclass(frozen=True, eq=False)
class CharacteristicSample:
    """Characteristic data at one spectral parameter.

    ``s_inv_norm`` is ``None`` when s is flagged singular.
    """

    lam: complex
    s: np.ndarray
    c: np.ndarray
    det: complex
    det_prime: complex
    s_inv_norm: float | None

    @property
    def singular(self) -> bool:
        return self.s_inv_norm is None


def _singular_test(s: np.ndarray, c: np.ndarray):
    """Return (sigma_min, scale); singular iff sigma_min < SINGULAR_RTOL * scale.

    The scale is the norm of the stacked pair (s, c), which cannot vanish
    because s and c are never singular together.
    """
    sv = np.linalg.svd(s, compute_uv=False)
    scale = np.linalg.norm(np.concatenate([s, c], axis=-1), ord=2, axis=(-2, -1))
    return sv[..., -1], scale


def characteristic(Q: MatrixPotential, lam: complex, tol: float = DEFAULT_TOL) -> CharacteristicSample:
    b = evaluate(Q, [lam], derivative=True, tol=tol)
    s, c = b.s[0], b.c[0]
    smin, scale = _singular_test(s, c)
    inv_norm = None if smin < SINGULAR_RTOL * scale else float(1.0 / smin)
    return CharacteristicSample(complex(lam), s, c, complex(b.det[0]), complex(b.ddet[0]), inv_norm)


def s_matrix(Q: MatrixPotential, lam: complex, tol: float = DEFAULT_TOL, grid=None) -> np.ndarray:
    """s_Q(lambda) = a phi_Q(1, lambda)."""
    return evaluate(Q, [lam], tol=tol, grid=grid).s[0]


def c_matrix(Q: MatrixPotential, lam: complex, tol: float = DEFAULT_TOL, grid=None) -> np.ndarray:
    """c_Q(lambda) = a psi_Q(1, lambda)."""
    return evaluate(Q, [lam], tol=tol, grid=grid).c[0]


def _m_from(s, c, lams):
    smin, scale = _singular_test(s, c)
    bad = smin < SINGULAR_RTOL * scale
    if np.any(bad):
        k = int(np.flatnonzero(np.ravel(bad))[0])
        raise SingularCharacteristicMatrix(
            np.ravel(lams)[k], np.ravel(smin)[k], np.ravel(scale)[k]
        )
    return -np.linalg.solve(s, c)


def m_matrix(Q: MatrixPotential, lam: complex, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Weyl-Titchmarsh function m_Q(lambda) = -s_Q(lambda)^{-1} c_Q(lambda).

    Raises
    ------
    SingularCharacteristicMatrix
        If the smallest singular value of s is below the threshold.
    """
    b = evaluate(Q, [lam], tol=tol)
    return _m_from(b.s, b.c, b.lams)[0]


def char_det(Q: MatrixPotential, lam: complex, tol: float = DEFAULT_TOL) -> complex:
    return complex(evaluate(Q, [lam], tol=tol).det[0])


def char_det_derivative(Q: MatrixPotential, lam: complex, tol: float = DEFAULT_TOL) -> complex:
    return complex(evaluate(Q, [lam], derivative=True, tol=tol).ddet[0])


# --- Fourier structure of s_Q - sin and c_Q - cos ----------------------------


def sinc(z):
    """sin(z)/z for complex z, equal to 1 at 0."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z * z / 6.0, np.sin(zs) / zs)


@dataclass(frozen=True, eq=False)
class PaleyWienerReport:
    """Fourier data of f1, f2 with s_Q = sin I + A f1, c_Q = cos I + A f2.

    ``f1_hat[k + K]`` is the coefficient of e^{i pi k t}/sqrt(2) for
    k = -K..K, i.e. g1(-pi k) where g1 = s_Q - sin I.
    """

    K: int
    f1_hat: np.ndarray
    f2_hat: np.ndarray
    residual_s: float
    residual_c: float

    @property
    def off_grid_residual(self) -> float:
        return max(self.residual_s, self.residual_c)

    def energy(self) -> tuple[float, float]:
        """Partial sums sum_k ||f_hat(k)||_F^2 for f1 and f2."""
        e1 = float(np.sum(np.abs(self.f1_hat) ** 2))
        e2 = float(np.sum(np.abs(self.f2_hat) ** 2))
        return e1, e2


def band_limited_apply(coeffs: np.ndarray, modes: np.ndarray, lams) -> np.ndarray:
    """A(lambda) f for f = sum_j coeffs[j] e^{i pi modes[j] t}/sqrt(2), exactly.

    A(lambda) f = (1/sqrt 2) int_{-1}^{1} e^{i lambda t} f(t) dt
                = sum_j coeffs[j] sinc(lambda + pi modes[j]).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    S = sinc(lams[:, None] + np.pi * np.asarray(modes)[None, :])
    return np.einsum("lj,jab->lab", S, coeffs)


def verify_paley_wiener(Q: MatrixPotential, K: int, tol: float = DEFAULT_TOL) -> PaleyWienerReport:
    """Certify numerically that s_Q - sin I and c_Q - cos I are Fourier
    transforms of L2 functions supported on [-1, 1].

    Samples at lambda = pi k give the Fourier coefficients; the band-limited
    reconstruction is then compared with the true values at the
    half-integer points pi (k + 1/2), |k| <= K.
    """
    if K < 8:
        raise ValueError("K must be at least 8")
    ks = np.arange(-K, K + 1)
    on = np.pi * ks
    off = np.pi * (ks + 0.5)
    b = evaluate(Q, np.concatenate([on, off]), tol=tol)
    r = Q.r
    eye = np.eye(r)
    lam_all = b.lams
    g1 = b.s - np.sin(lam_all)[:, None, None] * eye
    g2 = b.c - np.cos(lam_all)[:, None, None] * eye
    n = ks.size
    # coefficient of mode j is g(-pi j): reverse the on-grid samples
    f1 = g1[:n][::-1].copy()
    f2 = g2[:n][::-1].copy()
    rec1 = band_limited_apply(f1, ks, off)
    rec2 = band_limited_apply(f2, ks, off)
    res1 = float(np.max(np.linalg.norm(g1[n:] - rec1, ord=2, axis=(1, 2))))
    res2 = float(np.max(np.linalg.norm(g2[n:] - rec2, ord=2, axis=(1, 2))))
    return PaleyWienerReport(K, f1, f2, res1, res2)
