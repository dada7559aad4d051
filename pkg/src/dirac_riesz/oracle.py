"""Brute-force cross-check: finite-difference discretisation of T_Q.

The operator is discretised by the box scheme on x_k = k/m,

    J (y_{k+1} - y_k)/h + Q(x_{k+1/2}) (y_k + y_{k+1})/2 = lambda (y_k + y_{k+1})/2,

with the boundary conditions eliminated (y_0 = (u, u), y_m = (v, v)).  This
gives a square pencil A z = lambda B z of size 2rm.  The box scheme is free
of the spurious modes that centred differences of a first-order operator
produce, and its even error expansion lets one Richardson step (m, m/2)
lift eigenvalues and kernels to fourth order.

Projectors are assembled from right eigenvectors and the eigenvectors of
the discretised adjoint T_{Q*} (same boundary conditions), normalised to be
biorthogonal in the trapezoidal inner product.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linear_sum_assignment

from .potentials import MatrixPotential, adjoint_potential, l2_norm
from .spectrum import strip_of

log = logging.getLogger(__name__)

__all__ = [
    "DefectiveClusterWarning",
    "DenseDiscretization",
    "discretize_operator",
    "OracleStrip",
    "oracle_spectrum",
    "oracle_strip",
    "ComparisonReport",
    "compare",
    "pair_eigenvalues",
]

CONDITION_LIMIT = 1e8


class DefectiveClusterWarning(RuntimeWarning):
    """Eigenvectors of a cluster are nearly dependent; projector accuracy degrades."""


@dataclass(frozen=True, eq=False)
class DenseDiscretization:
    """Pencil (A, B) of size 2rm on the nodes x_k = k/m.

    Unknowns are ordered u (r), y_1, ..., y_{m-1} (2r each), v (r).
    """

    m: int
    r: int
    A: sp.csr_matrix
    B: sp.csr_matrix
    x: np.ndarray
    label: str = ""

    @property
    def size(self) -> int:
        return 2 * self.r * self.m

    def node_values(self, z: np.ndarray) -> np.ndarray:
        """Map unknown vectors (size, k) to node values (m+1, 2r, k)."""
        z = np.asarray(z)
        vec = z.ndim == 1
        if vec:
            z = z[:, None]
        r, m = self.r, self.m
        out = np.empty((m + 1, 2 * r, z.shape[1]), dtype=complex)
        u, v = z[:r], z[-r:]
        out[0, :r] = out[0, r:] = u
        out[-1, :r] = out[-1, r:] = v
        out[1:-1] = z[r:-r].reshape(m - 1, 2 * r, -1)
        return out[..., 0] if vec else out


def _node_columns(k: int, m: int, r: int) -> np.ndarray:
    """Column index in z of each of the 2r components of y_k."""
    c = np.arange(2 * r)
    if k == 0:
        return c % r
    if k == m:
        return 2 * r * m - r + c % r
    return r + 2 * r * (k - 1) + c


def discretize_operator(Q: MatrixPotential, m: int) -> DenseDiscretization:
    if m < 64:
        raise ValueError("m must be at least 64")
    r = Q.r
    d = 2 * r
    h = 1.0 / m
    x = np.linspace(0.0, 1.0, m + 1)
    Qmid = Q((x[:-1] + x[1:]) / 2)
    Jh = np.concatenate([-1j * np.ones(r), 1j * np.ones(r)]) / h
    Ar, Ac, Av = [], [], []
    Br, Bc, Bv = [], [], []
    eye = np.eye(d)
    for k in range(m):
        row = k * d + np.arange(d)
        for node, sgn in ((k, -1.0), (k + 1, 1.0)):
            cols = _node_columns(node, m, r)
            blockA = sgn * np.diag(Jh) + 0.5 * Qmid[k]
            blockB = 0.5 * eye
            rr, cc = np.meshgrid(row, cols, indexing="ij")
            nz = blockA != 0
            Ar.append(rr[nz]); Ac.append(cc[nz]); Av.append(blockA[nz])
            nzb = blockB != 0
            Br.append(rr[nzb]); Bc.append(cc[nzb]); Bv.append(blockB[nzb])
    n = d * m
    A = sp.csr_matrix((np.concatenate(Av), (np.concatenate(Ar), np.concatenate(Ac))), shape=(n, n))
    B = sp.csr_matrix((np.concatenate(Bv).astype(complex), (np.concatenate(Br), np.concatenate(Bc))), shape=(n, n))
    A.sum_duplicates()
    B.sum_duplicates()
    return DenseDiscretization(m, r, A, B, x, Q.label)


def _trapezoid(x: np.ndarray) -> np.ndarray:
    w = np.full(x.size, x[1] - x[0])
    w[[0, -1]] *= 0.5
    return w


def _subspace_eigs(apply, size: int, k: int, tol: float = 1e-12, maxiter: int = 1000):
    """k dominant eigenpairs of a linear map by block subspace iteration.

    A block start (rather than a single Krylov vector) is needed to resolve
    exactly repeated eigenvalues.  Returns (nu, vectors) by decreasing |nu|.
    """
    p = min(size, k + max(4, k // 2))
    rng = np.random.default_rng(12345)
    X, _ = np.linalg.qr(rng.standard_normal((size, p)) + 1j * rng.standard_normal((size, p)))
    for _ in range(maxiter):
        Y = apply(X)
        nu, S = np.linalg.eig(X.conj().T @ Y)
        order = np.argsort(-np.abs(nu))
        nu, S = nu[order], S[:, order]
        U = X @ S
        res = np.linalg.norm(Y @ S - U * nu, axis=0) / np.linalg.norm(U, axis=0)
        if np.all(res[:k] <= tol * np.abs(nu[:k])):
            break
        X, _ = np.linalg.qr(Y)
    else:
        log.warning("subspace iteration stopped at %d sweeps (residual %.2e)", maxiter, float(np.max(res[:k] / np.abs(nu[:k]))))
    U = U[:, :k] / np.linalg.norm(U[:, :k], axis=0)
    return nu[:k], U


def _window_eigs(D: DenseDiscretization, n: int, height: float, conj: bool = False):
    """Eigenpairs of the pencil with eigenvalues in strip n and |Im| <= height.

    Shift-invert about pi n: eigenvalues of (A - sigma B)^{-1} B are
    1/(lambda - sigma).  k grows until the returned set reaches past the
    window.
    """
    sigma = math.pi * n + 1e-3 * (1 + 1j)
    if conj:
        sigma = np.conj(sigma)
    lu = spla.splu((D.A - sigma * D.B).tocsc())

    def apply(X):
        return lu.solve(np.asarray(D.B @ X))

    reach = math.hypot(math.pi / 2, height) + 1e-3
    k = min(4 * D.r + 2, D.size - 2)
    while True:
        nu, vec = _subspace_eigs(apply, D.size, k)
        lam = sigma + 1.0 / nu
        if np.max(np.abs(lam - sigma)) > reach or k >= D.size - 2:
            break
        k = min(2 * k, D.size - 2)
    target = np.conj(lam) if conj else lam
    keep = np.array([strip_of(z) == n and abs(z.imag) <= height for z in target], dtype=bool)
    order = np.lexsort((target[keep].imag, target[keep].real))
    return lam[keep][order], vec[:, keep][:, order]


@dataclass(frozen=True, eq=False)
class OracleStrip:
    """Oracle eigenvalues and cluster projector for one strip at one m.

    ``kernel`` is stored like ProjectorKernel.matrix on the nodes ``x``.
    """

    n: int
    m: int
    r: int
    eigenvalues: np.ndarray
    x: np.ndarray
    kernel: np.ndarray | None
    gram: np.ndarray | None
    condition: float
    warnings: tuple[str, ...] = ()

    def idempotency(self) -> float:
        if self.kernel is None:
            return math.nan
        w = np.repeat(_trapezoid(self.x), 2 * self.r)
        K = self.kernel
        return float(np.max(np.abs((K * w[None, :]) @ K - K)))


def _default_height(Q: MatrixPotential) -> float:
    return 3.0 + 2.0 * l2_norm(Q)


def oracle_spectrum(D: DenseDiscretization, n: int, height: float = 4.0,
                    D_adj: DenseDiscretization | None = None) -> OracleStrip:
    """Eigenvalues of the pencil in strip n (|Im| <= height) and their projector.

    The projector needs the discretised adjoint ``D_adj``; without it only
    eigenvalues are returned.
    """
    lam, V = _window_eigs(D, n, height)
    notes: list[str] = []
    kernel = gram = None
    cond = math.nan
    if D_adj is not None and lam.size:
        mu, X = _window_eigs(D_adj, n, height, conj=True)
        if mu.size != lam.size:
            notes.append(f"adjoint count {mu.size} != {lam.size}; projector skipped")
        else:
            Phi = D.node_values(V)  # (m+1, 2r, k)
            Chi = D_adj.node_values(X)
            k = lam.size
            w = _trapezoid(D.x)
            Pf = Phi.reshape(-1, k)
            Xf = Chi.reshape(-1, k)
            wf = np.repeat(w, 2 * D.r)
            G = Xf.conj().T @ (wf[:, None] * Pf)
            cond = float(np.linalg.cond(G))
            if cond > CONDITION_LIMIT:
                msg = f"strip {n}: eigenvector Gram condition {cond:.2e} (defective cluster)"
                notes.append(msg)
                warnings.warn(msg, DefectiveClusterWarning, stacklevel=2)
            # rescale adjoint vectors so that the Gram matrix is the identity
            Xb = Xf @ np.linalg.inv(G).conj().T
            gram = Xb.conj().T @ (wf[:, None] * Pf)
            kernel = Pf @ Xb.conj().T
    return OracleStrip(n, D.m, D.r, lam, D.x, kernel, gram, cond, tuple(notes))


def pair_eigenvalues(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Optimal one-to-one pairing of two equally long lists; returns index arrays."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    cost = np.abs(a[:, None] - b[None, :])
    return linear_sum_assignment(cost)


@dataclass(frozen=True, eq=False)
class ExtrapolatedStrip:
    """Richardson combination (4 X_m - X_{m/2})/3 on the coarse nodes."""

    n: int
    m: int
    eigenvalues: np.ndarray
    x: np.ndarray
    kernel: np.ndarray | None
    fine: OracleStrip
    coarse: OracleStrip
    warnings: tuple[str, ...] = ()


def oracle_strip(Q: MatrixPotential, n: int, m: int = 1024, height: float | None = None,
                 projector: bool = True) -> ExtrapolatedStrip:
    if m % 2 or m < 128:
        raise ValueError("m must be even and at least 128")
    if height is None:
        height = _default_height(Q)
    Qa = adjoint_potential(Q) if projector else None
    res = []
    for mm in (m, m // 2):
        D = discretize_operator(Q, mm)
        Da = discretize_operator(Qa, mm) if projector else None
        res.append(oracle_spectrum(D, n, height, Da))
    fine, coarse = res
    notes = list(fine.warnings) + list(coarse.warnings)
    if fine.eigenvalues.size != coarse.eigenvalues.size:
        notes.append("eigenvalue counts differ between m and m/2; no extrapolation")
        return ExtrapolatedStrip(n, m, fine.eigenvalues, fine.x, fine.kernel, fine, coarse, tuple(notes))
    i, j = pair_eigenvalues(fine.eigenvalues, coarse.eigenvalues)
    ext = (4 * fine.eigenvalues[i] - coarse.eigenvalues[j]) / 3
    ext = ext[np.lexsort((ext.imag, ext.real))]
    kernel = None
    if fine.kernel is not None and coarse.kernel is not None:
        d = 2 * Q.r
        nf = fine.x.size
        Kf = fine.kernel.reshape(nf, d, nf, d)[::2, :, ::2, :].reshape(coarse.kernel.shape)
        kernel = (4 * Kf - coarse.kernel) / 3
    return ExtrapolatedStrip(n, m, ext, coarse.x, kernel, fine, coarse, tuple(notes))


@dataclass(frozen=True)
class ComparisonReport:
    n: int
    m: int
    shooting_count: int
    oracle_count: int
    eigenvalue_deviation: float
    kernel_deviation: float | None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def counts_match(self) -> bool:
        return self.shooting_count == self.oracle_count


def compare(Q: MatrixPotential, n: int, m: int = 1024, projector: bool = True,
            records=None, tol: float = 1e-10) -> ComparisonReport:
    """Shooting versus oracle for strip n: eigenvalues and (optionally) projector kernels."""
    from .projectors import projector_kernel
    from .spectrum import eigenvalues_in_strip

    if records is None:
        records = eigenvalues_in_strip(Q, n, tol).records
    shoot = np.array([rec.value for rec in records for _ in range(rec.multiplicity)], dtype=complex)
    ext = oracle_strip(Q, n, m, projector=projector)
    notes = list(ext.warnings)
    if shoot.size == ext.eigenvalues.size and shoot.size:
        i, j = pair_eigenvalues(shoot, ext.eigenvalues)
        dev = float(np.max(np.abs(shoot[i] - ext.eigenvalues[j])))
    elif shoot.size == ext.eigenvalues.size:
        dev = 0.0
    else:
        dev = math.inf
    kdev = None
    if projector and ext.kernel is not None:
        K = projector_kernel(Q, n, grid=ext.x, tol=tol)
        kdev = float(np.max(np.abs(K.matrix - ext.kernel)))
    return ComparisonReport(n, m, int(shoot.size), int(ext.eigenvalues.size), dev, kdev, tuple(notes))
