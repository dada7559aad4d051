"""Riesz projectors of T_Q as Nyström-discretised integral kernels.

The resolvent is phi_Q m_Q Phi_{Q*}^* plus an entire part; only the first
term survives a closed contour integral, so

    P(x, t) = -(1/2 pi i) oint phi_Q(x, lam) m_Q(lam) phi_{Q*}(t, conj lam)^* dlam

is computed by the trapezoidal rule in angle on a circle.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import zipfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, svds

from .characteristic import SingularCharacteristicMatrix, _m_from
from .gridfunc import check_uniform, quadrature_weights
from .potentials import MatrixPotential, is_self_adjoint
from .propagator import DEFAULT_TOL, J_matrix, a_matrix, propagate, propagate_pair, uniform_grid
from .spectrum import ContourSpec, EigenvalueRecord, Spectrum, eigenvalues_in_strip

log = logging.getLogger(__name__)

__all__ = [
    "DEFAULT_KERNEL_GRID",
    "ContourTooCloseToEigenvalue",
    "ProjectorKernel",
    "free_projector_kernel",
    "contour_kernel",
    "projector_kernel",
    "projector_for_eigenvalue",
    "op_norm",
    "hs_norm",
    "kernel_rank",
    "export_kernel",
]

DEFAULT_KERNEL_GRID = 257
DEFAULT_NODES = 64
MAX_NODES = 1024
NODE_TOL = 1e-8
SEPARATION = 0.05


class ContourTooCloseToEigenvalue(ValueError):
    """The integration circle passes too close to (or encloses the wrong) eigenvalues."""


@dataclass(frozen=True, eq=False)
class ProjectorKernel:
    """Kernel K(x_i, t_j) stored as an (n 2r) x (n 2r) matrix.

    Row ``i * 2r + a`` and column ``j * 2r + b`` hold K(x_i, x_j)[a, b].
    """

    x: np.ndarray
    weights: np.ndarray
    matrix: np.ndarray
    r: int
    label: str = ""
    strip: int | None = None
    eigenvalue: complex | None = None
    nodes: int = 0
    quad_error: float = 0.0

    @property
    def n(self) -> int:
        return self.x.size

    def blocks(self) -> np.ndarray:
        """Kernel as an array of shape (n, 2r, n, 2r)."""
        d = 2 * self.r
        return self.matrix.reshape(self.n, d, self.n, d)

    def _w(self) -> np.ndarray:
        return np.repeat(self.weights, 2 * self.r)

    def nystrom(self) -> np.ndarray:
        """Matrix acting on node values: (K f)(x_i) = sum_j K(x_i, x_j) w_j f(x_j)."""
        return self.matrix * self._w()[None, :]

    def symmetrized(self) -> np.ndarray:
        """W^{1/2} K W^{1/2}; its singular values approximate the operator's."""
        s = np.sqrt(self._w())
        return s[:, None] * self.matrix * s[None, :]

    def apply(self, f) -> np.ndarray:
        v = np.asarray(getattr(f, "values", f), dtype=complex)
        shp = v.shape
        return (self.nystrom() @ v.reshape(self.n * 2 * self.r, -1)).reshape(shp)

    def compose(self, other: "ProjectorKernel") -> "ProjectorKernel":
        """Kernel of the product operator self o other."""
        self._check(other)
        return self._like(self.nystrom() @ other.matrix, f"({self.label})o({other.label})")

    def trace(self) -> complex:
        d = 2 * self.r
        diag = np.einsum("iaia->i", self.blocks()) if d else 0
        return complex(np.dot(self.weights, diag))

    def _check(self, other):
        if other.r != self.r or other.x.shape != self.x.shape or not np.allclose(other.x, self.x):
            raise ValueError("kernels live on different grids")

    def _like(self, matrix, label):
        return ProjectorKernel(self.x, self.weights, matrix, self.r, label)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.matrix - other.matrix, f"{self.label}-{other.label}")

    def __add__(self, other):
        self._check(other)
        return self._like(self.matrix + other.matrix, f"{self.label}+{other.label}")


def _kernel_grid(grid) -> np.ndarray:
    if grid is None:
        return uniform_grid(DEFAULT_KERNEL_GRID)
    if np.isscalar(grid):
        return uniform_grid(int(grid))
    x = np.asarray(grid, dtype=float)
    check_uniform(x)
    return x


def op_norm(K: ProjectorKernel) -> float:
    """Largest singular value of W^{1/2} K W^{1/2}."""
    A = K.symmetrized()
    if not np.any(A):
        return 0.0
    if A.shape[0] > 400:
        # Lanczos for the top singular value; fixed start vector for reproducibility
        try:
            sv = svds(A, k=1, return_singular_vectors=False, v0=np.ones(A.shape[0], dtype=A.dtype), tol=1e-12)
            return float(sv[0])
        except ArpackNoConvergence:
            log.info("svds did not converge; falling back to a full SVD")
    return float(np.linalg.svd(A, compute_uv=False)[0])


def hs_norm(K: ProjectorKernel) -> float:
    """(int int ||K(x, t)||_F^2 dx dt)^{1/2}."""
    return float(np.linalg.norm(K.symmetrized()))


def kernel_rank(K: ProjectorKernel, tol: float = 1e-6) -> int:
    sv = np.linalg.svd(K.symmetrized(), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def free_projector_kernel(n: int, grid=None, r: int = 1) -> ProjectorKernel:
    """Closed-form projector of T_0 onto the eigenvalue pi n.

    P(x, t) = 1/2 [[e^{i pi n (x-t)} I, e^{i pi n (x+t)} I],
                   [e^{-i pi n (x+t)} I, e^{-i pi n (x-t)} I]].
    """
    x = _kernel_grid(grid)
    k = math.pi * n
    X, T = x[:, None], x[None, :]
    blk = np.empty((x.size, 2, x.size, 2), dtype=complex)
    blk[:, 0, :, 0] = np.exp(1j * k * (X - T))
    blk[:, 0, :, 1] = np.exp(1j * k * (X + T))
    blk[:, 1, :, 0] = np.exp(-1j * k * (X + T))
    blk[:, 1, :, 1] = np.exp(-1j * k * (X - T))
    blk *= 0.5
    # Kronecker with I_r
    d = 2 * r
    full = np.zeros((x.size, d, x.size, d), dtype=complex)
    for p in range(2):
        for q in range(2):
            for i in range(r):
                full[:, p * r + i, :, q * r + i] = blk[:, p, :, q]
    return ProjectorKernel(
        x, quadrature_weights(x), full.reshape(x.size * d, x.size * d), r,
        label=f"P0[{n}]", strip=n, eigenvalue=complex(k), nodes=0,
    )


def _conjugate_permutation(lams: np.ndarray) -> np.ndarray | None:
    """Index map k -> j with lams[j] = conj(lams[k]), or None if there is none."""
    dist = np.abs(lams[None, :] - np.conj(lams)[:, None])
    perm = np.argmin(dist, axis=1)
    if np.max(dist[np.arange(lams.size), perm]) > 1e-13 * max(1.0, float(np.max(np.abs(lams)))):
        return None
    return perm


def _contour_terms(Q: MatrixPotential, lams: np.ndarray, x: np.ndarray, tol: float):
    """U (L, N, r) and V (L, r, N) with  phi m phi*^* = U_l V_l  at each lambda."""
    r = Q.r
    a = a_matrix(r)
    astar = a.conj().T
    Ja = J_matrix(r) @ astar
    mirror = _conjugate_permutation(lams) if is_self_adjoint(Q) else None
    if mirror is None:
        YQ, YS, _ = propagate_pair(Q, lams, x, tol)
    else:
        # Q* = Q and the nodes are closed under conjugation: Y_{Q*}(., conj lam_k) = Y_Q(., lam_mirror[k])
        YQ = propagate([Q], lams[None], x, tol)[0][:, 0]
        YS = YQ[:, mirror]
    phi = YQ @ Ja  # (n, L, 2r, r)
    s, c = a @ phi[-1], a @ (YQ[-1] @ astar)
    try:
        m = _m_from(s, c, lams)
    except SingularCharacteristicMatrix as exc:
        raise ContourTooCloseToEigenvalue(str(exc)) from exc
    phis = YS @ Ja
    n, L = x.size, lams.size
    U = np.transpose(phi @ m[None], (1, 0, 2, 3)).reshape(L, n * 2 * r, r)
    V = np.transpose(np.conj(phis), (1, 3, 0, 2)).reshape(L, r, n * 2 * r)
    return U, V


def _assemble(U, V, w):
    L, N, r = U.shape
    Uw = (U * (-w)[:, None, None]).transpose(1, 0, 2).reshape(N, L * r)
    return Uw @ V.reshape(L * r, N)


def contour_kernel(
    Q: MatrixPotential,
    contour: ContourSpec,
    grid=None,
    tol: float = DEFAULT_TOL,
    node_tol: float = NODE_TOL,
    max_nodes: int = MAX_NODES,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """-(1/2 pi i) oint phi m phi*^* on a circle, doubling nodes to convergence.

    Returns (x, matrix, nodes used, last change).  Nodes nest under doubling,
    so each level only integrates the new half.
    """
    x = _kernel_grid(grid)
    M = contour.nodes
    theta = 2 * np.pi * np.arange(M) / M
    lams = contour.center + contour.radius * np.exp(1j * theta)
    U, V = _contour_terms(Q, lams, x, tol)
    K = _assemble(U, V, contour.radius * np.exp(1j * theta) / M)
    change = math.inf
    while M < max_nodes:
        th_new = 2 * np.pi * (2 * np.arange(M) + 1) / (2 * M)
        ln = contour.center + contour.radius * np.exp(1j * th_new)
        Un, Vn = _contour_terms(Q, ln, x, tol)
        U = np.stack([U, Un], axis=1).reshape((2 * M,) + U.shape[1:])
        V = np.stack([V, Vn], axis=1).reshape((2 * M,) + V.shape[1:])
        theta = np.stack([theta, th_new], axis=1).ravel()
        M *= 2
        K_new = _assemble(U, V, contour.radius * np.exp(1j * theta) / M)
        change = float(np.max(np.abs(K_new - K)))
        K = K_new
        if change < node_tol:
            break
    else:
        log.warning("contour nodes capped at %d (change %.2e)", M, change)
    return x, K, M, change


def _margin(radius: float) -> float:
    # absolute gap, shrunk for the small circles around close eigenvalues
    return min(SEPARATION, 0.25 * radius)


def _check_separation(center, radius, inside: Sequence[complex], others: Iterable[complex]):
    gap = _margin(radius)
    for z in inside:
        if abs(z - center) > radius - gap:
            raise ContourTooCloseToEigenvalue(
                f"eigenvalue {z:.6g} is not well inside |lam - {center:.6g}| = {radius:g}"
            )
    for z in others:
        if abs(z - center) < radius + gap:
            raise ContourTooCloseToEigenvalue(
                f"eigenvalue {z:.6g} is inside or too close to |lam - {center:.6g}| = {radius:g}"
            )


def projector_for_eigenvalue(
    Q: MatrixPotential,
    record: EigenvalueRecord,
    radius: float,
    grid=None,
    nodes: int = DEFAULT_NODES,
    others: Iterable[complex] = (),
    tol: float = DEFAULT_TOL,
) -> ProjectorKernel:
    """Riesz projector onto one eigenvalue (its root subspace).

    ``others`` lists the remaining known eigenvalues; none may lie within
    the circle or near it.
    """
    _check_separation(record.value, radius, [], [z for z in others if z != record.value])
    x, K, M, change = contour_kernel(Q, ContourSpec(record.value, radius, nodes), grid, tol)
    return ProjectorKernel(
        x, quadrature_weights(x), K, Q.r, label=f"P[{record.value:.6g}]",
        strip=record.strip, eigenvalue=record.value, nodes=M, quad_error=change,
    )


def _neighbour_records(Q, n, spectrum: Spectrum | None, tol) -> dict[int, tuple[EigenvalueRecord, ...]]:
    out = {}
    for k in (n - 1, n, n + 1):
        if spectrum is not None and k in spectrum.strips:
            out[k] = spectrum.strips[k].records
        else:
            out[k] = eigenvalues_in_strip(Q, k, tol).records
    return out


def projector_kernel(
    Q: MatrixPotential,
    n: int,
    grid=None,
    nodes: int = DEFAULT_NODES,
    spectrum: Spectrum | None = None,
    tol: float = DEFAULT_TOL,
) -> ProjectorKernel:
    """Spectral projector of T_Q for the strip Delta_n.

    Uses the unit circle around pi n when it cleanly separates the strip's
    eigenvalues; otherwise sums the projectors of the individual eigenvalues
    in the strip, each on a circle of 0.4 times the distance to its nearest
    neighbour.
    """
    x = _kernel_grid(grid)
    c = complex(math.pi * n)
    if spectrum is not None and n in spectrum.strips:
        recs = spectrum.strips[n].records
    else:
        recs = eigenvalues_in_strip(Q, n, tol).records
    if all(abs(rec.value - c) <= 1 - SEPARATION for rec in recs):
        # Eigenvalues outside Delta_n are at least pi/2 - 1 away from this circle.
        x, K, M, change = contour_kernel(Q, ContourSpec(c, 1.0, nodes), x, tol)
        return ProjectorKernel(
            x, quadrature_weights(x), K, Q.r, label=f"P[{n}]", strip=n,
            nodes=M, quad_error=change,
        )
    log.info("strip %d: eigenvalues off the unit circle, summing per-eigenvalue projectors", n)
    neigh = _neighbour_records(Q, n, spectrum, tol)
    everything = [rec.value for rs in neigh.values() for rec in rs]
    total = np.zeros((x.size * 2 * Q.r,) * 2, dtype=complex)
    M_used, err = 0, 0.0
    for rec in recs:
        dist = min((abs(rec.value - z) for z in everything if z != rec.value), default=2.0)
        radius = min(1.0, 0.4 * dist)
        P = projector_for_eigenvalue(Q, rec, radius, x, nodes, everything, tol)
        total += P.matrix
        M_used = max(M_used, P.nodes)
        err += P.quad_error
    return ProjectorKernel(
        x, quadrature_weights(x), total, Q.r, label=f"P[{n}]", strip=n,
        nodes=M_used, quad_error=err,
    )


def export_kernel(K: ProjectorKernel, path, fmt: str = "npz") -> Path:
    """Dump grid, weights and kernel blocks.

    ``npz``: arrays ``x``, ``weights`` and ``kernel`` of shape
    (n, 2r, n, 2r, 2) with real and imaginary parts interleaved last.
    ``csv``: header rows for x and weights, then one row per node pair
    with the 2r x 2r block flattened row-major as re, im pairs.
    """
    path = Path(path)
    blocks = K.blocks()
    if fmt == "npz":
        arrays = {"x": K.x, "weights": K.weights,
                  "kernel": np.stack([blocks.real, blocks.imag], axis=-1)}
        # fixed zip timestamps keep repeated dumps byte-identical
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            for name, arr in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.ascontiguousarray(arr), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())
        return path
    if fmt != "csv":
        raise ValueError(f"unknown kernel export format {fmt!r}")
    d = 2 * K.r
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [repr(float(v)) for v in K.x])
        w.writerow(["weights"] + [repr(float(v)) for v in K.weights])
        head = ["i", "j"]
        for a in range(d):
            for b in range(d):
                head += [f"re{a}{b}", f"im{a}{b}"]
        w.writerow(head)
        for i in range(K.n):
            for j in range(K.n):
                blk = blocks[i, :, j, :].ravel()
                row = [i, j]
                for v in blk:
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)
    return path
