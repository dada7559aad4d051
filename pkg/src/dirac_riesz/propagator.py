"""Fundamental matrix of J Y' + Q Y = lambda Y, Y(0) = I, and its columns.

The system is integrated in the explicit form Y' = (-lambda J + J Q) Y.
With J = diag(-iI, iI) the free part is diag(i lambda I, -i lambda I).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .integrate import integrate
from .potentials import MatrixPotential, adjoint_potential

__all__ = [
    "DEFAULT_GRID",
    "DEFAULT_TOL",
    "J_matrix",
    "a_matrix",
    "uniform_grid",
    "SolutionSamples",
    "propagate",
    "propagate_pair",
    "fundamental_matrix",
    "phi_samples",
    "psi_samples",
    "wronskian_residual",
    "free_fundamental_matrix",
]

DEFAULT_GRID = 513
DEFAULT_TOL = 1e-10
# use exp(-lambda J x) when every potential in a batch is structurally zero
EXACT_FREE = True


def J_matrix(r: int) -> np.ndarray:
    """J = (1/i) diag(I, -I)."""
    return np.diag(np.r_[np.full(r, -1j), np.full(r, 1j)])


def a_matrix(r: int) -> np.ndarray:
    """a = (I, -I)/sqrt(2), an r x 2r matrix with a a* = I."""
    return np.hstack([np.eye(r), -np.eye(r)]).astype(complex) / np.sqrt(2)


def uniform_grid(n: int = DEFAULT_GRID) -> np.ndarray:
    if n < 2:
        raise ValueError("grid needs at least the two endpoints")
    return np.linspace(0.0, 1.0, n)


def _grid(grid) -> np.ndarray:
    if grid is None:
        return uniform_grid()
    if np.isscalar(grid):
        return uniform_grid(int(grid))
    g = np.asarray(grid, dtype=float)
    if g[0] != 0.0 or g[-1] != 1.0 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must increase strictly from 0 to 1")
    return g


def propagate(
    potentials: Sequence[MatrixPotential],
    lams,
    grid,
    tol: float = DEFAULT_TOL,
    derivative: bool = False,
):
    """Batched fundamental matrices for several potentials at once.

    Parameters
    ----------
    potentials : sequence of MatrixPotential
        P potentials of equal block size r.
    lams : array_like, shape (P, L)
        Spectral parameters; row p is used with ``potentials[p]``.
    grid : array_like
        Output nodes, from 0 to 1.
    derivative : bool
        Also integrate the variational system for dY/dlambda.

    Notes
    -----
    A batch of structurally zero potentials is evaluated in closed form
    unless ``EXACT_FREE`` is false.

    Returns
    -------
    Y : ndarray, shape (len(grid), P, L, 2r, 2r)
    dY : ndarray of the same shape, or None
    err : float
        Integrator error estimate.
    """
    grid = _grid(grid)
    lams = np.atleast_2d(np.asarray(lams, dtype=complex))
    P, L = lams.shape
    if len(potentials) != P:
        raise ValueError("need one row of lambdas per potential")
    r = potentials[0].r
    d = 2 * r
    jdiag = np.r_[np.full(r, -1j), np.full(r, 1j)]
    # free part -lambda J is diagonal
    free = -lams[:, :, None] * jdiag[None, None, :]
    active = [k for k, Q in enumerate(potentials) if not Q.is_zero()]
    if not active and EXACT_FREE:
        # Y = exp(free x) and dY/dlambda = -J x Y are diagonal
        e = np.exp(grid[:, None, None, None] * free[None])
        Y = e[..., None] * np.eye(d)
        dY = (-jdiag * grid[:, None, None, None] * e)[..., None] * np.eye(d) if derivative else None
        return Y, dY, 0.0
    stops = sorted({b for Q in potentials for b in Q.breakpoints})

    def coupling(x):
        jq = np.zeros((P, 1, d, d), dtype=complex)
        for k in active:
            jq[k, 0] = potentials[k].jq(x)[0]
        return jq

    if not derivative:
        y0 = np.broadcast_to(np.eye(d, dtype=complex), (P, L, d, d))

        def rhs(x, y):
            out = free[..., None] * y
            if active:
                out += coupling(x) @ y
            return out

    else:
        y0 = np.zeros((P, L, d, 2 * d), dtype=complex)
        y0[..., :d] = np.eye(d)

        def rhs(x, y):
            out = free[..., None] * y
            if active:
                out += coupling(x) @ y
            # (dY)' = A dY - J Y
            out[..., d:] -= jdiag[:, None] * y[..., :d]
            return out

    ys, err = integrate(rhs, y0, grid, tol, stops=stops, batch_ndim=2)
    if derivative:
        return ys[..., :d], ys[..., d:], err
    return ys, None, err


def propagate_pair(Q: MatrixPotential, lams, grid, tol: float = DEFAULT_TOL):
    """Y_Q(x, lambda) and Y_{Q*}(x, conj(lambda)) in one batched pass.

    Returns arrays of shape (len(grid), L, 2r, 2r) each, plus the error estimate.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    Qs = adjoint_potential(Q)
    Y, _, err = propagate([Q, Qs], np.stack([lams, lams.conj()]), grid, tol)
    return Y[:, 0], Y[:, 1], err


@dataclass(frozen=True, eq=False)
class SolutionSamples:
    """Grid samples of Y_Q(x, lambda) and of phi_Q = Y J a*, psi_Q = Y a*."""

    lam: complex
    x: np.ndarray
    Y: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    estimated_error: float
    dY: np.ndarray | None = None


def fundamental_matrix(
    Q: MatrixPotential, lam: complex, grid=None, tol: float = DEFAULT_TOL, derivative: bool = False
) -> SolutionSamples:
    x = _grid(grid)
    if not tol > 0:
        raise ValueError("tol must be positive")
    Y, dY, err = propagate([Q], [[lam]], x, tol, derivative=derivative)
    Y = Y[:, 0, 0]
    r = Q.r
    J, a = J_matrix(r), a_matrix(r)
    astar = a.conj().T
    return SolutionSamples(
        lam=complex(lam),
        x=x,
        Y=Y,
        phi=Y @ (J @ astar),
        psi=Y @ astar,
        estimated_error=err,
        dY=None if dY is None else dY[:, 0, 0],
    )


def phi_samples(Q: MatrixPotential, lam: complex, grid=None, tol: float = DEFAULT_TOL) -> np.ndarray:
    """phi_Q(x, lambda) at the grid nodes, shape (n, 2r, r)."""
    return fundamental_matrix(Q, lam, grid, tol).phi


def psi_samples(Q: MatrixPotential, lam: complex, grid=None, tol: float = DEFAULT_TOL) -> np.ndarray:
    """psi_Q(x, lambda) at the grid nodes, shape (n, 2r, r)."""
    return fundamental_matrix(Q, lam, grid, tol).psi


def wronskian_residual(Q: MatrixPotential, lam: complex, grid=None, tol: float = DEFAULT_TOL) -> float:
    """max_x || Y_Q(x, lam) J Y_{Q*}(x, conj lam)^* - J ||.

    Y_Q and Y_{Q*} come from separate integrations, so the residual is a
    genuine accuracy certificate for the integrator.
    """
    x = _grid(grid)
    YQ, YS, _ = propagate_pair(Q, [lam], x, tol)
    J = J_matrix(Q.r)
    W = YQ[:, 0] @ J @ np.conj(np.swapaxes(YS[:, 0], -1, -2))
    return float(np.max(np.linalg.norm(W - J, ord=2, axis=(1, 2))))


def free_fundamental_matrix(r: int, lam, x) -> np.ndarray:
    """Closed form diag(e^{i lam x} I, e^{-i lam x} I), shape (len(x), 2r, 2r)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    e = np.exp(1j * lam * x)
    out = np.zeros((x.size, 2 * r, 2 * r), dtype=complex)
    idx = np.arange(r)
    out[:, idx, idx] = e[:, None]
    out[:, idx + r, idx + r] = 1.0 / e[:, None]
    return out
