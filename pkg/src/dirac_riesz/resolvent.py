"""The resolvent (T_Q - lambda)^{-1} through its explicit kernel.

    (T_Q - lambda)^{-1} f = phi_Q m_Q(lambda) int_0^1 phi_{Q*}(t, conj lambda)^* f dt
                            + T_Q(lambda) f,

where the entire part is

    [T_Q(lambda) f](x) = psi_Q(x) int_0^x phi_{Q*}(t)^* f dt
                         + phi_Q(x) int_x^1 psi_{Q*}(t)^* f dt.
"""

from __future__ import annotations

import numpy as np

from .characteristic import _m_from
from .gridfunc import GridFunction, cumulative_integral, derivative, quadrature_weights
from .potentials import MatrixPotential
from .propagator import DEFAULT_TOL, J_matrix, a_matrix, propagate_pair

__all__ = [
    "Resolvent",
    "entire_part_apply",
    "resolvent_apply",
    "resolvent_residual",
    "boundary_defect",
]


def _h(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


class Resolvent:
    """Solutions for Q at lambda and Q* at conj(lambda), prepared once per grid."""

    def __init__(self, Q: MatrixPotential, lam: complex, grid, tol: float = DEFAULT_TOL):
        self.Q = Q
        self.lam = complex(lam)
        self.x = np.asarray(grid, dtype=float)
        self.weights = quadrature_weights(self.x)
        r = Q.r
        a = a_matrix(r)
        astar = a.conj().T
        Ja = J_matrix(r) @ astar
        YQ, YS, _ = propagate_pair(Q, [lam], self.x, tol)
        YQ, YS = YQ[:, 0], YS[:, 0]
        self.phi, self.psi = YQ @ Ja, YQ @ astar
        # adjoints of the Q* solutions, shape (n, r, 2r)
        self.phi_s_h, self.psi_s_h = _h(YS @ Ja), _h(YS @ astar)
        s1, c1 = a @ self.phi[-1], a @ self.psi[-1]
        self._s, self._c = s1, c1
        self._m = None

    @property
    def m(self) -> np.ndarray:
        if self._m is None:
            self._m = _m_from(self._s[None], self._c[None], [self.lam])[0]
        return self._m

    def _values(self, f):
        v = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=complex)
        if v.shape[0] != self.x.size:
            raise ValueError("grid function does not live on the resolvent grid")
        return v

    def entire_part(self, f):
        """T_Q(lambda) f; accepts values of shape (n, 2r) or (n, 2r, k)."""
        v = self._values(f)
        vec = v.ndim == 2
        if vec:
            v = v[..., None]
        lower = cumulative_integral(self.phi_s_h @ v, self.x)
        upper_all = cumulative_integral(self.psi_s_h @ v, self.x)
        upper = upper_all[-1] - upper_all
        g = self.psi @ lower + self.phi @ upper
        return g[..., 0] if vec else g

    def apply(self, f):
        v = self._values(f)
        vec = v.ndim == 2
        if vec:
            v = v[..., None]
        total = np.einsum("i,iab->ab", self.weights, self.phi_s_h @ v)
        g = self.entire_part(v) + self.phi @ (self.m @ total)
        return g[..., 0] if vec else g


def entire_part_apply(Q: MatrixPotential, lam: complex, f: GridFunction, tol: float = DEFAULT_TOL) -> GridFunction:
    R = Resolvent(Q, lam, f.x, tol)
    return GridFunction(f.x, R.entire_part(f))


def resolvent_apply(Q: MatrixPotential, lam: complex, f: GridFunction, tol: float = DEFAULT_TOL) -> GridFunction:
    """g = (T_Q - lambda)^{-1} f.

    Raises SingularCharacteristicMatrix when lambda is an eigenvalue.
    """
    R = Resolvent(Q, lam, f.x, tol)
    return GridFunction(f.x, R.apply(f))


def boundary_defect(g: GridFunction) -> tuple[float, float]:
    """(|g1(0) - g2(0)|, |g1(1) - g2(1)|) in the Euclidean norm of C^r."""
    r = g.dim // 2
    v = g.values
    return (
        float(np.linalg.norm(v[0, :r] - v[0, r:])),
        float(np.linalg.norm(v[-1, :r] - v[-1, r:])),
    )


def resolvent_residual(Q: MatrixPotential, lam: complex, f: GridFunction, g: GridFunction | None = None,
                       tol: float = DEFAULT_TOL) -> float:
    """Relative residual ||J g' + Q g - lambda g - f|| / ||f|| of g = R(lambda) f.

    g' uses fourth-order differences with one-sided closures.
    """
    if g is None:
        g = resolvent_apply(Q, lam, f, tol)
    J = J_matrix(Q.r)
    v = g.values
    res = derivative(v, g.x) @ J.T + np.einsum("nij,nj->ni", Q(g.x), v) - lam * v - f.values
    fn = f.norm()
    return GridFunction(g.x, res).norm() / (fn if fn > 0 else 1.0)
