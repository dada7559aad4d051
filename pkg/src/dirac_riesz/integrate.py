"""Batched adaptive Dormand-Prince 8(5,3) integration of linear ODEs.

All members of a batch share one step sequence; the step is controlled by
the worst member.  This is what makes contour work cheap: a whole circle of
spectral parameters is integrated with one pass of numpy array operations.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import DOP853 as _DOP853

_A = np.asarray(_DOP853.A[: _DOP853.n_stages, : _DOP853.n_stages])
_B = np.asarray(_DOP853.B)
_C = np.asarray(_DOP853.C[: _DOP853.n_stages])
_E3 = np.asarray(_DOP853.E3)
_E5 = np.asarray(_DOP853.E5)
_NS = _DOP853.n_stages

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegrationError(RuntimeError):
    """Step size underflow or non-finite values during integration."""


def integrate(rhs, y0, nodes, tol, stops=(), h0=None, batch_ndim=None, max_steps=200_000):
    """Integrate ``y' = rhs(x, y)`` from ``nodes[0]`` and sample at ``nodes``.

    Parameters
    ----------
    rhs : callable
        ``rhs(x, y)`` with scalar ``x`` and an array ``y`` shaped like ``y0``.
    y0 : ndarray
        Initial value.  The leading ``batch_ndim`` axes are batch axes; the
        error norm is taken over the remaining axes and maximised over the
        batch.
    nodes : array_like
        Increasing output abscissae, ``nodes[0]`` being the initial point.
    tol : float
        Used as both relative and absolute tolerance.
    stops : iterable of float
        Extra points that steps must land on (kinks of the coefficients).

    Returns
    -------
    ys : ndarray, shape ``(len(nodes),) + y0.shape``
    err : float
        Sum of accepted local error estimates (a rough global error bound).
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 1 or np.any(np.diff(nodes) <= 0):
        raise ValueError("nodes must be a strictly increasing 1-d sequence")
    y = np.array(y0, dtype=complex)
    if batch_ndim is None:
        batch_ndim = max(y.ndim - 2, 0)
    n_comp = int(np.prod(y.shape[batch_ndim:])) or 1
    axes = tuple(range(batch_ndim, y.ndim))

    x0, x1 = nodes[0], nodes[-1]
    targets = np.unique(np.concatenate([nodes, [s for s in stops if x0 < s < x1]]))
    is_output = np.isin(targets, nodes)

    out = np.empty((nodes.size,) + y.shape, dtype=complex)
    out[0] = y
    k_out = 1
    if nodes.size == 1:
        return out, 0.0

    K = np.empty((_NS + 1,) + y.shape, dtype=complex)
    # flat view: stage combinations become small matrix products
    Kf = K.reshape(_NS + 1, -1)
    shape = y.shape
    x = x0
    K[0] = rhs(x, y)
    if h0 is None:
        scale = np.max(np.abs(K[0])) / (np.max(np.abs(y)) + 1e-300)
        h0 = 0.05 / (1.0 + scale)
    h = min(h0, x1 - x0)
    err_total = 0.0
    steps = 0

    for ti in range(1, targets.size):
        xt = targets[ti]
        while x < xt:
            steps += 1
            if steps > max_steps:
                raise IntegrationError("maximum number of steps exceeded")
            clipped = h >= xt - x
            hh = xt - x if clipped else h
            for s in range(1, _NS):
                dy = (_A[s, :s] @ Kf[:s]).reshape(shape)
                K[s] = rhs(x + _C[s] * hh, y + hh * dy)
            y_new = y + hh * (_B @ Kf[:_NS]).reshape(shape)
            K[_NS] = rhs(x + hh, y_new)

            scale = tol + np.maximum(np.abs(y), np.abs(y_new)) * tol
            with np.errstate(invalid="ignore", divide="ignore"):
                err5 = (_E5 @ Kf).reshape(shape) / scale
                err3 = (_E3 @ Kf).reshape(shape) / scale
                e5 = np.sum(np.abs(err5) ** 2, axis=axes)
                e3 = np.sum(np.abs(err3) ** 2, axis=axes)
                denom = e5 + 0.01 * e3
                # NaN must reach err_norm, so only an exact zero is masked
                en = np.where(denom == 0, 0.0, hh * e5 / np.sqrt(denom * n_comp))
            err_norm = float(np.max(en))
            if not np.isfinite(err_norm):
                raise IntegrationError(f"non-finite values near x={x:.6g}")

            if err_norm <= 1.0:
                x = xt if clipped else x + hh
                y = y_new
                K[0] = K[_NS]
                err_total += err_norm * tol
                factor = MAX_FACTOR if err_norm == 0 else min(MAX_FACTOR, SAFETY * err_norm ** -0.125)
                h_next = hh * factor
                # A step shortened to hit a target should not shrink the next one.
                h = max(h, h_next) if clipped else h_next
            else:
                h = hh * max(MIN_FACTOR, SAFETY * err_norm ** -0.125)
                if h < 1e-14 * max(1.0, abs(x)):
                    raise IntegrationError(f"step size underflow near x={x:.6g}")
        if is_output[ti]:
            out[k_out] = y
            k_out += 1
    return out, err_total
