"""Bari-Markus decay tables, the band-limited sum estimate and contour bounds."""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .characteristic import evaluate
from .potentials import MatrixPotential
from .projectors import (
    DEFAULT_KERNEL_GRID,
    DEFAULT_NODES,
    free_projector_kernel,
    hs_norm,
    op_norm,
    projector_kernel,
)
from .propagator import DEFAULT_TOL
from .spectrum import Spectrum, compute_spectrum

__all__ = [
    "BariMarkusReport",
    "bari_markus_table",
    "BandLimitedFunction",
    "LemmaASum",
    "lemma_A_sum",
    "ContourBoundsReport",
    "contour_bounds_check",
    "ContourBoundsScan",
    "contour_bounds_scan",
]


def _fmt(v: float) -> str:
    return repr(float(v))


# --- Bari-Markus ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BariMarkusReport:
    """Distances d_n = ||P_n - P_n^0|| for |n| <= N_max.

    ``partial_sums[N]`` is S_N = sum_{|n|<=N} d_n^2 and
    ``deviation_partial_sums[N]`` the same for the strip deviations
    sum_{lambda in strip n} |lambda - pi n|^2 (with multiplicity).
    """

    N_max: int
    r: int
    d: dict[int, float]
    hs_d: dict[int, float]
    strip_deviation: dict[int, float]
    partial_sums: tuple[float, ...]
    deviation_partial_sums: tuple[float, ...]
    grid: int
    contour_nodes: int
    tol: float
    label: str = ""
    quad_errors: dict[int, float] = field(default_factory=dict)

    @property
    def strips(self) -> list[int]:
        return sorted(self.d)

    def tail_ratio(self, N: int, sums: Sequence[float] | None = None) -> float:
        """(S_N - S_{N/2}) / S_{N/2}; 0 when S_{N/2} vanishes."""
        S = self.partial_sums if sums is None else sums
        base = S[N // 2]
        return 0.0 if base == 0 else (S[N] - base) / base

    def rows(self) -> list[dict]:
        out = []
        for n in self.strips:
            out.append({
                "n": n,
                "d_n": self.d[n],
                "hs_d_n": self.hs_d[n],
                "S_n": self.partial_sums[abs(n)],
                "strip_deviation": self.strip_deviation[n],
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["n", "d_n", "hs_d_n", "S_n", "strip_deviation"]
        w.writerow(cols)
        for row in self.rows():
            w.writerow([row["n"]] + [_fmt(row[c]) for c in cols[1:]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "r": self.r,
            "N_max": self.N_max,
            "grid": self.grid,
            "contour_nodes": self.contour_nodes,
            "tol": self.tol,
            "rows": self.rows(),
            "partial_sums": list(self.partial_sums),
            "deviation_partial_sums": list(self.deviation_partial_sums),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def bari_markus_table(
    Q: MatrixPotential,
    N_max: int,
    grid: int = DEFAULT_KERNEL_GRID,
    M: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
    spectrum: Spectrum | None = None,
) -> BariMarkusReport:
    """Projector distances and their partial sums for |n| <= N_max.

    The spectrum is located for |n| <= N_max + 1 so that strips needing
    per-eigenvalue contours know their neighbours.
    """
    if N_max < 0:
        raise ValueError("N_max must be non-negative")
    need = range(-N_max - 1, N_max + 2)
    if spectrum is None:
        spectrum = compute_spectrum(Q, need, tol)
    else:
        missing = [n for n in need if n not in spectrum.strips]
        if missing:
            extra = compute_spectrum(Q, missing, tol)
            spectrum = Spectrum(Q.r, {**spectrum.strips, **extra.strips}, spectrum.label)
    d, hs, dev, qerr = {}, {}, {}, {}
    for n in range(-N_max, N_max + 1):
        K = projector_kernel(Q, n, grid, M, spectrum=spectrum, tol=tol)
        diff = K - free_projector_kernel(n, grid, Q.r)
        d[n] = op_norm(diff)
        hs[n] = hs_norm(diff)
        qerr[n] = K.quad_error
        dev[n] = float(sum(rec.multiplicity * abs(rec.value - math.pi * n) ** 2
                           for rec in spectrum.strips[n].records))
    S, D = [], []
    for N in range(N_max + 1):
        ns = [0] if N == 0 else [-N, N]
        prevS, prevD = (S[-1], D[-1]) if S else (0.0, 0.0)
        S.append(prevS + sum(d[k] ** 2 for k in ns))
        D.append(prevD + sum(dev[k] for k in ns))
    return BariMarkusReport(
        N_max=N_max, r=Q.r, d=d, hs_d=hs, strip_deviation=dev,
        partial_sums=tuple(S), deviation_partial_sums=tuple(D),
        grid=int(grid), contour_nodes=int(M), tol=float(tol),
        label=Q.label, quad_errors=qerr,
    )


# --- band-limited sums ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BandLimitedFunction:
    """f(t) = sum_j coeffs[j] e^{i pi modes[j] t} / sqrt(2) on (-1, 1), r x r valued."""

    modes: np.ndarray
    coeffs: np.ndarray
    closed_form: Callable | None = None

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=int).ravel()
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim != 3 or coeffs.shape[0] != modes.size or coeffs.shape[1] != coeffs.shape[2]:
            raise ValueError("coeffs must have shape (len(modes), r, r)")
        if np.unique(modes).size != modes.size:
            raise ValueError("modes must be distinct")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def r(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def constant(cls, matrix) -> "BandLimitedFunction":
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls([0], math.sqrt(2) * m[None], closed_form=lambda t: np.broadcast_to(m, np.shape(t) + m.shape))

    @classmethod
    def random(cls, rng: np.random.Generator, r: int, n_modes: int, max_mode: int = 32) -> "BandLimitedFunction":
        modes = rng.choice(np.arange(-max_mode, max_mode + 1), size=n_modes, replace=False)
        coeffs = rng.standard_normal((n_modes, r, r)) + 1j * rng.standard_normal((n_modes, r, r))
        return cls(np.sort(modes), coeffs[np.argsort(modes)])

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        e = np.exp(1j * np.pi * np.multiply.outer(t, self.modes)) / math.sqrt(2)
        return np.tensordot(e, self.coeffs, axes=([-1], [0]))

    @functools.cached_property
    def norm_squared(self) -> float:
        return self.l2_norm_squared()

    def l2_norm_squared(self, panels: int | None = None) -> float:
        """int_{-1}^{1} ||f(t)||^2 dt with the spectral norm of M_r."""
        if self.r == 1:
            return float(np.sum(np.abs(self.coeffs) ** 2))
        if panels is None:
            panels = max(64, 4 * int(np.max(np.abs(self.modes), initial=0)))
        xg, wg = np.polynomial.legendre.leggauss(16)
        edges = np.linspace(-1.0, 1.0, panels + 1)
        h = np.diff(edges) / 2
        t = (edges[:-1, None] + h[:, None] * (xg[None, :] + 1)).ravel()
        w = (h[:, None] * wg[None, :]).ravel()
        vals = np.linalg.norm(self(t), ord=2, axis=(-2, -1))
        return float(np.dot(w, vals ** 2))

    def apply_A(self, lams) -> np.ndarray:
        """A(lambda) f = (1/sqrt 2) int e^{i lambda t} f(t) dt, exactly, shape (L, r, r)."""
        from .characteristic import band_limited_apply

        return band_limited_apply(self.coeffs, self.modes, lams)


def _spectral_norm_sq(A: np.ndarray) -> np.ndarray:
    """Squared largest singular value of a stack of small square matrices."""
    r = A.shape[-1]
    if r == 1:
        return np.abs(A[..., 0, 0]) ** 2
    if r == 2:
        fro = np.sum(np.abs(A) ** 2, axis=(-2, -1))
        det = np.abs(A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]) ** 2
        return 0.5 * (fro + np.sqrt(np.maximum(fro ** 2 - 4 * det, 0.0)))
    G = np.conj(np.swapaxes(A, -1, -2)) @ A
    return np.linalg.eigvalsh(G)[..., -1]


@dataclass(frozen=True)
class LemmaASum:
    sum: float
    bound: float
    ratio: float
    N_trunc: int


def lemma_A_sum(f: BandLimitedFunction, lam: complex, N_trunc: int = 10_000) -> LemmaASum:
    """sum_{|n| <= N_trunc} ||A(pi n + lambda) f||^2 against 9 r ||f||^2.

    Uses sin(pi k + lambda) = (-1)^k sin(lambda), so

        A(pi n + lambda) f = sin(lambda) sum_j (-1)^{n+j} F_j / (pi (n + j) + lambda).
    """
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise ValueError(f"lambda must lie on the unit circle, got |lambda| = {abs(lam):.15g}")
    if N_trunc < 100:
        raise ValueError("N_trunc must be at least 100")
    n = np.arange(-N_trunc, N_trunc + 1)
    # fold (-1)^j into the coefficients and (-1)^n into the row factor
    Fj = f.coeffs * np.where(f.modes % 2 == 0, 1.0, -1.0)[:, None, None]
    den = np.pi * (n[:, None] + f.modes[None, :]) + lam
    w = np.conj(den) / (den.real ** 2 + den.imag ** 2)
    A = (w @ Fj.reshape(f.modes.size, -1)).reshape(n.size, f.r, f.r)
    sq = _spectral_norm_sq(A) * abs(np.sin(lam)) ** 2
    total = float(np.sum(sq))
    bound = 9.0 * f.r * f.norm_squared
    ratio = 0.0 if bound == 0 else total / bound
    return LemmaASum(total, bound, ratio, int(N_trunc))


# --- contour bounds ---------------------------------------------------------------


SIN_BOUND = 0.5
COT_BOUND = math.sqrt(3.0)
S_INV_BOUND = 4.0
A_BOUND = 0.25


@dataclass(frozen=True)
class ContourBoundsReport:
    n: int
    M: int
    min_sin: float
    max_cot: float
    max_s_inv: float
    max_s_minus_sin: float

    @property
    def sin_ok(self) -> bool:
        return self.min_sin >= SIN_BOUND

    @property
    def cot_ok(self) -> bool:
        return self.max_cot <= COT_BOUND

    @property
    def s_inv_ok(self) -> bool:
        return self.max_s_inv <= S_INV_BOUND

    @property
    def a_ok(self) -> bool:
        return self.max_s_minus_sin < A_BOUND


def _circle(n: int, M: int) -> np.ndarray:
    theta = 2 * np.pi * np.arange(M) / M
    return np.pi * n + np.exp(1j * theta)


def _bounds_from(n, M, lams, s) -> ContourBoundsReport:
    sin = np.sin(lams)
    cot = np.cos(lams) / sin
    r = s.shape[-1]
    sv = np.linalg.svd(s, compute_uv=False)
    dev = np.linalg.norm(s - sin[:, None, None] * np.eye(r), ord=2, axis=(-2, -1))
    smin = sv[:, -1]
    s_inv = math.inf if np.any(smin == 0) else float(np.max(1.0 / smin))
    return ContourBoundsReport(
        n=n, M=M, min_sin=float(np.min(np.abs(sin))), max_cot=float(np.max(np.abs(cot))),
        max_s_inv=s_inv, max_s_minus_sin=float(np.max(dev)),
    )


def contour_bounds_check(Q: MatrixPotential, n: int, M: int = 256, tol: float = DEFAULT_TOL) -> ContourBoundsReport:
    """Sample the unit circle around pi n and report the contour estimates.

    ``max_s_minus_sin`` is ||s_Q - sin I||, which equals ||A(lambda) f_1||.
    """
    if M < 64:
        raise ValueError("need at least 64 contour samples")
    lams = _circle(n, M)
    return _bounds_from(n, M, lams, evaluate(Q, lams, tol=tol).s)


@dataclass(frozen=True)
class ContourBoundsScan:
    """Contour reports for |n| <= N and the threshold N_hat.

    N_hat is the smallest N >= 0 such that ||s_Q - sin I|| < 1/4 on every
    scanned circle with |n| > N (``None`` if it fails at the outermost ones).
    """

    reports: dict[int, ContourBoundsReport]
    threshold: int | None

    def s_inv_ok_beyond_threshold(self) -> bool:
        if self.threshold is None:
            return False
        return all(rep.s_inv_ok for n, rep in self.reports.items() if abs(n) > self.threshold)


def contour_bounds_scan(Q: MatrixPotential, N: int, M: int = 256, tol: float = DEFAULT_TOL,
                        batch: int = 8) -> ContourBoundsScan:
    ns = list(range(-N, N + 1))
    reports = {}
    for i in range(0, len(ns), batch):
        chunk = ns[i:i + batch]
        lams = np.concatenate([_circle(n, M) for n in chunk])
        s = evaluate(Q, lams, tol=tol).s.reshape(len(chunk), M, Q.r, Q.r)
        for k, n in enumerate(chunk):
            reports[n] = _bounds_from(n, M, lams[k * M:(k + 1) * M], s[k])
    threshold = None
    for T in range(N, -1, -1):
        if all(rep.a_ok for n, rep in reports.items() if abs(n) > T):
            threshold = T
        else:
            break
    if threshold == N and not all(reports[n].a_ok for n in (-N, N)):
        threshold = None
    return ContourBoundsScan(reports, threshold)
