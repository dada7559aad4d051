"""Eigenvalues of T_Q as zeros of det s_Q, located strip by strip.

Zeros are counted with the argument principle, estimated from contour
moments (Delves-Lyness), refined on small circles where the trapezoidal
rule converges geometrically, and finally Newton-polished using the
lambda-derivative from the variational system.  Boxes whose moment
estimates do not validate are bisected.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .characteristic import evaluate
from .potentials import MatrixPotential, l2_norm
from .propagator import DEFAULT_TOL

log = logging.getLogger(__name__)

__all__ = [
    "ZeroOnContour",
    "NonIntegerWinding",
    "SearchHeightExceeded",
    "ContourSpec",
    "EigenvalueRecord",
    "StripResult",
    "Spectrum",
    "strip_of",
    "winding_number",
    "count_zeros",
    "box_count",
    "eigenvalues_in_strip",
    "compute_spectrum",
    "index_spectrum",
    "AsymptoticsReport",
    "asymptotics_report",
    "CLUSTER_TOL",
]

CLUSTER_TOL = 1e-6
ZERO_RTOL = 1e-9
MAX_HEIGHT = 64.0


class ZeroOnContour(ArithmeticError):
    """det s_Q is (numerically) zero somewhere on the integration contour."""


class NonIntegerWinding(ArithmeticError):
    """Argument-principle integral is too far from an integer."""


class SearchHeightExceeded(RuntimeError):
    """Zeros keep appearing as the search height is doubled."""


def strip_of(lam) -> int:
    """Index n of the half-open strip pi n - pi/2 < Re lam <= pi n + pi/2."""
    return int(math.ceil(np.real(lam) / math.pi - 0.5))


@dataclass(frozen=True)
class ContourSpec:
    """Circle |lam - center| = radius sampled at ``nodes`` equispaced angles."""

    center: complex
    radius: float
    nodes: int = 64

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.nodes < 32:
            raise ValueError("at least 32 contour nodes are required")

    def points(self) -> np.ndarray:
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        return self.center + self.radius * np.exp(1j * theta)

    def weights(self) -> np.ndarray:
        """Trapezoidal weights w_k with  (1/2 pi i) oint g dlam ~ sum w_k g(lam_k)."""
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        return self.radius * np.exp(1j * theta) / self.nodes


@dataclass(frozen=True)
class EigenvalueRecord:
    value: complex
    multiplicity: int
    strip: int
    index: int | None = None
    residual: float = 0.0


# --- winding numbers --------------------------------------------------------


def _circle_data(Q, contour: ContourSpec, tol):
    pts = contour.points()
    b = evaluate(Q, pts, derivative=True, tol=tol)
    return pts, b.det, b.ddet


def _check_nonzero(det: np.ndarray, what: str):
    mag = np.abs(det)
    if mag.min() < ZERO_RTOL * max(np.median(mag), 1e-300):
        raise ZeroOnContour(f"det s_Q nearly vanishes on {what} (min |det| = {mag.min():.3e})")


def winding_number(Q: MatrixPotential, contour: ContourSpec, tol: float = DEFAULT_TOL) -> complex:
    """(1/2 pi i) oint det'/det dlam by the trapezoidal rule in angle."""
    pts, det, ddet = _circle_data(Q, contour, tol)
    _check_nonzero(det, f"circle |lam - {contour.center:.4g}| = {contour.radius:g}")
    return complex(np.sum(contour.weights() * ddet / det))


def count_zeros(Q: MatrixPotential, contour: ContourSpec, tol: float = DEFAULT_TOL) -> int:
    """Number of zeros of det s_Q inside a circle, counted with multiplicity.

    The node count is doubled (at most twice) while the quadrature value is
    further than 0.1 from an integer.

    Raises
    ------
    ZeroOnContour, NonIntegerWinding
    """
    c = contour
    for _ in range(3):
        w = winding_number(Q, c, tol)
        k = round(w.real)
        resid = abs(w - k)
        if resid <= 0.1:
            log.debug("winding %s: %.3e from %d", c, resid, k)
            return int(k)
        c = replace(c, nodes=2 * c.nodes)
    raise NonIntegerWinding(f"winding number {w:.4f} is not close to an integer on {contour}")


# --- boxes ------------------------------------------------------------------


@dataclass(frozen=True)
class _Box:
    re0: float
    re1: float
    im0: float
    im1: float

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))

    @property
    def width(self) -> float:
        return self.re1 - self.re0

    @property
    def height(self) -> float:
        return self.im1 - self.im0

    def corners(self):
        return [
            complex(self.re0, self.im0),
            complex(self.re1, self.im0),
            complex(self.re1, self.im1),
            complex(self.re0, self.im1),
        ]

    def contains(self, z, margin: float = 0.0) -> bool:
        return (
            self.re0 - margin <= z.real <= self.re1 + margin
            and self.im0 - margin <= z.imag <= self.im1 + margin
        )

    def split(self, frac: float = 0.53):
        if self.width >= self.height:
            m = self.re0 + frac * self.width
            return _Box(self.re0, m, self.im0, self.im1), _Box(m, self.re1, self.im0, self.im1)
        m = self.im0 + frac * self.height
        return _Box(self.re0, self.re1, self.im0, m), _Box(self.re0, self.re1, m, self.im1)


def _box_quadrature(box: _Box, panel: float, order: int = 8):
    """Composite Gauss-Legendre nodes/weights along the boundary (ccw).

    Returns nodes and complex weights dlam, ordered along the path.
    """
    g, w = np.polynomial.legendre.leggauss(order)
    corners = box.corners()
    nodes, weights = [], []
    for a, b in zip(corners, corners[1:] + corners[:1]):
        n_pan = max(1, int(math.ceil(abs(b - a) / panel)))
        edges = a + (b - a) * np.linspace(0, 1, n_pan + 1)
        for p0, p1 in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (p1 - p0) * g + 0.5 * (p0 + p1))
            weights.append(0.5 * (p1 - p0) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def _phase_increments(values: np.ndarray) -> np.ndarray:
    closed = np.append(values, values[0])
    return np.angle(closed[1:] / closed[:-1])


def box_count(Q: MatrixPotential, box: _Box, tol: float = DEFAULT_TOL, panel: float = 1.0, derivative=True):
    """Count zeros of det s_Q in a rectangle.

    Returns ``(count, nodes, weights, det, ddet)``; the quadrature data is
    reused for moments.  The count is taken from the argument-principle
    integral and cross-checked against phase tracking along the same
    ordered nodes (every phase increment must stay below pi/4).
    """
    for _ in range(5):
        nodes, weights = _box_quadrature(box, panel)
        b = evaluate(Q, nodes, derivative=derivative, tol=tol)
        _check_nonzero(b.det, f"box {box}")
        dphi = _phase_increments(b.det)
        if np.max(np.abs(dphi)) > np.pi / 4:
            panel /= 2
            continue
        k_phase = int(round(np.sum(dphi) / (2 * np.pi)))
        if not derivative:
            return k_phase, nodes, weights, b.det, None
        w0 = np.sum(weights * b.ddet / b.det) / (2j * np.pi)
        k = int(round(w0.real))
        if abs(w0 - k) <= 0.1 and k == k_phase:
            return k, nodes, weights, b.det, b.ddet
        panel /= 2
    raise NonIntegerWinding(f"could not resolve the zero count in {box}")


def _power_sum_roots(moments: np.ndarray, k: int) -> np.ndarray:
    """Roots from power sums p_1..p_k via Newton's identities."""
    e = np.zeros(k + 1, dtype=complex)
    e[0] = 1.0
    for m in range(1, k + 1):
        acc = 0j
        for i in range(1, m + 1):
            acc += (-1) ** (i - 1) * e[m - i] * moments[i]
        e[m] = acc / m
    coeffs = np.array([(-1) ** i * e[i] for i in range(k + 1)])
    return np.roots(coeffs) if k > 0 else np.array([], dtype=complex)


def _moment_roots(lams, weights, det, ddet, center, scale, k):
    z = (lams - center) / scale
    g = weights * ddet / det / (2j * np.pi)
    p = np.array([np.sum(g * z**m) for m in range(k + 1)])
    return center + scale * _power_sum_roots(p, k)


def _cluster(points: Sequence[complex], tol: float) -> list[list[int]]:
    """Single-linkage grouping of points closer than ``tol``."""
    groups: list[list[int]] = []
    for i, z in enumerate(points):
        hits = [g for g in groups if any(abs(z - points[j]) < tol for j in g)]
        merged = [i]
        for g in hits:
            merged.extend(g)
            groups.remove(g)
        groups.append(sorted(merged))
    return groups


@dataclass
class _Zero:
    value: complex
    mult: int
    radius: float


def _refine(Q, estimates: np.ndarray, tol: float, nodes: int = 64) -> list[_Zero] | None:
    """Refine moment estimates on small circles; None if they do not validate."""
    if estimates.size == 0:
        return []
    groups = _cluster(list(estimates), 1e-3)
    centers = [np.mean(estimates[g]) for g in groups]
    sizes = [len(g) for g in groups]
    radii = []
    for i, c in enumerate(centers):
        others = [abs(c - o) for j, o in enumerate(centers) if j != i]
        radii.append(min([0.25] + [0.4 * d for d in others]))
    specs = [ContourSpec(c, rho, nodes) for c, rho in zip(centers, radii)]
    pts = np.concatenate([s.points() for s in specs])
    b = evaluate(Q, pts, derivative=True, tol=tol)
    out: list[_Zero] = []
    for i, spec in enumerate(specs):
        sl = slice(i * nodes, (i + 1) * nodes)
        det, ddet = b.det[sl], b.ddet[sl]
        if np.min(np.abs(det)) < ZERO_RTOL * np.median(np.abs(det)):
            return None
        w = spec.weights()
        k0 = np.sum(w * ddet / det)
        k = int(round(k0.real))
        if abs(k0 - k) > 0.1 or k != sizes[i]:
            return None
        # moments in the scaled variable (lam - c)/rho
        z = (spec.points() - spec.center) / spec.radius
        g = w * ddet / det
        p = np.array([np.sum(g * z**m) for m in range(k + 1)])
        roots = spec.center + spec.radius * _power_sum_roots(p, k)
        for grp in _cluster(list(roots), CLUSTER_TOL):
            out.append(_Zero(complex(np.mean(roots[grp])), len(grp), spec.radius))
    return out


def _polish(Q, zeros: list[_Zero], tol: float, max_iter: int = 6) -> list[float]:
    """Newton steps on det s_Q for simple zeros; returns residuals |det|/max(1,|det'|)."""
    if not zeros:
        return []
    simple = [z for z in zeros if z.mult == 1]
    active = list(simple)
    for _ in range(max_iter):
        if not active:
            break
        b = evaluate(Q, [z.value for z in active], derivative=True, tol=tol)
        nxt = []
        for z, d, dd in zip(active, b.det, b.ddet):
            if dd == 0:
                continue
            step = d / dd
            if abs(step) > 0.5 * z.radius:
                continue  # would leave the isolating circle; keep the moment value
            z.value = z.value - step
            if abs(step) > 1e-13 * max(1.0, abs(z.value)):
                nxt.append(z)
        active = nxt
    b = evaluate(Q, [z.value for z in zeros], derivative=True, tol=tol)
    return [float(abs(d) / max(1.0, abs(dd))) for d, dd in zip(b.det, b.ddet)]


def _search_box(Q, box: _Box, tol: float, depth: int = 0, known=None) -> list[_Zero]:
    if known is None:
        k, lams, weights, det, ddet = box_count(Q, box, tol)
    else:
        k, lams, weights, det, ddet = known
    if k == 0:
        return []
    scale = 0.5 * max(box.width, box.height)
    est = _moment_roots(lams, weights, det, ddet, box.center, scale, k)
    zeros = None
    if np.all(np.isfinite(est)):
        zeros = _refine(Q, est, tol)
    if zeros is not None:
        inside = all(box.contains(z.value, margin=1e-9) for z in zeros)
        if inside and sum(z.mult for z in zeros) == k:
            return zeros
    if depth >= 16:
        raise NonIntegerWinding(f"zero search did not converge in {box}")
    log.debug("bisecting %s (count %d)", box, k)
    found = []
    for sub in box.split():
        found.extend(_search_box(Q, sub, tol, depth + 1))
    return found


@dataclass(frozen=True)
class StripResult:
    n: int
    records: tuple[EigenvalueRecord, ...]
    box_count: int
    height: float
    warnings: tuple[str, ...] = ()

    @property
    def total_multiplicity(self) -> int:
        return sum(r.multiplicity for r in self.records)


def eigenvalues_in_strip(
    Q: MatrixPotential, n: int, tol: float = DEFAULT_TOL, height: float | None = None
) -> StripResult:
    """Locate all eigenvalues of T_Q in the strip Delta_n.

    The search region is Delta_n cut at |Im lam| <= H, with H starting at
    2 + ||Q||_{L2} and doubled while the doubled box holds more zeros.
    """
    H = 2.0 + l2_norm(Q) if height is None else float(height)
    lo, hi = math.pi * n - math.pi / 2, math.pi * n + math.pi / 2
    warnings = []
    shift = 0.0
    for _ in range(3):
        try:
            while True:
                box = _Box(lo - shift, hi + shift, -H, H)
                known = box_count(Q, box, tol)
                k_big = box_count(Q, _Box(lo - shift, hi + shift, -2 * H, 2 * H), tol, derivative=False)[0]
                if k_big == known[0]:
                    break
                H *= 2
                if H > MAX_HEIGHT:
                    raise SearchHeightExceeded(f"strip {n}: zeros beyond |Im lam| = {H / 2:g}")
            zeros = _search_box(Q, box, tol, known=known)
            break
        except ZeroOnContour:
            # a zero sits on a strip edge: widen, then assign by the half-open rule
            shift = 1e-3 if shift == 0 else 2 * shift
            warnings.append(f"zero near a strip edge; search box widened by {shift:g}")
    else:
        raise ZeroOnContour(f"strip {n}: could not find a zero-free boundary")

    residuals = _polish(Q, zeros, tol)
    records = []
    for z, res in zip(zeros, residuals):
        s = strip_of(z.value)
        if s != n:
            continue
        if abs(abs(z.value.real - math.pi * n) - math.pi / 2) < 1e-8:
            warnings.append(f"eigenvalue {z.value:.10g} lies on a strip boundary")
        records.append(EigenvalueRecord(z.value, z.mult, n, None, res))
    records.sort(key=lambda rec: (rec.value.real, rec.value.imag))
    count = known[0] if shift == 0 else sum(r.multiplicity for r in records)
    return StripResult(n, tuple(records), count, H, tuple(warnings))


# --- global view ------------------------------------------------------------


def _ordered(records: Iterable[EigenvalueRecord], tie_tol: float) -> list[EigenvalueRecord]:
    recs = sorted(records, key=lambda r: r.value.real)
    out: list[EigenvalueRecord] = []
    i = 0
    while i < len(recs):
        j = i + 1
        while j < len(recs) and recs[j].value.real - recs[j - 1].value.real <= tie_tol:
            j += 1
        out.extend(sorted(recs[i:j], key=lambda r: r.value.imag))
        i = j
    return out


def index_spectrum(records: Iterable[EigenvalueRecord], tie_tol: float = 1e-9) -> list[EigenvalueRecord]:
    """Order by real then imaginary part and number so that Re lam_0 <= 0 < Re lam_1.

    Real parts within ``tie_tol`` of each other (or of 0) count as equal.
    """
    recs = _ordered(records, tie_tol)
    j0 = sum(1 for r in recs if r.value.real <= tie_tol) - 1
    return [replace(r, index=i - j0) for i, r in enumerate(recs)]


@dataclass
class Spectrum:
    """Strip-wise spectrum of one potential."""

    r: int
    strips: dict[int, StripResult] = field(default_factory=dict)
    label: str = ""

    def records(self) -> list[EigenvalueRecord]:
        return index_spectrum(rec for s in self.strips.values() for rec in s.records)

    def in_strip(self, n: int) -> tuple[EigenvalueRecord, ...]:
        return self.strips[n].records

    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records()])


def compute_spectrum(
    Q: MatrixPotential, strips: Iterable[int], tol: float = DEFAULT_TOL, height: float | None = None
) -> Spectrum:
    spec = Spectrum(Q.r, label=Q.label)
    for n in strips:
        res = eigenvalues_in_strip(Q, n, tol, height)
        for w in res.warnings:
            log.warning("strip %d: %s", n, w)
        spec.strips[n] = res
    return spec


@dataclass(frozen=True)
class AsymptoticsReport:
    """Per-strip sums  sum_{lam_j in Delta_n} |lam_j - pi n|^2  (with multiplicity).

    ``partial_sums[N]`` is the sum over |n| <= N.  ``threshold`` is the
    smallest N such that every computed strip with |n| >= N carries total
    multiplicity r and deviation below 0.25 (None if no such N).
    """

    strips: tuple[int, ...]
    deviation: dict[int, float]
    counts: dict[int, int]
    distinct: dict[int, int]
    partial_sums: dict[int, float]
    max_count_per_strip: int
    threshold: int | None


def asymptotics_report(spectrum: Spectrum, N: int | None = None) -> AsymptoticsReport:
    ns = sorted(spectrum.strips)
    if N is not None:
        ns = [n for n in ns if abs(n) <= N]
    dev, cnt, dist = {}, {}, {}
    for n in ns:
        recs = spectrum.strips[n].records
        dev[n] = float(sum(r.multiplicity * abs(r.value - math.pi * n) ** 2 for r in recs))
        cnt[n] = sum(r.multiplicity for r in recs)
        dist[n] = len(recs)
    Nmax = max((abs(n) for n in ns), default=0)
    partial = {}
    for M in range(Nmax + 1):
        partial[M] = float(sum(dev[n] for n in ns if abs(n) <= M))
    threshold = None
    for M in range(Nmax + 1):
        if all(cnt[n] == spectrum.r and dev[n] < 0.25 for n in ns if abs(n) >= M):
            threshold = M
            break
    return AsymptoticsReport(
        tuple(ns), dev, cnt, dist, partial, max(dist.values(), default=0), threshold
    )
