"""Block off-diagonal matrix potentials Q = [[0, q1], [q2, 0]] on (0, 1).

A potential is a pair of r x r matrix-valued blocks.  Blocks are small
immutable objects with a vectorised ``__call__(x) -> (len(x), r, r)``.
Potentials are built either from Python (see the ``*_potential``
constructors at the bottom of the module) or from a JSON document via
:func:`load_potential`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

__all__ = [
    "PotentialSpecError",
    "Block",
    "ZeroBlock",
    "ConstBlock",
    "SampledBlock",
    "FunctionBlock",
    "AdjointBlock",
    "MatrixPotential",
    "load_potential",
    "adjoint_potential",
    "l2_norm",
    "zero_potential",
    "constant_potential",
    "trig_potential",
    "nonnormal_potential",
    "random_smooth_potential",
    "BUILTIN_BLOCKS",
]


class PotentialSpecError(ValueError):
    """Raised when a potential document cannot be turned into a potential."""


def _as_x(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


class Block:
    """An r x r matrix function on [0, 1]."""

    r: int
    name: str = "block"

    def __call__(self, x) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where the block may fail to be smooth."""
        return ()

    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class ZeroBlock(Block):
    r: int
    name: str = "zero"

    def __call__(self, x):
        x = _as_x(x)
        return np.zeros((x.size, self.r, self.r), dtype=complex)

    def is_zero(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class ConstBlock(Block):
    matrix: np.ndarray
    name: str = "const"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def r(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x):
        x = _as_x(x)
        return np.broadcast_to(self.matrix, (x.size, self.r, self.r)).copy()

    def is_zero(self) -> bool:
        return not np.any(self.matrix)


@dataclass(frozen=True, eq=False)
class SampledBlock(Block):
    """Grid samples, interpolated piecewise-linearly per entry.

    Outside ``[x[0], x[-1]]`` the end samples are held constant.
    """

    x: np.ndarray
    values: np.ndarray
    name: str = "samples"

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.values, dtype=complex)
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def __call__(self, x):
        x = _as_x(x)
        r = self.r
        flat = self.values.reshape(len(self.x), r * r)
        out = np.empty((x.size, r * r), dtype=complex)
        for k in range(r * r):
            out[:, k] = np.interp(x, self.x, flat[:, k].real) + 1j * np.interp(
                x, self.x, flat[:, k].imag
            )
        return out.reshape(x.size, r, r)

    @property
    def breakpoints(self):
        return tuple(float(t) for t in self.x if 0.0 < t < 1.0)


@dataclass(frozen=True, eq=False)
class FunctionBlock(Block):
    """Closed-form block given by a vectorised callable."""

    r: int
    func: Callable[[np.ndarray], np.ndarray]
    name: str = "function"
    params: Mapping[str, Any] = field(default_factory=dict)
    # values are real symmetric matrices, so the block is its own adjoint
    real_symmetric: bool = False

    def __call__(self, x):
        x = _as_x(x)
        v = np.asarray(self.func(x), dtype=complex)
        return np.broadcast_to(v, (x.size, self.r, self.r)).copy()


@dataclass(frozen=True, eq=False)
class AdjointBlock(Block):
    """Pointwise conjugate transpose of another block."""

    base: Block
    name: str = "adjoint"

    @property
    def r(self) -> int:
        return self.base.r

    def __call__(self, x):
        return np.conj(np.swapaxes(self.base(x), -1, -2))

    @property
    def breakpoints(self):
        return self.base.breakpoints

    def is_zero(self) -> bool:
        return self.base.is_zero()


def _adjoint_block(b: Block) -> Block:
    if isinstance(b, AdjointBlock):
        return b.base
    if isinstance(b, ZeroBlock):
        return b
    if isinstance(b, ConstBlock):
        return ConstBlock(b.matrix.conj().T)
    if isinstance(b, SampledBlock):
        return SampledBlock(b.x, np.conj(np.swapaxes(b.values, -1, -2)))
    return AdjointBlock(b)


@dataclass(frozen=True, eq=False)
class MatrixPotential:
    """Off-diagonal block potential on (0, 1).

    Attributes
    ----------
    q1, q2 : Block
        Upper-right and lower-left r x r blocks.
    label : str
        Free-form description, used in reports.
    """

    q1: Block
    q2: Block
    label: str = ""

    def __post_init__(self):
        if self.q1.r != self.q2.r:
            raise PotentialSpecError(
                f"block sizes differ: q1 is {self.q1.r}x{self.q1.r}, "
                f"q2 is {self.q2.r}x{self.q2.r}"
            )

    @property
    def r(self) -> int:
        return self.q1.r

    def is_zero(self) -> bool:
        return self.q1.is_zero() and self.q2.is_zero()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.q1.breakpoints) | set(self.q2.breakpoints)))

    def blocks(self, x) -> tuple[np.ndarray, np.ndarray]:
        return self.q1(x), self.q2(x)

    def __call__(self, x) -> np.ndarray:
        """Assembled 2r x 2r values, shape ``(len(x), 2r, 2r)``."""
        x = _as_x(x)
        r = self.r
        out = np.zeros((x.size, 2 * r, 2 * r), dtype=complex)
        out[:, :r, r:] = self.q1(x)
        out[:, r:, :r] = self.q2(x)
        return out

    def jq(self, x) -> np.ndarray:
        """Values of J Q(x) where J = diag(-iI, iI)."""
        x = _as_x(x)
        r = self.r
        out = np.zeros((x.size, 2 * r, 2 * r), dtype=complex)
        out[:, :r, r:] = -1j * self.q1(x)
        out[:, r:, :r] = 1j * self.q2(x)
        return out


def _blocks_adjoint(a: Block, b: Block) -> bool:
    """True when ``a`` is structurally the pointwise adjoint of ``b``."""
    if a.is_zero() and b.is_zero():
        return True
    if a is b and isinstance(a, FunctionBlock) and a.real_symmetric:
        return True
    if isinstance(a, AdjointBlock) and a.base is b or isinstance(b, AdjointBlock) and b.base is a:
        return True
    if isinstance(a, ConstBlock) and isinstance(b, ConstBlock):
        return np.array_equal(a.matrix, b.matrix.conj().T)
    if isinstance(a, SampledBlock) and isinstance(b, SampledBlock):
        return np.array_equal(a.x, b.x) and np.array_equal(a.values, np.conj(np.swapaxes(b.values, -1, -2)))
    return False


def is_self_adjoint(Q: MatrixPotential) -> bool:
    """Structural test for Q* = Q, i.e. q1 = q2^*.

    Only exact identities of the block representations are recognised; a
    False answer means "not known to be self-adjoint".
    """
    return _blocks_adjoint(Q.q1, Q.q2)


def adjoint_potential(Q: MatrixPotential) -> MatrixPotential:
    """Pointwise conjugate transpose Q*; blocks swap places."""
    label = Q.label[:-1] if Q.label.endswith("*") else (Q.label + "*" if Q.label else "")
    return MatrixPotential(_adjoint_block(Q.q2), _adjoint_block(Q.q1), label=label)


def l2_norm(Q: MatrixPotential, return_error: bool = False, nodes_per_cell: int = 16):
    """(int_0^1 ||Q(t)||^2 dt)^(1/2) with ||.|| the spectral matrix norm.

    Composite Gauss-Legendre on the cells between the potential's
    breakpoints (32 cells minimum).  With ``return_error`` the difference
    from a half-resolution rule is returned alongside as an error estimate.
    """

    def integrate(npc):
        edges = np.unique(np.concatenate([np.linspace(0, 1, 33), Q.breakpoints]))
        g, w = np.polynomial.legendre.leggauss(npc)
        a, b = edges[:-1, None], edges[1:, None]
        x = (0.5 * (b - a) * g + 0.5 * (a + b)).ravel()
        ww = (0.5 * (b - a) * w).ravel()
        q1, q2 = Q.blocks(x)
        if not (np.all(np.isfinite(q1)) and np.all(np.isfinite(q2))):
            raise PotentialSpecError("potential has non-finite values")
        s = np.maximum(
            np.linalg.norm(q1, ord=2, axis=(1, 2)), np.linalg.norm(q2, ord=2, axis=(1, 2))
        )
        return math.sqrt(float(np.dot(ww, s**2)))

    val = integrate(nodes_per_cell)
    if return_error:
        return val, abs(val - integrate(max(2, nodes_per_cell // 2)))
    return val


# --- builtin block families -------------------------------------------------


def _complex(v) -> complex:
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise PotentialSpecError(f"complex scalar must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _matrix_param(p: Mapping, r: int) -> np.ndarray:
    m = p.get("matrix")
    if m is None:
        return np.eye(r, dtype=complex)
    return _parse_matrix(m, r)


def _trig_block(r: int, params: Mapping) -> FunctionBlock:
    # q(x) = M * (c0 + sum_k cos_k cos(2 pi k x) + sin_k sin(2 pi k x))
    cos = [_complex(c) for c in params.get("cos", [])]
    sin = [_complex(c) for c in params.get("sin", [])]
    c0 = _complex(params.get("mean", 0.0))
    M = _matrix_param(params, r)

    def func(x):
        s = np.full(x.shape, c0, dtype=complex)
        for k, c in enumerate(cos, start=1):
            s = s + c * np.cos(2 * np.pi * k * x)
        for k, c in enumerate(sin, start=1):
            s = s + c * np.sin(2 * np.pi * k * x)
        return s[:, None, None] * M

    real = all(c.imag == 0 for c in cos + sin + [c0]) and np.array_equal(M, M.conj().T) and not np.any(M.imag)
    return FunctionBlock(r, func, "trig", dict(params), real_symmetric=real)


def _exp_block(r: int, params: Mapping) -> FunctionBlock:
    # q(x) = amp * exp(2 pi i k x) * M
    amp = _complex(params.get("amp", 1.0))
    k = float(params.get("k", 1.0))
    M = _matrix_param(params, r)

    def func(x):
        return (amp * np.exp(2j * np.pi * k * x))[:, None, None] * M

    return FunctionBlock(r, func, "exp", dict(params))


def _poly_block(r: int, params: Mapping) -> FunctionBlock:
    # q(x) = M * sum_k c_k x^k
    coeffs = [_complex(c) for c in params.get("coeffs", [0.0])]
    M = _matrix_param(params, r)

    def func(x):
        s = np.zeros(x.shape, dtype=complex)
        for c in reversed(coeffs):
            s = s * x + c
        return s[:, None, None] * M

    return FunctionBlock(r, func, "poly", dict(params))


def _random_block(r: int, params: Mapping) -> FunctionBlock:
    seed = int(params.get("seed", 0))
    modes = int(params.get("modes", 3))
    amp = float(params.get("amplitude", 1.0))
    rng = np.random.default_rng(seed)
    # Coefficients decay like 1/k^2, so the block is smooth.
    ks = np.arange(1, modes + 1)
    a = rng.standard_normal((modes, r, r)) + 1j * rng.standard_normal((modes, r, r))
    b = rng.standard_normal((modes, r, r)) + 1j * rng.standard_normal((modes, r, r))
    c0 = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    scale = amp / np.sqrt(2 * r) / (1.0 + ks**2)[:, None, None]
    a, b = a * scale, b * scale
    c0 = c0 * amp / np.sqrt(2 * r) / 2

    def func(x):
        arg = 2 * np.pi * x[:, None] * ks[None, :]
        return (
            c0
            + np.einsum("nk,kij->nij", np.cos(arg), a)
            + np.einsum("nk,kij->nij", np.sin(arg), b)
        )

    return FunctionBlock(r, func, "random", dict(params))


BUILTIN_BLOCKS: dict[str, Callable[[int, Mapping], Block]] = {
    "trig": _trig_block,
    "exp": _exp_block,
    "poly": _poly_block,
    "random": _random_block,
}


# --- JSON ingestion ---------------------------------------------------------


def _parse_matrix(spec: Mapping, r: int) -> np.ndarray:
    try:
        re = np.asarray(spec["re"], dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise PotentialSpecError(f"bad matrix entry: {exc}") from exc
    if re.shape != (r, r) or im.shape != (r, r):
        raise PotentialSpecError(f"expected {r}x{r} matrix, got shapes {re.shape} and {im.shape}")
    m = re + 1j * im
    if not np.all(np.isfinite(m)):
        raise PotentialSpecError("non-finite matrix entries")
    return m


def _parse_block(spec: Any, r: int, which: str) -> Block:
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise PotentialSpecError(f"{which}: block spec must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "zero":
        return ZeroBlock(r)
    if kind == "const":
        return ConstBlock(_parse_matrix(spec, r))
    if kind == "samples":
        try:
            x = np.asarray(spec["x"], dtype=float)
            re = np.asarray(spec["re"], dtype=float)
            im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise PotentialSpecError(f"{which}: bad samples: {exc}") from exc
        if x.ndim != 1 or x.size < 2:
            raise PotentialSpecError(f"{which}: need at least two sample nodes")
        if np.any(np.diff(x) <= 0) or x[0] < 0 or x[-1] > 1:
            raise PotentialSpecError(f"{which}: sample nodes must increase strictly within [0, 1]")
        if re.shape != (x.size, r, r) or im.shape != re.shape:
            raise PotentialSpecError(
                f"{which}: sample values must have shape ({x.size}, {r}, {r}), got {re.shape}"
            )
        v = re + 1j * im
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(x)):
            raise PotentialSpecError(f"{which}: non-finite sample values")
        return SampledBlock(x, v)
    if kind == "builtin":
        name = spec.get("name")
        if name not in BUILTIN_BLOCKS:
            raise PotentialSpecError(
                f"{which}: unknown builtin {name!r}; known: {sorted(BUILTIN_BLOCKS)}"
            )
        params = spec.get("params", {})
        if not isinstance(params, Mapping):
            raise PotentialSpecError(f"{which}: params must be an object")
        try:
            blk = BUILTIN_BLOCKS[name](r, params)
            probe = blk(np.linspace(0, 1, 17))
        except PotentialSpecError:
            raise
        except (TypeError, ValueError) as exc:
            raise PotentialSpecError(f"{which}: bad params for {name!r}: {exc}") from exc
        if not np.all(np.isfinite(probe)):
            raise PotentialSpecError(f"{which}: builtin {name!r} produced non-finite values")
        return blk
    raise PotentialSpecError(f"{which}: unknown block kind {kind!r}")


def load_potential(spec) -> MatrixPotential:
    """Build a potential from a spec document.

    ``spec`` may be a mapping, a JSON string or a path to a JSON file.
    Documents look like ``{"r": 1, "q1": {...}, "q2": {...}}`` where each
    block is one of ``zero``, ``const``, ``samples`` or ``builtin``.
    """
    label = ""
    if isinstance(spec, (str, Path)) and not str(spec).lstrip().startswith("{"):
        path = Path(spec)
        try:
            text = path.read_text()
        except OSError as exc:
            raise FileNotFoundError(f"cannot read potential file {path}: {exc}") from exc
        label = path.stem
        spec = text
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise PotentialSpecError(f"malformed JSON: {exc}") from exc
    if not isinstance(spec, Mapping):
        raise PotentialSpecError("potential document must be a JSON object")
    r = spec.get("r")
    if not isinstance(r, int) or isinstance(r, bool) or r < 1:
        raise PotentialSpecError(f"'r' must be a positive integer, got {r!r}")
    for key in ("q1", "q2"):
        if key not in spec:
            raise PotentialSpecError(f"missing block {key!r}")
    q1 = _parse_block(spec["q1"], r, "q1")
    q2 = _parse_block(spec["q2"], r, "q2")
    return MatrixPotential(q1, q2, label=str(spec.get("label", label)))


# --- catalogue --------------------------------------------------------------


def zero_potential(r: int = 1) -> MatrixPotential:
    return MatrixPotential(ZeroBlock(r), ZeroBlock(r), label="zero")


def constant_potential(c1, c2=None, r: int = 1) -> MatrixPotential:
    """Constant blocks; scalars are promoted to multiples of the identity."""

    def mat(c):
        c = np.asarray(c, dtype=complex)
        return c * np.eye(r) if c.ndim == 0 else c

    m1 = mat(c1)
    m2 = m1 if c2 is None else mat(c2)
    return MatrixPotential(ConstBlock(m1), ConstBlock(m2), label="const")


def trig_potential(amp: float = 1.0, r: int = 1) -> MatrixPotential:
    """Real trigonometric test potential, q1 = q2 = amp (cos 2 pi x + 0.5 sin 4 pi x)."""
    p = {"mean": 0.0, "cos": [amp], "sin": [0.0, 0.5 * amp]}
    blk = _trig_block(r, p)
    return MatrixPotential(blk, blk, label="trig")


def nonnormal_potential(r: int = 1, amp: float = 1.0) -> MatrixPotential:
    """q1 = amp e^{2 pi i x} M1, q2 = amp (1 + x) M2 with q2 != q1^*.

    For r > 1 the matrices M1, M2 are non-commuting upper/lower shifts
    plus the identity.
    """
    M1 = np.eye(r, dtype=complex) + 0.5 * np.eye(r, k=1)
    M2 = np.eye(r, dtype=complex) - 0.5j * np.eye(r, k=-1)
    q1 = _exp_block(r, {"amp": amp, "k": 1.0, "matrix": {"re": M1.real.tolist(), "im": M1.imag.tolist()}})
    q2 = _poly_block(r, {"coeffs": [amp, amp], "matrix": {"re": M2.real.tolist(), "im": M2.imag.tolist()}})
    return MatrixPotential(q1, q2, label="nonnormal")


def random_smooth_potential(r: int = 1, seed: int = 0, amplitude: float = 1.0, modes: int = 3) -> MatrixPotential:
    """Random trigonometric-polynomial blocks, reproducible by seed."""
    q1 = _random_block(r, {"seed": 2 * seed, "modes": modes, "amplitude": amplitude})
    q2 = _random_block(r, {"seed": 2 * seed + 1, "modes": modes, "amplitude": amplitude})
    return MatrixPotential(q1, q2, label=f"random{seed}")
