"""Command-line front end.

Commands::

    dirac-riesz spectrum     eigenvalue table and asymptotics
    dirac-riesz projectors   strip projector summaries (optionally kernel dumps)
    dirac-riesz bari-markus  projector distance table ||P_n - P_n^0||
    dirac-riesz verify       gated numerical checks, prints a check matrix
    dirac-riesz report       spectrum + bari-markus + contour bounds in one go

Exit codes: 0 ok, 1 failed check or pipeline error, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .potentials import MatrixPotential, PotentialSpecError, l2_norm, load_potential, zero_potential
from .projectors import DEFAULT_KERNEL_GRID, DEFAULT_NODES, export_kernel, hs_norm, kernel_rank, op_norm, projector_kernel
from .propagator import DEFAULT_TOL

log = logging.getLogger("dirac_riesz")

EXIT_OK, EXIT_CHECK, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one CLI run.

    ``potential`` is a path or an inline JSON document; ``None`` means the
    free potential of size ``r``.
    """

    command: str
    potential: str | None = None
    r: int = 1
    strips: tuple[int, int] = (-4, 4)
    grid: int = DEFAULT_KERNEL_GRID
    contour_nodes: int = DEFAULT_NODES
    tol: float = DEFAULT_TOL
    out: str = "."
    format: str = "csv"
    oracle_m: int = 1024
    dump_kernels: bool = False

    def __post_init__(self):
        a, b = self.strips
        if a > b:
            raise InputError(f"empty strip range {a}..{b}")
        if self.grid < 5:
            raise InputError("--grid must be at least 5")
        if self.contour_nodes < 32:
            raise InputError("--contour-nodes must be at least 32")
        if not (0 < self.tol < 1e-2):
            raise InputError("--tol must lie in (0, 1e-2)")
        if self.r < 1:
            raise InputError("--r must be positive")
        if self.oracle_m < 128 or self.oracle_m % 2:
            raise InputError("--oracle-m must be even and at least 128")

    @property
    def strip_range(self) -> range:
        return range(self.strips[0], self.strips[1] + 1)

    def load(self) -> MatrixPotential:
        if self.potential is None:
            return zero_potential(self.r)
        return load_potential(self.potential)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


class Writer:
    """Serialises tables to ``out`` as CSV or JSON with stable formatting."""

    def __init__(self, cfg: RunConfig):
        self.dir = Path(cfg.out)
        self.format = cfg.format
        self.dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def table(self, name: str, columns: Sequence[str], rows: Sequence[dict], meta: dict | None = None) -> Path:
        if self.format == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row[c]) for c in columns])
            text = buf.getvalue()
            path = self.dir / f"{name}.csv"
        else:
            doc = {"columns": list(columns), "rows": [{c: row[c] for c in columns} for row in rows]}
            if meta:
                doc["meta"] = meta
            text = json.dumps(_jsonable(doc), indent=2) + "\n"
            path = self.dir / f"{name}.json"
        path.write_text(text)
        self.written.append(path)
        return path

    def document(self, name: str, doc: dict) -> Path:
        path = self.dir / f"{name}.json"
        path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
        self.written.append(path)
        return path


def _config_doc(cfg: RunConfig) -> dict:
    # the output directory is left out so that reruns elsewhere compare equal
    doc = asdict(cfg)
    doc.pop("out")
    return doc


# --- commands -------------------------------------------------------------------


def _spectrum_outputs(cfg: RunConfig, Q: MatrixPotential, out: Writer):
    from .spectrum import asymptotics_report, compute_spectrum

    spec = compute_spectrum(Q, cfg.strip_range, cfg.tol)
    rows = [
        {"j": rec.index, "n": rec.strip, "re": rec.value.real, "im": rec.value.imag,
         "multiplicity": rec.multiplicity}
        for rec in spec.records()
    ]
    out.table("spectrum", ["j", "n", "re", "im", "multiplicity"], rows)
    asy = asymptotics_report(spec)
    arows = [
        {"n": n, "count": asy.counts[n], "distinct": asy.distinct[n], "deviation": asy.deviation[n],
         "partial_sum": asy.partial_sums[abs(n)] if abs(n) in asy.partial_sums else None}
        for n in asy.strips
    ]
    meta = {"threshold": asy.threshold, "max_count_per_strip": asy.max_count_per_strip}
    out.table("asymptotics", ["n", "count", "distinct", "deviation", "partial_sum"], arows, meta)
    warnings = [f"strip {n}: {w}" for n, s in spec.strips.items() for w in s.warnings]
    return spec, asy, meta, warnings


def cmd_spectrum(cfg: RunConfig, out: Writer) -> int:
    Q = cfg.load()
    spec, asy, meta, warnings = _spectrum_outputs(cfg, Q, out)
    out.document("run", {"config": _config_doc(cfg), "summary": meta, "warnings": warnings})
    print(f"{len(spec.records())} eigenvalues in strips {cfg.strips[0]}..{cfg.strips[1]}; "
          f"asymptotic threshold {asy.threshold}")
    return EXIT_OK


def cmd_projectors(cfg: RunConfig, out: Writer) -> int:
    from .spectrum import compute_spectrum

    Q = cfg.load()
    a, b = cfg.strips
    spec = compute_spectrum(Q, range(a - 1, b + 2), cfg.tol)
    rows = []
    for n in cfg.strip_range:
        K = projector_kernel(Q, n, cfg.grid, cfg.contour_nodes, spectrum=spec, tol=cfg.tol)
        tr = K.trace()
        idem = op_norm(K.compose(K) - K)
        rows.append({
            "n": n, "trace_re": tr.real, "trace_im": tr.imag,
            "multiplicity": spec.strips[n].total_multiplicity,
            "op_norm": op_norm(K), "hs_norm": hs_norm(K), "rank": kernel_rank(K),
            "idempotency": idem, "contour_nodes": K.nodes, "quad_change": K.quad_error,
        })
        if cfg.dump_kernels:
            fmt = "csv" if cfg.format == "csv" else "npz"
            path = out.dir / f"kernel_{n}.{fmt}"
            export_kernel(K, path, fmt)
            out.written.append(path)
    cols = ["n", "trace_re", "trace_im", "multiplicity", "op_norm", "hs_norm", "rank",
            "idempotency", "contour_nodes", "quad_change"]
    out.table("projectors", cols, rows)
    out.document("run", {"config": _config_doc(cfg)})
    print(f"{len(rows)} strip projectors on a {cfg.grid}-node grid")
    return EXIT_OK


def _bari_markus(cfg: RunConfig, Q: MatrixPotential, out: Writer):
    from .diagnostics import bari_markus_table

    N = max(abs(cfg.strips[0]), abs(cfg.strips[1]))
    rep = bari_markus_table(Q, N, cfg.grid, cfg.contour_nodes, cfg.tol)
    rows = rep.rows()
    meta = {
        "N_max": rep.N_max, "grid": rep.grid, "contour_nodes": rep.contour_nodes, "tol": rep.tol,
        "partial_sums": list(rep.partial_sums),
        "deviation_partial_sums": list(rep.deviation_partial_sums),
    }
    out.table("bari_markus", ["n", "d_n", "hs_d_n", "S_n", "strip_deviation"], rows, meta)
    return rep, meta


def cmd_bari_markus(cfg: RunConfig, out: Writer) -> int:
    Q = cfg.load()
    rep, meta = _bari_markus(cfg, Q, out)
    if cfg.dump_kernels:
        from .projectors import free_projector_kernel

        fmt = "csv" if cfg.format == "csv" else "npz"
        for n in rep.strips:
            K = projector_kernel(Q, n, cfg.grid, cfg.contour_nodes, tol=cfg.tol)
            path = out.dir / f"kernel_diff_{n}.{fmt}"
            export_kernel(K - free_projector_kernel(n, cfg.grid, Q.r), path, fmt)
            out.written.append(path)
    out.document("run", {"config": _config_doc(cfg), "summary": {
        "S_N": rep.partial_sums[-1],
        "tail_ratio": rep.tail_ratio(rep.N_max) if rep.N_max >= 2 else None,
    }})
    print(f"S_{rep.N_max} = {rep.partial_sums[-1]:.6e}")
    return EXIT_OK


# --- verify -------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""


def _checks(cfg: RunConfig, Q: MatrixPotential) -> list[tuple[str, Callable[[], Check]]]:
    from .characteristic import SingularCharacteristicMatrix, verify_paley_wiener
    from .diagnostics import BandLimitedFunction, contour_bounds_scan, lemma_A_sum
    from .gridfunc import GridFunction
    from .oracle import compare
    from .propagator import uniform_grid, wronskian_residual
    from .resolvent import Resolvent, boundary_defect, resolvent_residual

    norm = l2_norm(Q)

    def wronskian():
        lams = [math.pi * n + np.exp(2j * math.pi * n / 5) for n in range(5)]
        worst = max(wronskian_residual(Q, lam, tol=cfg.tol) for lam in lams)
        return Check("wronskian", worst, 1e-8, worst < 1e-8)

    def resolvent():
        x = uniform_grid(513)
        rng = np.random.default_rng(0)
        worst_res = worst_bc = 0.0
        used = 0
        for n in range(6):
            if used == 3:
                break
            lam = math.pi * n + math.pi / 2 + 1j * (1.0 + norm)
            try:
                R = Resolvent(Q, lam, x, cfg.tol)
                c = rng.standard_normal((3, 2 * Q.r)) + 1j * rng.standard_normal((3, 2 * Q.r))
                f = GridFunction(x, np.cos(np.outer(x, [1.0, 2.0, 3.0])) @ c)
                g = GridFunction(x, R.apply(f))
            except SingularCharacteristicMatrix:
                continue
            used += 1
            worst_res = max(worst_res, resolvent_residual(Q, lam, f, g, cfg.tol))
            worst_bc = max(worst_bc, *boundary_defect(g))
        ok = used > 0 and worst_res < 1e-6 and worst_bc < 1e-8
        return Check("resolvent", worst_res, 1e-6, ok, f"boundary defect {worst_bc:.2e}")

    def paley_wiener():
        # below these floors the numbers are integrator noise, not truncation
        e_floor, r_floor = 1e-12, 1e-7
        lo, hi = verify_paley_wiener(Q, 64, cfg.tol), verify_paley_wiener(Q, 128, cfg.tol)
        e_lo, e_hi = sum(lo.energy()), sum(hi.energy())
        growth = 0.0 if e_hi < e_floor else (e_hi - e_lo) / max(e_lo, e_floor)
        shrink = hi.off_grid_residual <= max(lo.off_grid_residual, r_floor)
        return Check("paley-wiener", growth, 0.05, growth < 0.05 and shrink,
                     f"off-grid residual {lo.off_grid_residual:.2e} -> {hi.off_grid_residual:.2e}")

    def lemma_a():
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(10):
            f = BandLimitedFunction.random(rng, Q.r, int(rng.integers(1, 33)))
            for _ in range(3):
                worst = max(worst, lemma_A_sum(f, np.exp(1j * rng.uniform(0, 2 * math.pi)), 10_000).ratio)
        return Check("lemma-a", worst, 1.0, worst <= 1.0)

    def contour():
        N = max(8, abs(cfg.strips[0]), abs(cfg.strips[1]))
        scan = contour_bounds_scan(Q, N, 256, cfg.tol)
        reps = scan.reports.values()
        smin = min(r.min_sin for r in reps)
        cmax = max(r.max_cot for r in reps)
        ok = smin >= 0.84 and cmax <= 1.32 and scan.s_inv_ok_beyond_threshold()
        beyond = [r.max_s_inv for n, r in scan.reports.items()
                  if scan.threshold is not None and abs(n) > scan.threshold]
        return Check("contour-bounds", max(beyond, default=0.0), 4.0, ok,
                     f"min|sin| {smin:.4f}, max|cot| {cmax:.4f}, threshold {scan.threshold}")

    def oracle():
        worst, counts = 0.0, True
        for n in cfg.strip_range:
            rep = compare(Q, n, cfg.oracle_m, projector=False, tol=cfg.tol)
            counts &= rep.counts_match
            worst = max(worst, rep.eigenvalue_deviation)
        return Check("oracle", worst, 1e-3, counts and worst < 1e-3,
                     "counts match" if counts else "count mismatch")

    return [("wronskian", wronskian), ("resolvent", resolvent), ("paley-wiener", paley_wiener),
            ("lemma-a", lemma_a), ("contour-bounds", contour), ("oracle", oracle)]


def cmd_verify(cfg: RunConfig, out: Writer) -> int:
    Q = cfg.load()
    results = []
    for name, fn in _checks(cfg, Q):
        try:
            results.append(fn())
        except ArithmeticError as exc:
            results.append(Check(name, math.nan, math.nan, False, f"{type(exc).__name__}: {exc}"))
    width = max(len(c.name) for c in results)
    for c in results:
        print(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}  "
              f"value={c.value:.3e} limit={c.limit:.3e}  {c.detail}".rstrip())
    rows = [asdict(c) for c in results]
    out.table("verify", ["name", "passed", "value", "limit", "detail"], rows)
    failed = [c for c in results if not c.passed]
    if failed:
        print(f"verify failed: {failed[0].name}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_report(cfg: RunConfig, out: Writer) -> int:
    from .diagnostics import contour_bounds_scan

    Q = cfg.load()
    spec, asy, ameta, warnings = _spectrum_outputs(cfg, Q, out)
    rep, bmeta = _bari_markus(cfg, Q, out)
    N = max(abs(cfg.strips[0]), abs(cfg.strips[1]))
    scan = contour_bounds_scan(Q, N, 256, cfg.tol)
    crows = [
        {"n": n, "min_sin": r.min_sin, "max_cot": r.max_cot, "max_s_inv": r.max_s_inv,
         "max_s_minus_sin": r.max_s_minus_sin}
        for n, r in sorted(scan.reports.items())
    ]
    out.table("contour_bounds", ["n", "min_sin", "max_cot", "max_s_inv", "max_s_minus_sin"], crows,
              {"threshold": scan.threshold})
    out.document("run", {
        "config": _config_doc(cfg),
        "potential": {"label": Q.label, "r": Q.r, "l2_norm": l2_norm(Q)},
        "summary": {
            "asymptotic_threshold": asy.threshold,
            "contour_threshold": scan.threshold,
            "S_N": rep.partial_sums[-1],
            "tail_ratio": rep.tail_ratio(rep.N_max) if rep.N_max >= 2 else None,
            "deviation_tail_ratio": (rep.tail_ratio(rep.N_max, rep.deviation_partial_sums)
                                     if rep.N_max >= 2 else None),
        },
        "warnings": warnings,
    })
    print(f"report written to {out.dir}")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "projectors": cmd_projectors,
    "bari-markus": cmd_bari_markus,
    "verify": cmd_verify,
    "report": cmd_report,
}


# --- argument handling ----------------------------------------------------------------


_RANGE = re.compile(r"^\s*(-?\d+)\s*\.\.\s*(-?\d+)\s*$")


def parse_strips(text: str) -> tuple[int, int]:
    m = _RANGE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"strip range must look like A..B, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dirac-riesz", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--potential", help="potential JSON file or inline JSON (default: free potential)")
    p.add_argument("--r", type=int, default=1, help="block size of the default free potential")
    p.add_argument("--strips", type=parse_strips, default=(-4, 4), metavar="A..B",
                   help="strip index range, inclusive (default -4..4)")
    p.add_argument("--grid", type=int, default=DEFAULT_KERNEL_GRID, help="kernel grid nodes")
    p.add_argument("--contour-nodes", type=int, default=DEFAULT_NODES, help="initial contour nodes")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="integrator tolerance")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--oracle-m", type=int, default=1024, help="oracle grid size for verify")
    p.add_argument("--dump-kernels", action="store_true", help="also write kernel files")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _normalise_argv(argv: Sequence[str]) -> list[str]:
    # "--strips -4..4" would otherwise be read as an option
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--strips":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--strips={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_normalise_argv(argv))
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(
            command=args.command, potential=args.potential, r=args.r, strips=args.strips,
            grid=args.grid, contour_nodes=args.contour_nodes, tol=args.tol, out=args.out,
            format=args.format, oracle_m=args.oracle_m, dump_kernels=args.dump_kernels,
        )
        cfg.load()
        out = Writer(cfg)
    except FileNotFoundError as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, PotentialSpecError) as exc:
        print(f"error: input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[cfg.command](cfg, out)
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"error: {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
