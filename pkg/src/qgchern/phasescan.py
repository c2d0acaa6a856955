"""Phase-diagram scans over a plane of scatterer parameters, plus the CLI.

Each grid node gets a Chern vector from the flux-grid method.  Analytic
phase boundaries are traced independently: for each of the two closed-form
crossing roots the node carries ``exp(4i(gamma_root - gamma))``, and the
boundary is the level set where its phase passes through zero.  The factor
four removes the pi/2 ambiguity between the paired roots.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .chern import chern_fhs
from .degeneracy import gamma_crossings, gamma_values
from .errors import GapClosure, QGError, ValidationError
from .scatter import PARAM_NAMES, ScatterParams, _parse_value, apply_gamma, build_s0, parse_config_text

JOBS_ENV = "PHASESCAN_JOBS"
FORMATS = ("csv", "json", "ppm")
SCAN_KEYS = tuple(
    f"scan.{ax}{suffix}" for ax in ("axis1", "axis2") for suffix in ("", ".min", ".max", ".count")
) + ("scan.grid", "scan.band", "scan.formats")

COLORS = {
    -1: (110, 140, 255),
    0: (255, 255, 255),
    1: (255, 120, 110),
    None: (128, 128, 128),
}
CURVE_COLORS = {1: (220, 0, 0), -1: (0, 0, 220), 0: (0, 0, 0)}


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class ScanSpec:
    base: ScatterParams
    axis1: Axis
    axis2: Axis
    grid_n: int = 24
    band_index: int | str = 1
    outputs: tuple = FORMATS

    def validate(self) -> "ScanSpec":
        for ax in (self.axis1, self.axis2):
            if ax.name not in PARAM_NAMES:
                raise ValidationError(f"unknown scan axis {ax.name!r}")
            if not (np.isfinite(ax.lo) and np.isfinite(ax.hi)) or ax.lo == ax.hi:
                raise ValidationError(f"axis {ax.name}: range must be finite and non-empty")
            if ax.count < 2:
                raise ValidationError(f"axis {ax.name}: count must be at least 2")
        if self.axis1.name == self.axis2.name:
            raise ValidationError("the two scan axes must be different parameters")
        if self.grid_n < 8:
            raise ValidationError("flux grid must be at least 8")
        if self.band_index != "all" and self.band_index not in (1, 2, 3, 4):
            raise ValidationError("band must be 1..4 or 'all'")
        bad = [o for o in self.outputs if o not in FORMATS]
        if bad:
            raise ValidationError(f"unknown output formats {bad}")
        return self

    def params_at(self, i: int, j: int) -> ScatterParams:
        return self.base.with_(**{self.axis1.name: float(self.axis1.values()[i]), self.axis2.name: float(self.axis2.values()[j])})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outputs"] = list(self.outputs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScanSpec":
        return cls(
            base=ScatterParams(**d["base"]),
            axis1=Axis(**d["axis1"]),
            axis2=Axis(**d["axis2"]),
            grid_n=int(d["grid_n"]),
            band_index=d["band_index"],
            outputs=tuple(d["outputs"]),
        )


@dataclass(frozen=True)
class CellResult:
    c: tuple | None
    converged: bool
    status: str  # "ok", "boundary" or "undetermined"
    message: str = ""


@dataclass(frozen=True)
class Curve:
    sign: int
    points: tuple  # ((x, y), ...) in axis coordinates

    def to_dict(self) -> dict:
        return {"sign": self.sign, "points": [list(p) for p in self.points]}


@dataclass
class PhaseGrid:
    spec: ScanSpec
    cells: list  # cells[i][j], i along axis1
    curves: list = field(default_factory=list)

    def chern_array(self, band: int) -> np.ndarray:
        """Chern number of one band per cell; NaN for cells without one."""
        out = np.full((self.spec.axis1.count, self.spec.axis2.count), np.nan)
        for i, row in enumerate(self.cells):
            for j, cell in enumerate(row):
                if cell.c is not None and cell.status == "ok":
                    out[i, j] = cell.c[band - 1]
        return out

    @property
    def n_undetermined(self) -> int:
        return sum(cell.status == "undetermined" for row in self.cells for cell in row)

    @property
    def n_boundary(self) -> int:
        return sum(cell.status == "boundary" for row in self.cells for cell in row)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "cells": [[{"c": list(c.c) if c.c is not None else None, "converged": c.converged, "status": c.status, "message": c.message} for c in row] for row in self.cells],
            "curves": [c.to_dict() for c in self.curves],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseGrid":
        cells = [
            [CellResult(tuple(c["c"]) if c["c"] is not None else None, c["converged"], c["status"], c["message"]) for c in row]
            for row in d["cells"]
        ]
        curves = [Curve(int(c["sign"]), tuple(tuple(p) for p in c["points"])) for c in d["curves"]]
        return cls(spec=ScanSpec.from_dict(d["spec"]), cells=cells, curves=curves)

    def __eq__(self, other) -> bool:
        return isinstance(other, PhaseGrid) and self.to_dict() == other.to_dict()


# --------------------------------------------------------------------- config


def parse_scan_text(text: str, grid: int | None = None, formats=None) -> ScanSpec:
    params, extras = parse_config_text(text, extra_keys=SCAN_KEYS)
    base = ScatterParams(**params)
    axes = []
    for ax in ("axis1", "axis2"):
        keys = [f"scan.{ax}", f"scan.{ax}.min", f"scan.{ax}.max", f"scan.{ax}.count"]
        missing = [k for k in keys if k not in extras]
        if missing:
            raise ValidationError(f"missing scan keys: {', '.join(missing)}")
        try:
            count = int(extras[keys[3]])
        except ValueError:
            raise ValidationError(f"{keys[3]} must be an integer") from None
        axes.append(
            Axis(
                name=extras[keys[0]].strip(),
                lo=_parse_value(extras[keys[1]], keys[1], 0),
                hi=_parse_value(extras[keys[2]], keys[2], 0),
                count=count,
            )
        )
    band: int | str = 1
    if "scan.band" in extras:
        raw = extras["scan.band"].strip()
        band = raw if raw == "all" else _int_or_fail(raw, "scan.band")
    grid_n = grid if grid is not None else _int_or_fail(extras.get("scan.grid", "24"), "scan.grid")
    if formats is None:
        formats = extras.get("scan.formats", ",".join(FORMATS))
    outputs = tuple(f.strip() for f in formats.split(",") if f.strip()) if isinstance(formats, str) else tuple(formats)
    return ScanSpec(base=base, axis1=axes[0], axis2=axes[1], grid_n=grid_n, band_index=band, outputs=outputs).validate()


def _int_or_fail(raw: str, key: str) -> int:
    try:
        return int(str(raw).strip())
    except ValueError:
        raise ValidationError(f"{key} must be an integer, got {raw!r}") from None


def load_scan(path, grid: int | None = None, formats=None) -> ScanSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    return parse_scan_text(text, grid=grid, formats=formats)


# ----------------------------------------------------------------------- scan


def evaluate_cell(p: ScatterParams, grid_n: int) -> CellResult:
    try:
        cv = chern_fhs(apply_gamma(build_s0(p), p.gamma), grid_n)
    except GapClosure as exc:
        return CellResult(None, False, "boundary", str(exc))
    except (QGError, ValueError, FloatingPointError) as exc:
        return CellResult(None, False, "undetermined", f"{type(exc).__name__}: {exc}")
    return CellResult(cv.c, cv.converged, "ok" if cv.converged else "boundary")


def _row(args) -> list:
    spec, i = args
    return [evaluate_cell(spec.params_at(i, j), spec.grid_n) for j in range(spec.axis2.count)]


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        raw = os.environ.get(JOBS_ENV)
        if raw is None:
            return 1
        try:
            jobs = int(raw)
        except ValueError:
            raise ValidationError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ValidationError("worker count must be at least 1")
    return jobs


def run_scan(spec: ScanSpec, jobs: int = 1, curves: bool = True) -> PhaseGrid:
    """Evaluate every node of the scan plane; rows are assembled in index order."""
    spec.validate()
    tasks = [(spec, i) for i in range(spec.axis1.count)]
    if jobs <= 1:
        cells = [_row(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_row, tasks))
    grid = PhaseGrid(spec=spec, cells=cells)
    if curves:
        grid.curves = trace_boundaries(spec)
    return grid


# ----------------------------------------------------------------- boundaries


def crossing_phase_field(spec: ScanSpec) -> np.ndarray:
    """``exp(4i(gamma_root - gamma))`` per node and root, shape (n1, n2, 2); NaN if no crossing."""
    n1, n2 = spec.axis1.count, spec.axis2.count
    z = np.full((n1, n2, 2), np.nan + 0j)
    for i in range(n1):
        for j in range(n2):
            p = spec.params_at(i, j)
            try:
                vals = gamma_values(build_s0(p))
            except QGError:
                continue
            for branch, g in vals:
                if branch % 2 == 0:
                    z[i, j, branch // 2] = np.exp(4j * (g - p.gamma))
    return z


def _edge_root(t1, t2):
    """Fraction along an edge where the phase passes zero, or None."""
    if not (np.isfinite(t1) and np.isfinite(t2)):
        return None
    if t1 == 0:
        return 0.0
    if (t1 > 0) == (t2 > 0) and t2 != 0:
        return None
    if abs(t1 - t2) >= np.pi:
        return None  # the phase wrapped through pi, not zero
    return float(t1 / (t1 - t2))


def _segments(theta, xs, ys):
    """Marching squares on a phase field; returns a list of point pairs."""
    segs = []
    n1, n2 = theta.shape
    for i in range(n1 - 1):
        for j in range(n2 - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            pts = []
            for e in range(4):
                a, b = corners[e], corners[(e + 1) % 4]
                f = _edge_root(theta[a], theta[b])
                if f is None or (f == 1.0):
                    continue
                x = xs[a[0]] + f * (xs[b[0]] - xs[a[0]])
                y = ys[a[1]] + f * (ys[b[1]] - ys[a[1]])
                pts.append((float(x), float(y)))
            for k in range(0, len(pts) - 1, 2):
                segs.append((pts[k], pts[k + 1]))
    return segs


def _curve_sign(spec: ScanSpec, x: float, y: float) -> int:
    p = spec.base.with_(**{spec.axis1.name: x, spec.axis2.name: y})
    try:
        sols = gamma_crossings(build_s0(p), check=False)
    except QGError:
        return 0
    if not sols:
        return 0
    d = [abs((s.gamma - p.gamma + np.pi / 2) % np.pi - np.pi / 2) for s in sols]
    return int(sols[int(np.argmin(d))].sign)


def _chain(segs, tol):
    """Join segments sharing endpoints into polylines."""
    def key(p):
        return (round(p[0] / tol), round(p[1] / tol))

    remaining = list(segs)
    lines = []
    while remaining:
        a, b = remaining.pop(0)
        line = [a, b]
        grown = True
        while grown:
            grown = False
            for idx, (c, d) in enumerate(remaining):
                if key(c) == key(line[-1]):
                    line.append(d)
                elif key(d) == key(line[-1]):
                    line.append(c)
                elif key(d) == key(line[0]):
                    line.insert(0, c)
                elif key(c) == key(line[0]):
                    line.insert(0, d)
                else:
                    continue
                remaining.pop(idx)
                grown = True
                break
        lines.append(line)
    return lines


def trace_boundaries(spec: ScanSpec) -> list:
    """Analytic boundary polylines, each with the transition sign of its crossing."""
    xs, ys = spec.axis1.values(), spec.axis2.values()
    z = crossing_phase_field(spec)
    tol = 1e-9 * max(abs(spec.axis1.hi - spec.axis1.lo), abs(spec.axis2.hi - spec.axis2.lo))
    curves = []
    for root in range(2):
        theta = np.angle(z[..., root])
        segs = _segments(theta, xs, ys)
        signed = {}
        for a, b in segs:
            s = _curve_sign(spec, (a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
            signed.setdefault(s, []).append((a, b))
        for s in sorted(signed):
            for line in _chain(signed[s], tol):
                curves.append(Curve(sign=s, points=tuple(line)))
    return curves


# ---------------------------------------------------------------------- emit


def emit_csv(grid: PhaseGrid, path) -> None:
    xs, ys = grid.spec.axis1.values(), grid.spec.axis2.values()
    lines = ["axis1,axis2,c1,c2,c3,c4,converged"]
    for i, row in enumerate(grid.cells):
        for j, cell in enumerate(row):
            c = [str(v) for v in cell.c] if cell.c is not None else [""] * 4
            lines.append(",".join([f"{xs[i]:.12g}", f"{ys[j]:.12g}", *c, "1" if cell.converged else "0"]))
    Path(path).write_text("\n".join(lines) + "\n")


def emit_json(grid: PhaseGrid, path) -> None:
    Path(path).write_text(json.dumps(grid.to_dict(), indent=1, sort_keys=True) + "\n")


def load_json(path) -> PhaseGrid:
    return PhaseGrid.from_dict(json.loads(Path(path).read_text()))


def raster(grid: PhaseGrid, band: int | None = None, curves: bool = True) -> np.ndarray:
    """RGB image (rows top to bottom = axis2 high to low, columns = axis1)."""
    band = band or (grid.spec.band_index if grid.spec.band_index != "all" else 1)
    n1, n2 = grid.spec.axis1.count, grid.spec.axis2.count
    img = np.zeros((n2, n1, 3), dtype=np.uint8)
    for i, row in enumerate(grid.cells):
        for j, cell in enumerate(row):
            val = cell.c[band - 1] if (cell.c is not None and cell.status == "ok") else None
            img[n2 - 1 - j, i] = COLORS.get(val, COLORS[None])
    if curves:
        for px, py, s in curve_pixels(grid):
            img[py, px] = CURVE_COLORS.get(s, CURVE_COLORS[0])
    return img


def curve_pixels(grid: PhaseGrid):
    """Pixel coordinates ``(column, row, sign)`` covered by the boundary curves."""
    ax1, ax2 = grid.spec.axis1, grid.spec.axis2
    n1, n2 = ax1.count, ax2.count
    out = []
    for curve in grid.curves:
        pts = np.array(curve.points, dtype=float)
        for a, b in zip(pts[:-1], pts[1:]):
            steps = 8
            for t in np.linspace(0, 1, steps + 1):
                x, y = a + t * (b - a)
                col = int(round((x - ax1.lo) / (ax1.hi - ax1.lo) * (n1 - 1)))
                row = n2 - 1 - int(round((y - ax2.lo) / (ax2.hi - ax2.lo) * (n2 - 1)))
                if 0 <= col < n1 and 0 <= row < n2:
                    out.append((col, row, curve.sign))
    return out


def emit_ppm(grid: PhaseGrid, path, band: int | None = None) -> None:
    img = raster(grid, band)
    h, w, _ = img.shape
    lines = ["P3", f"{w} {h}", "255"]
    for r in range(h):
        lines.append(" ".join(f"{v}" for v in img[r].ravel()))
    Path(path).write_text("\n".join(lines) + "\n")


def read_ppm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if tokens[0] != "P3":
        raise ValueError("not a plain PPM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4 : 4 + w * h * 3], dtype=int)
    if maxval != 255:
        data = data * 255 // maxval
    return data.reshape(h, w, 3).astype(np.uint8)


def emit(grid: PhaseGrid, kind: str, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"phase.{kind}"
    {"csv": emit_csv, "json": emit_json, "ppm": emit_ppm}[kind](grid, path)
    return path


# ----------------------------------------------------------------------- CLI


def _cmd_run(args) -> int:
    formats = args.formats
    spec = load_scan(args.config, grid=args.grid, formats=formats)
    jobs = resolve_jobs(args.jobs)
    grid = run_scan(spec, jobs=jobs)
    for kind in spec.outputs:
        path = emit(grid, kind, args.out)
        print(f"wrote {path}")
    total = spec.axis1.count * spec.axis2.count
    print(f"cells: {total}  boundary: {grid.n_boundary}  undetermined: {grid.n_undetermined}  curves: {len(grid.curves)}", file=sys.stderr)
    return 2 if grid.n_undetermined else 0


def _params_from(path) -> ScatterParams:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    params, _ = parse_config_text(text, extra_keys=SCAN_KEYS)
    return ScatterParams(**params)


def _cmd_crossings(args) -> int:
    p = _params_from(args.config)
    sols = gamma_crossings(build_s0(p))
    print("gamma\tbranch\tk\tphi1\tphi2\tsign")
    for s in sols:
        print(f"{s.gamma:.12g}\t{s.branch}\t{s.k:.12g}\t{s.flux_a.phi1:.12g}\t{s.flux_a.phi2:.12g}\t{s.sign:+d}")
    return 0


def _cmd_chern(args) -> int:
    p = _params_from(args.config)
    try:
        cv = chern_fhs(apply_gamma(build_s0(p), p.gamma), args.phi_grid)
    except GapClosure as exc:
        print(f"undetermined: {exc}", file=sys.stderr)
        return 2
    print(" ".join(str(v) for v in cv.c))
    if not cv.converged:
        print(f"warning: not converged (residual {cv.residual:.2e})", file=sys.stderr)
        return 2
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors: exit 1, keep 2 for partial scans
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="phasescan", description="Chern phase diagrams of the two-loop quantum graph.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="scan a parameter plane")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--grid", type=int, default=None, help="flux grid size (overrides scan.grid)")
    run.add_argument("--jobs", type=int, default=None, help=f"worker processes (default: ${JOBS_ENV} or 1)")
    run.add_argument("--formats", default=None, help="comma list from csv,json,ppm")
    run.set_defaults(func=_cmd_run)

    cr = sub.add_parser("crossings", help="print the gamma crossing table")
    cr.add_argument("--config", required=True)
    cr.set_defaults(func=_cmd_crossings)

    ch = sub.add_parser("chern", help="print the four band Chern numbers")
    ch.add_argument("--config", required=True)
    ch.add_argument("--phi-grid", type=int, default=40)
    ch.set_defaults(func=_cmd_chern)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
