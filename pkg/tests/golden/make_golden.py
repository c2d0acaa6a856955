"""Regenerate the golden phase rasters from the degree-map route.

Run from the repository root: ``python tests/golden/make_golden.py``.
The images are region maps only (no curves).  Where the preimage
construction degenerates (e.g. alpha = beta, or sin alpha = 0) the node
is retried at points displaced by 1e-3 within the scan plane, since the
Chern vector is locally constant away from gap closures.  Nodes where the
band gap itself closes (checked by minimising the LAPACK eigenphase gap
over the flux torus) or that still fail are gray.
"""

from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from qgchern.chern import chern_degree
from qgchern.errors import QGError
from qgchern.phasescan import COLORS, load_scan
from qgchern.scatter import apply_gamma, build_s0
from qgchern.spectral import lambda_batch

ROOT = Path(__file__).resolve().parents[2]
PANELS = ("fig4_left", "fig4_right", "fig5_left", "fig5_right", "fig6_left", "fig6_right")
SIZE = 40
STEP = 1e-3  # well inside one pixel (pitch ~0.08-0.16)
CLOSED_GAP = 1e-9
OFFSETS = tuple((STEP * np.cos(a), STEP * np.sin(a)) for a in np.arange(8) * np.pi / 4 + np.pi / 8)


def degree_raster(spec):
    band = spec.band_index if spec.band_index != "all" else 1
    n1, n2 = spec.axis1.count, spec.axis2.count
    img = np.zeros((n2, n1, 3), dtype=np.uint8)
    for i in range(n1):
        for j in range(n2):
            img[n2 - 1 - j, i] = COLORS[degree_value(spec, i, j, band)]
    return img


def _eigen_gap(s, phi1, phi2):
    w = np.sort(np.angle(np.linalg.eigvals(lambda_batch(phi1, phi2) @ s)), axis=-1)
    return np.diff(np.concatenate([w, w[..., :1] + 2 * np.pi], axis=-1), axis=-1).min(axis=-1)


def gap_closes(s, n=64, starts=4):
    # crossings of structured S often sit exactly on the quarter-turn flux points
    q = np.arange(4) * np.pi / 2
    x0s = [(a, b) for a in q for b in q]
    t = (np.arange(n) + 0.5) * 2 * np.pi / n
    p1, p2 = np.meshgrid(t, t, indexing="ij")
    g = _eigen_gap(s, p1, p2).ravel()
    x0s += [(p1.ravel()[k], p2.ravel()[k]) for k in np.argsort(g)[:starts]]
    for x0 in x0s:
        if _eigen_gap(s, *x0) < CLOSED_GAP:
            return True
        res = minimize(lambda x: _eigen_gap(s, x[0], x[1]), x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 4000})
        if res.fun < CLOSED_GAP:
            return True
    return False


def degree_value(spec, i, j, band):
    p = spec.params_at(i, j)
    a1, a2 = spec.axis1.name, spec.axis2.name
    try:
        return _degree(p, band)
    except QGError:
        pass
    if gap_closes(apply_gamma(build_s0(p), p.gamma)):
        return None
    for d1, d2 in OFFSETS:
        try:
            return _degree(p.with_(**{a1: getattr(p, a1) + d1, a2: getattr(p, a2) + d2}), band)
        except QGError:
            continue
    return None


def _degree(p, band):
    return chern_degree(apply_gamma(build_s0(p), p.gamma)).c[band - 1]


def write_ppm(img, path):
    h, w, _ = img.shape
    rows = ["P3", f"{w} {h}", "255"] + [" ".join(str(v) for v in img[r].ravel()) for r in range(h)]
    Path(path).write_text("\n".join(rows) + "\n")


def panel_spec(name):
    spec = load_scan(ROOT / "configs" / f"{name}.cfg")
    from dataclasses import replace

    return replace(spec, axis1=replace(spec.axis1, count=SIZE), axis2=replace(spec.axis2, count=SIZE), grid_n=16)


if __name__ == "__main__":
    for name in PANELS:
        write_ppm(degree_raster(panel_spec(name)), Path(__file__).with_name(f"{name}.ppm"))
        print("wrote", name)
