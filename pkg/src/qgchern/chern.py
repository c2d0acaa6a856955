"""Band Chern numbers on the flux torus.

Two independent routes:

* ``chern_fhs``: link variables of explicit eigenvectors on an n x n flux
  grid, plaquette phases summed over the torus.
* ``chern_degree``: signed count of the preimages of the poles of the
  band's Bloch sphere map, located in closed form from the ellipse
  intersection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cxmat import TWO_PI, assert_unitary, phase_of
from .degeneracy import small_coeffs, triangle_data
from .errors import DegenerateEllipse, DegenerateJacobian, GapClosure, Inconsistent, TangentEllipses
from .spectral import FluxPair, band_gaps, bands_batch, reduced_s2, sum_target

GAP_TOL = 1e-10
RESIDUAL_TOL = 1e-3
MIN_CELL = 1e-7
MIN_GRID = 8
LINK_TOL = 1e-12


@dataclass(frozen=True)
class PreimagePoint:
    flux: FluxPair
    k: float
    band_index: int  # 1-based
    jacobian_sign: int
    pole: str  # "north" | "south"


@dataclass(frozen=True)
class ChernVector:
    c: tuple
    grid_n: int
    converged: bool
    residual: float = 0.0
    min_gap: float = float("nan")
    preimages: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(int(x) for x in self.c))

    @property
    def is_trivial(self) -> bool:
        return all(x == 0 for x in self.c)

    @property
    def is_alternating(self) -> bool:
        c = self.c
        return all(abs(x) == 1 for x in c) and all(c[i] == -c[(i + 1) % 4] for i in range(4))


def _grid(n):
    return (np.arange(n) + 0.5) * TWO_PI / n


def _link(a, b):
    u = np.einsum("...ij,...ij->...j", np.conj(a), b)
    mag = np.abs(u)
    if mag.min() < LINK_TOL:
        # neighbouring eigenvectors are orthogonal: two bands swapped between grid points
        raise GapClosure(f"link overlap {mag.min():.1e} vanishes between neighbouring grid points")
    return u / mag


def _plaquettes(v):
    """Plaquette phases ``(..., n1, n2, 4)`` from eigenvectors on a periodic grid."""
    link = _link

    v1 = np.roll(v, -1, axis=-4)
    v2 = np.roll(v, -1, axis=-3)
    v12 = np.roll(v1, -1, axis=-3)
    return np.angle(link(v, v1) * link(v1, v12) * np.conj(link(v2, v12)) * np.conj(link(v, v2)))


def _whole_turns(x):
    return TWO_PI * np.rint(x / TWO_PI)


def _children_field(s, target, cells):
    """Plaquette phases of the four quadrants of each cell ``(lo1, lo2, h)``.

    Returns ``(phases, gap)`` with phases shaped (K, 2, 2, 4).
    """
    t = np.array([0.0, 0.5, 1.0])
    p1 = cells[:, 0, None, None] + cells[:, 2, None, None] * t[None, :, None]
    p2 = cells[:, 1, None, None] + cells[:, 2, None, None] * t[None, None, :]
    k, v = bands_batch(s, p1, p2, target=target, check=False)
    a, b = v[:, :-1, :-1], v[:, 1:, :-1]
    c, d = v[:, 1:, 1:], v[:, :-1, 1:]
    f = np.angle(_link(a, b) * _link(b, c) * np.conj(_link(d, c)) * np.conj(_link(a, d)))
    return f, float(band_gaps(k).min())


def _refined_flux(s, target, cells, min_size):
    """Berry flux per band through each cell, splitting cells while a quadrant is hot.

    Returns ``(flux (K, 4), gap, ok)``; ``ok`` is False when a quadrant is
    still hot at the smallest allowed size.
    """
    f, gap = _children_field(s, target, cells)
    if gap < GAP_TOL:
        raise GapClosure(f"band gap {gap:.2e} in a refined cell")
    hot = np.abs(f).max(axis=-1) > np.pi / 2
    ok = True
    flux = f.copy()
    if hot.any():
        half = cells[:, 2] / 2
        if half[0] / 2 < min_size:
            ok = False
        else:
            idx = np.argwhere(hot)
            sub = np.stack(
                [cells[idx[:, 0], 0] + idx[:, 1] * half[idx[:, 0]], cells[idx[:, 0], 1] + idx[:, 2] * half[idx[:, 0]], half[idx[:, 0]]],
                axis=-1,
            )
            fine, sub_gap, sub_ok = _refined_flux(s, target, sub, min_size)
            gap, ok = min(gap, sub_gap), sub_ok
            coarse = f[idx[:, 0], idx[:, 1], idx[:, 2]]
            # keep the quadrant loop phase and add the whole turns seen by the subdivision
            flux[idx[:, 0], idx[:, 1], idx[:, 2]] = coarse + _whole_turns(fine - coarse)
    return flux.sum(axis=(1, 2)), gap, ok


def _fhs_raw(s, n, target):
    t = _grid(n)
    p1, p2 = np.meshgrid(t, t, indexing="ij")
    k, v = bands_batch(s, p1, p2, target=target, check=False)
    gap = float(band_gaps(k).min())
    if gap < GAP_TOL:
        raise GapClosure(f"band gap {gap:.2e} on the {n}x{n} grid")
    f = _plaquettes(v)
    total = f.sum(axis=(0, 1))
    refined_ok = True
    hot = np.argwhere(np.abs(f).max(axis=-1) > np.pi / 2)
    if len(hot):
        h = TWO_PI / n
        cells = np.stack([t[hot[:, 0]], t[hot[:, 1]], np.full(len(hot), h)], axis=-1)
        fine, sub_gap, refined_ok = _refined_flux(s, target, cells, MIN_CELL)
        gap = min(gap, sub_gap)
        coarse = f[hot[:, 0], hot[:, 1]]
        # shared coarse links keep the torus sum exact; only whole turns are added
        total = total + _whole_turns(fine - coarse).sum(axis=0)
    return total / TWO_PI, gap, refined_ok


def chern_fhs(s, n: int = 40, check_doubling: bool = True, max_doublings: int = 3) -> ChernVector:
    """Chern numbers of the four bands from an n x n flux grid.

    The grid is cell-centred.  Plaquettes whose phase exceeds pi/2 are
    split into quadrants recursively, only where a quadrant stays above
    pi/2, down to a side of ``MIN_CELL``.  With ``check_doubling`` the grid
    is doubled until two consecutive grids round to the same vector (at
    most ``max_doublings`` times), which catches a plaquette carrying a
    whole turn that looks cold.  ``converged`` is set when both vectors of
    the agreeing pair have raw sums within 1e-3 of an integer.
    """
    if n < MIN_GRID:
        raise ValueError(f"grid size must be at least {MIN_GRID}, got {n}")
    s = assert_unitary(s, 1e-9)
    target = sum_target(s)

    def run(m):
        raw, gap, ok = _fhs_raw(s, m, target)
        c = np.rint(raw).astype(int)
        residual = float(np.abs(raw - c).max())
        return c, residual, gap, ok and residual < RESIDUAL_TOL

    c, residual, gap, converged = run(n)
    if not check_doubling:
        return ChernVector(c=tuple(c), grid_n=n, converged=bool(converged), residual=residual, min_gap=gap)
    for _ in range(max_doublings):
        c2, residual2, gap2, ok2 = run(2 * n)
        gap = min(gap, gap2)
        if converged and ok2 and np.array_equal(c, c2):
            return ChernVector(c=tuple(c), grid_n=n, converged=True, residual=residual, min_gap=gap)
        n, c, residual, converged = 2 * n, c2, residual2, ok2
    return ChernVector(c=tuple(c), grid_n=n, converged=False, residual=residual, min_gap=gap)


def bloch_vector(psi):
    """Bloch vector of a two-component state (not necessarily normalised)."""
    psi = np.asarray(psi, dtype=complex)
    norm = np.sum(np.abs(psi) ** 2, axis=-1)
    x = 2 * np.conj(psi[..., 0]) * psi[..., 1]
    return np.stack([x.real, x.imag, np.abs(psi[..., 0]) ** 2 - np.abs(psi[..., 1]) ** 2], axis=-1) / norm[..., None]


def _band_bloch(s, phi1, phi2, band, target):
    _, v = bands_batch(s, phi1, phi2, target=target, check=False)
    return bloch_vector(v[..., 2:, band])


def jacobian_sign(p: PreimagePoint, s, step: float = 1e-5) -> int:
    """Orientation of the band's Bloch map at a preimage.

    The map sends a flux point to the Bloch vector of the loop-2 part of
    the band eigenvector; the result is the sign of
    ``(d1 f x d2 f) . f`` by central differences.
    """
    s = np.asarray(s, dtype=complex)
    target = sum_target(s)
    x, y = p.flux.phi1, p.flux.phi2
    p1 = np.array([x, x + step, x - step, x, x])
    p2 = np.array([y, y, y, y + step, y - step])
    f = _band_bloch(s, p1, p2, p.band_index - 1, target)
    d1 = (f[1] - f[2]) / (2 * step)
    d2 = (f[3] - f[4]) / (2 * step)
    val = float(np.cross(d1, d2) @ f[0])
    if abs(val) < 1e-9:
        raise DegenerateJacobian(f"Jacobian {val:.2e} at {p.flux}")
    return 1 if val > 0 else -1


def pole_preimages(s) -> list[tuple[FluxPair, float, str]]:
    """Flux points and wavenumbers where the loop-2 reduction is reflectionless.

    Each intersection of the two ellipses gives one ``(k, phi1)``; the two
    off-diagonal phases then give one ``phi2`` per pole.
    """
    s = np.asarray(s, dtype=complex)
    t = triangle_data(small_coeffs(s))
    if not t.solvable:
        return []
    two_ab = 2 * abs(t.A) * abs(t.B)
    # tangency is the scale-free condition g = 2, so compare relative to 2|A||B|
    if abs(two_ab - abs(t.R)) < 1e-9 * two_ab:
        raise TangentEllipses(f"2|A||B| - |R| = {two_ab - abs(t.R):.2e}")
    if abs(t.C) < 1e-14:
        raise DegenerateEllipse("C vanishes")
    out = []
    for sg in (1, -1):
        for n in (0, 1):
            k = (t.delta + sg * t.psi) / 2 + n * np.pi
            z = np.exp(1j * k)
            phi1 = phase_of((t.A * z + t.B / z) / t.C)
            red = reduced_s2(s, k, phi1)
            north = phase_of(np.exp(-1j * k) * np.conj(red[1, 0]))
            south = phase_of(np.exp(1j * k) * red[0, 1])
            out.append((FluxPair(phi1, north), float(k), "north"))
            out.append((FluxPair(phi1, south), float(k), "south"))
    return out


def chern_degree(s) -> ChernVector:
    """Chern numbers as half the signed count of pole preimages per band."""
    s = assert_unitary(s, 1e-9)
    target = sum_target(s)
    pts = pole_preimages(s)
    counts = np.zeros(4)
    pre = []
    for flux, k, pole in pts:
        kb, v = bands_batch(s, flux.phi1, flux.phi2, target=target, check=False)
        dist = np.abs(phase_of(np.exp(1j * (kb - k))))
        band = int(np.argmin(dist))
        if np.sort(dist)[1] < 1e-8:
            raise GapClosure(f"preimage at {flux} sits on a band crossing")
        point = PreimagePoint(flux=flux, k=k, band_index=band + 1, jacobian_sign=0, pole=pole)
        sgn = jacobian_sign(point, s)
        point = PreimagePoint(flux=flux, k=k, band_index=band + 1, jacobian_sign=sgn, pole=pole)
        pre.append(point)
        counts[band] += 0.5 * sgn
    c = np.rint(counts).astype(int)
    if np.abs(counts - c).max() > 1e-12:
        raise Inconsistent(f"half-integer preimage count {counts}")
    return ChernVector(c=tuple(c), grid_n=0, converged=True, preimages=tuple(pre))
