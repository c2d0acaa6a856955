"""Bands of the figure-eight graph and its one-loop reductions.

Bands are the wavenumbers ``k`` with ``exp(-i k)`` an eigenvalue of
``Lambda(phi1, phi2) S``.  Because ``det Lambda = 1`` the sum of the four
wavenumbers is pinned (mod 2 pi) by ``det S`` alone, which gives every flux
point a canonical lift: the four values sorted increasingly, spanning less
than one period, shifted by whole periods so their sum hits that pinned
value.  The lift is continuous in the flux and in gamma, so sorted position
doubles as the band label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cxmat import TWO_PI, eig_unitary_batch, pauli_log_batch, phase_of
from .errors import NoConvergence, SingularReduction

SINGULAR_TOL = 1e-12
REFINE_TOL = 1e-8


@dataclass(frozen=True)
class FluxPair:
    phi1: float
    phi2: float

    def __post_init__(self):
        object.__setattr__(self, "phi1", float(np.remainder(self.phi1, TWO_PI)))
        object.__setattr__(self, "phi2", float(np.remainder(self.phi2, TWO_PI)))

    def shifted(self, d1: float, d2: float) -> "FluxPair":
        return FluxPair(self.phi1 + d1, self.phi2 + d2)

    def as_tuple(self) -> tuple[float, float]:
        return (self.phi1, self.phi2)


@dataclass(frozen=True)
class BandSet:
    k: np.ndarray
    vectors: np.ndarray
    flux: FluxPair

    @property
    def gaps(self) -> np.ndarray:
        return band_gaps(self.k)


@dataclass(frozen=True)
class HField:
    h0: float
    h: np.ndarray
    k: float
    flux: FluxPair


def flux_block(phi):
    """``[[0, e^{i phi}], [e^{-i phi}, 0]]`` broadcast over ``phi``."""
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = np.exp(1j * phi)
    out[..., 1, 0] = np.exp(-1j * phi)
    return out


def lambda_batch(phi1, phi2):
    phi1, phi2 = np.broadcast_arrays(np.asarray(phi1, float), np.asarray(phi2, float))
    out = np.zeros(phi1.shape + (4, 4), dtype=complex)
    out[..., 0, 1] = np.exp(1j * phi1)
    out[..., 1, 0] = np.exp(-1j * phi1)
    out[..., 2, 3] = np.exp(1j * phi2)
    out[..., 3, 2] = np.exp(-1j * phi2)
    return out


def lambda_of(flux: FluxPair) -> np.ndarray:
    return lambda_batch(flux.phi1, flux.phi2)


def sum_target(s) -> float:
    """Pinned value of the band sum, ``-arg det S`` in (-pi, pi]."""
    t = -phase_of(np.linalg.det(np.asarray(s, dtype=complex)))
    if t < -np.pi + 1e-9:
        t += TWO_PI
    return float(t)


def lift_bands(phases, target):
    """Canonical lift of eigenphases (ascending, last axis) to band wavenumbers.

    Returns ``(k, perm)``; ``perm`` maps band slots to eigenphase columns.
    """
    k = -np.asarray(phases, dtype=float)[..., ::-1]
    k = np.where(k <= -np.pi, k + TWO_PI, k)
    order = np.argsort(k, axis=-1, kind="stable")
    k = np.take_along_axis(k, order, -1)
    perm = 3 - order
    shift = np.rint((k.sum(-1) - np.asarray(target)) / TWO_PI).astype(int)
    slots = np.arange(4) - shift[..., None]
    src = np.mod(slots, 4)
    k = np.take_along_axis(k, src, -1) + TWO_PI * np.floor_divide(slots, 4)
    perm = np.take_along_axis(perm, src, -1)
    return k, perm


def bands_batch(s, phi1, phi2, target=None, check: bool = True):
    """Band wavenumbers ``(..., 4)`` and eigenvectors ``(..., 4, 4)`` on a flux array."""
    s = np.asarray(s, dtype=complex)
    if target is None:
        target = sum_target(s if s.ndim == 2 else s.reshape(-1, 4, 4)[0])
    m = lambda_batch(phi1, phi2) @ s
    phases, vecs = eig_unitary_batch(m, check=check)
    k, perm = lift_bands(phases, target)
    vecs = np.take_along_axis(vecs, perm[..., None, :], -1)
    return k, vecs


def band_gaps(k):
    """Gaps between consecutive bands including the wrap-around gap."""
    k = np.asarray(k, dtype=float)
    ext = np.concatenate([k, k[..., :1] + TWO_PI], axis=-1)
    return np.diff(ext, axis=-1)


def band_set(s, flux: FluxPair, ref: BandSet | None = None) -> BandSet:
    """Bands at one flux point.

    Without ``ref`` the canonical lift is used.  With ``ref`` the sum is held
    at the reference value, which selects the continuation closest to it.
    """
    target = sum_target(s) if ref is None else float(np.sum(ref.k))
    k, v = bands_batch(s, flux.phi1, flux.phi2, target=target)
    if ref is not None:
        # sorted matching is optimal for the L1 distance on the line; only
        # the 2 pi windowing needs checking against the reference
        k = k + TWO_PI * np.rint((ref.k - k).mean() / TWO_PI)
    return BandSet(k=k, vectors=v, flux=flux)


def continue_bands(s, path, max_halvings: int = 20) -> list[BandSet]:
    """Follow the bands along a list of flux points.

    A step is halved whenever the smallest gap at either end is below ten
    times the largest band change over the step.
    """
    pts = [np.array([f.phi1, f.phi2], dtype=float) if isinstance(f, FluxPair) else np.asarray(f, float) for f in path]
    first = band_set(s, FluxPair(*pts[0]))
    out = [first]
    prev, prev_pt = first, pts[0]
    for pt in pts[1:]:
        delta = _unwrap_delta(pt - prev_pt)
        prev = _advance(s, prev, prev_pt, delta, max_halvings)
        prev_pt = pt
        out.append(BandSet(k=prev.k, vectors=prev.vectors, flux=FluxPair(*pt)))
    return out


def _unwrap_delta(d):
    return (d + np.pi) % TWO_PI - np.pi


def _advance(s, ref, start, delta, depth):
    end = start + delta
    cand = band_set(s, FluxPair(*end), ref=ref)
    change = np.abs(cand.k - ref.k).max()
    gap = min(band_gaps(cand.k).min(), band_gaps(ref.k).min())
    if gap >= 10 * change or change == 0:
        return cand
    if depth == 0:
        raise NoConvergence("band continuation could not resolve a near-crossing")
    mid = _advance(s, ref, start, delta / 2, depth - 1)
    return _advance(s, mid, start + delta / 2, delta / 2, depth - 1)


def _solve2(a, b):
    """Batched ``a^{-1} b`` for 2x2 systems; also returns ``|det a|``."""
    d = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    inv = np.empty_like(a)
    inv[..., 0, 0] = a[..., 1, 1]
    inv[..., 1, 1] = a[..., 0, 0]
    inv[..., 0, 1] = -a[..., 0, 1]
    inv[..., 1, 0] = -a[..., 1, 0]
    safe = np.where(d == 0, 1, d)
    inv = inv / safe[..., None, None]
    x = inv @ b
    near = (np.abs(d) < REFINE_TOL)
    if np.any(near):
        x = np.where(near[..., None, None], x + inv @ (b - a @ x), x)
    return x, np.abs(d)


def _reduce(s, k, phi, keep_upper: bool, strict: bool):
    s = np.asarray(s, dtype=complex)
    k = np.asarray(k, dtype=float)
    if keep_upper:
        # Lambda_2 loop is closed: S1 = S11 + S12 (e^{-ik} L2 - S22)^{-1} S21
        own, inner, out_, in_ = s[..., :2, :2], s[..., 2:, 2:], s[..., :2, 2:], s[..., 2:, :2]
    else:
        own, inner, out_, in_ = s[..., 2:, 2:], s[..., :2, :2], s[..., 2:, :2], s[..., :2, 2:]
    a = np.exp(-1j * k)[..., None, None] * flux_block(phi) - inner
    x, dabs = _solve2(a, in_)
    if strict and np.any(dabs < SINGULAR_TOL):
        raise SingularReduction(f"|det| = {float(np.min(dabs)):.2e} below {SINGULAR_TOL:.0e}")
    red = out_ @ x + own
    if not strict:
        red = np.where((dabs < SINGULAR_TOL)[..., None, None], np.nan, red)
    return red


def reduced_s2(s, k, phi1, strict: bool = True):
    """``S21 (e^{-ik} L1(phi1) - S11)^{-1} S12 + S22`` (loop 1 closed)."""
    return _reduce(s, k, phi1, keep_upper=False, strict=strict)


def reduced_s1(s, k, phi2, strict: bool = True):
    """``S11 + S12 (e^{-ik} L2(phi2) - S22)^{-1} S21`` (loop 2 closed)."""
    return _reduce(s, k, phi2, keep_upper=True, strict=strict)


def h_field_batch(s, k, phi1, phi2, strict: bool = True):
    """Pauli field ``(h0, h)`` of ``e^{ik} L2(phi2) S2(k, phi1)``, broadcast."""
    k, phi1, phi2 = np.broadcast_arrays(*(np.asarray(v, float) for v in (k, phi1, phi2)))
    red = reduced_s2(s, k, phi1, strict=strict)
    m = np.exp(1j * k)[..., None, None] * (flux_block(phi2) @ red)
    return pauli_log_batch(m, check=False)


def h_field(s, k: float, flux: FluxPair) -> HField:
    h0, h = h_field_batch(s, k, flux.phi1, flux.phi2)
    return HField(h0=float(h0), h=np.asarray(h, float), k=float(k), flux=flux)


def reduced_secular(s, k, phi1, phi2, which: int):
    """``det(L_j S_j(k) - e^{-ik} I)`` for ``which`` in {1, 2}."""
    k = np.asarray(k, float)
    if which == 2:
        m = flux_block(phi2) @ reduced_s2(s, k, phi1, strict=False)
    else:
        m = flux_block(phi1) @ reduced_s1(s, k, phi2, strict=False)
    e = np.exp(-1j * k)[..., None, None] * np.eye(2)
    d = m - e
    return d[..., 0, 0] * d[..., 1, 1] - d[..., 0, 1] * d[..., 1, 0]


def secular_roots(s, phi1, phi2, which: int, n_scan: int = 2048, tol: float = 1e-13):
    """Real roots in (-pi, pi] of the reduced secular determinant.

    Local minima of ``|det|`` on a uniform scan seed Gauss-Newton steps
    along the real axis; seeds that do not converge to a zero are dropped.
    """
    grid = -np.pi + TWO_PI * (np.arange(n_scan) + 0.5) / n_scan
    mag = np.abs(reduced_secular(s, grid, phi1, phi2, which))
    mag = np.where(np.isfinite(mag), mag, np.inf)
    left, right = np.roll(mag, 1), np.roll(mag, -1)
    seeds = grid[(mag <= left) & (mag <= right)]
    h = 1e-7
    roots = []
    for k in seeds:
        for _ in range(60):
            f = reduced_secular(s, k, phi1, phi2, which)
            df = (reduced_secular(s, k + h, phi1, phi2, which) - reduced_secular(s, k - h, phi1, phi2, which)) / (2 * h)
            den = abs(df) ** 2
            if not np.isfinite(den) or den == 0:
                break
            step = -float((np.conj(df) * f).real) / den
            k = k + step
            if abs(step) < tol:
                break
        if abs(reduced_secular(s, k, phi1, phi2, which)) < 1e-9:
            roots.append(float(phase_of(np.exp(1j * k))))
    roots = np.sort(np.array(roots))
    if roots.size:
        keep = np.concatenate([[True], np.diff(roots) > 1e-7])
        roots = roots[keep]
        if roots.size > 1 and roots[-1] - roots[0] > TWO_PI - 1e-7:
            roots = roots[1:]
    return roots
