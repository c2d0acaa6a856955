"""Closed-form band crossings along the gamma family.

A crossing of two bands needs both one-loop reductions to be scalar.  The
off-diagonal entries vanish on the intersection of two ellipses, which
fixes ``k + gamma`` up to a discrete choice; the diagonal entries then fix
``phi2`` and ``gamma``.  Everything is evaluated on the gamma-free matrix
``s0`` with gamma kept explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cxmat import TWO_PI, phase_of
from .errors import (
    AssumptionViolated,
    ComplexInput,
    DegenerateEllipse,
    Inconsistent,
    SingularJacobian,
)
from .scatter import ScatterParams, apply_gamma, build_s0
from .spectral import FluxPair, flux_block, h_field_batch, reduced_s1, reduced_s2

MERGE_TOL = 1e-9
FD_STEP = 1e-5


@dataclass(frozen=True)
class SmallCoeffs:
    a: complex
    b: complex
    c: complex
    d: complex
    abar: complex
    bbar: complex
    cbar: complex
    dbar: complex


@dataclass(frozen=True)
class Triangle:
    """Ellipse-intersection data of one reflectionless condition."""

    A: complex
    B: complex
    C: float
    D: float
    R: float
    g: float
    delta: float
    psi: float
    psi_tilde: float
    solvable: bool

    @property
    def selector(self) -> float:
        """Sign that orients ``psi`` in the dual elimination."""
        return float(np.sign(self.C * self.R))


@dataclass(frozen=True)
class TriangleData:
    """Unbarred fields directly, barred ones under ``bar``."""

    A: complex
    B: complex
    C: float
    D: float
    R: float
    g: float
    delta: float
    psi: float
    psi_tilde: float
    solvable: bool
    bar: Triangle

    @property
    def main(self) -> Triangle:
        return Triangle(self.A, self.B, self.C, self.D, self.R, self.g, self.delta, self.psi, self.psi_tilde, self.solvable)


@dataclass(frozen=True)
class CrossingSolution:
    gamma: float
    branch: int
    k: float
    flux_a: FluxPair
    flux_b: FluxPair
    sign: int = 0
    residual: float = 0.0
    merged: bool = False

    @property
    def k_b(self) -> float:
        return self.k + np.pi


def small_coeffs(s0) -> SmallCoeffs:
    """Coefficients of the two reflectionless conditions.

    With ``z = e^{i(k+gamma)}`` the first is ``a z + b/z = c e^{i phi1} +
    d e^{-i phi1}``; with ``w = e^{i(k-gamma)}`` the second is
    ``abar w + bbar/w = cbar e^{i phi2} + dbar e^{-i phi2}``.
    """
    s0 = np.asarray(s0, dtype=complex)

    def s(i, j):
        return s0[i - 1, j - 1]

    a = (
        s(3, 1) * (s(1, 2) * s(2, 3) - s(2, 2) * s(1, 3))
        + s(3, 2) * (s(2, 1) * s(1, 3) - s(1, 1) * s(2, 3))
        + s(3, 3) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1))
    )
    b = -s(3, 3)
    c = s(3, 1) * s(2, 3) - s(3, 3) * s(2, 1)
    d = s(3, 2) * s(1, 3) - s(3, 3) * s(1, 2)
    abar = (
        s(1, 3) * (s(3, 4) * s(4, 1) - s(4, 4) * s(3, 1))
        + s(1, 4) * (s(4, 3) * s(3, 1) - s(3, 3) * s(4, 1))
        + s(1, 1) * (s(3, 3) * s(4, 4) - s(3, 4) * s(4, 3))
    )
    bbar = -s(1, 1)
    cbar = s(1, 3) * s(4, 1) - s(1, 1) * s(4, 3)
    dbar = s(1, 4) * s(3, 1) - s(1, 1) * s(3, 4)
    return SmallCoeffs(*(complex(x) for x in (a, b, c, d, abar, bbar, cbar, dbar)))


def _triangle(a, b, c, d) -> Triangle:
    A = a * np.conj(c) - np.conj(b) * d
    B = b * np.conj(c) - np.conj(a) * d
    C = abs(c) ** 2 - abs(d) ** 2
    D = abs(a) ** 2 - abs(b) ** 2
    AB = abs(A) * abs(B)
    if AB < 1e-14:
        raise DegenerateEllipse(f"|A||B| = {AB:.2e}")
    R = C * C - abs(A) ** 2 - abs(B) ** 2
    RD = D * D - abs(A) ** 2 - abs(B) ** 2
    z = R / (A * np.conj(B))
    g = abs(z)
    delta = phase_of(z)
    solvable = 2 * AB >= abs(R)
    # arccos(|R| / 2|A||B|) written as an atan2 for accuracy near g = 2
    psi = float(np.arctan2(np.sqrt(max(4 * AB * AB - R * R, 0.0)), abs(R)))
    psi_tilde = float(np.arctan2(np.sqrt(max(4 * AB * AB - RD * RD, 0.0)), abs(RD)))
    return Triangle(complex(A), complex(B), float(C), float(D), float(R), float(g), float(delta), psi, psi_tilde, bool(solvable))


def triangle_data(c: SmallCoeffs) -> TriangleData:
    t = _triangle(c.a, c.b, c.c, c.d)
    tb = _triangle(c.abar, c.bbar, c.cbar, c.dbar)
    return TriangleData(t.A, t.B, t.C, t.D, t.R, t.g, t.delta, t.psi, t.psi_tilde, t.solvable, tb)


def triangle_inequalities(A, B, C) -> bool:
    """Strict triangle inequalities for side lengths ``|A|, |B|, |C|``."""
    x, y, z = abs(A), abs(B), abs(C)
    return z < x + y and y < z + x and x < y + z


def dual_identities(t: TriangleData) -> dict:
    """Both sides of the relations linking the C-triangle and the D-triangle."""
    return {
        "diff_sq": abs(t.A) ** 2 - abs(t.B) ** 2,
        "abs_cd": abs(t.C) * abs(t.D),
        "signed_cd": t.C * t.D,
        "c_sin_psi_tilde": abs(t.C) * np.sin(t.psi_tilde),
        "d_sin_psi": abs(t.D) * np.sin(t.psi),
    }


def _diag_coeffs(s0):
    s0 = np.asarray(s0, dtype=complex)

    def s(i, j):
        return s0[i - 1, j - 1]

    q1 = (
        s(4, 1) * (s(1, 2) * s(2, 3) - s(2, 2) * s(1, 3))
        + s(4, 2) * (s(2, 1) * s(1, 3) - s(1, 1) * s(2, 3))
        + s(4, 3) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1))
    )
    p1 = -s(4, 3)
    r1 = s(4, 1) * s(2, 3) - s(4, 3) * s(2, 1)
    s1 = s(4, 2) * s(1, 3) - s(4, 3) * s(1, 2)
    q2 = (
        s(3, 1) * (s(1, 2) * s(2, 4) - s(2, 2) * s(1, 4))
        + s(3, 2) * (s(2, 1) * s(1, 4) - s(1, 1) * s(2, 4))
        + s(3, 4) * (s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1))
    )
    p2 = -s(3, 4)
    r2 = s(3, 1) * s(2, 4) - s(3, 4) * s(2, 1)
    s2 = s(3, 2) * s(1, 4) - s(3, 4) * s(1, 2)
    u = s(1, 1) * s(2, 2) - s(1, 2) * s(2, 1)
    return q1, p1, r1, s1, q2, p2, r2, s2, u, s(2, 1), s(1, 2)


@dataclass(frozen=True)
class _Reduced:
    Q1: complex
    P1: complex
    Q2: complex
    P2: complex
    U: complex
    Y: complex


def _reduced_diag(s0, t: TriangleData) -> _Reduced:
    q1, p1, r1, s1, q2, p2, r2, s2, u, v, w = _diag_coeffs(s0)
    A, B, C = t.A, t.B, t.C
    Bc, Ac = np.conj(B), np.conj(A)
    return _Reduced(
        Q1=q1 * C - r1 * A - s1 * Bc,
        P1=p1 * C - r1 * B - s1 * Ac,
        Q2=q2 * C - r2 * A - s2 * Bc,
        P2=p2 * C - r2 * B - s2 * Ac,
        U=u * C + v * A + w * Bc,
        Y=-C + v * B + w * Ac,
    )


def _mod_pi(x):
    return np.remainder(np.asarray(x, float), np.pi)


def _dist_mod(x, y, period=np.pi):
    d = np.remainder(np.asarray(x) - np.asarray(y) + period / 2, period) - period / 2
    return np.abs(d)


def gamma_values(s0) -> list[tuple[int, float]]:
    """The four ``(branch, gamma)`` crossing values from the diagonal equations.

    Branch ``2*j + m``: ``j = 0`` for the ``+psi`` root, ``1`` for ``-psi``;
    ``m = 1`` adds ``pi/2``.  Empty if the triangle is not solvable.
    """
    t = triangle_data(small_coeffs(s0))
    if not (t.solvable and t.bar.solvable):
        return []
    red = _reduced_diag(s0, t)
    out = []
    for j, sg in enumerate((1, -1)):
        theta = t.delta + sg * t.psi
        zeta = np.exp(1j * theta)
        num = red.Q1 * red.Q2 * zeta + red.Q1 * red.P2 + red.P1 * red.Q2 + red.P1 * red.P2 / zeta
        den = red.U**2 * zeta + 2 * red.U * red.Y + red.Y**2 / zeta
        chi = phase_of(num * np.conj(den))
        g0 = (chi + theta) / 4
        for m in (0, 1):
            out.append((2 * j + m, float(_mod_pi(g0 + m * np.pi / 2))))
    return out


def gamma_values_dual(s0) -> list[float]:
    """Crossing values from eliminating ``k`` between the two reflectionless conditions.

    The psi of each triangle enters with the sign of ``C R`` (``R = C^2 -
    |A|^2 - |B|^2``), i.e. with the orientation of ``g e^{i delta}``.
    """
    t = triangle_data(small_coeffs(s0))
    if not (t.solvable and t.bar.solvable):
        return []
    tb = t.bar
    x = t.psi * t.main.selector - tb.psi * tb.selector
    base = t.delta - tb.delta
    return sorted(float(_mod_pi((base + sg * x) / 4 + m * np.pi / 2)) for sg in (1, -1) for m in (0, 1))


def gamma_values_necessary(s0) -> list[float]:
    """All eight values allowed by the two reflectionless conditions alone."""
    t = triangle_data(small_coeffs(s0))
    if not (t.solvable and t.bar.solvable):
        return []
    tb = t.bar
    vals = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            for m in (0, 1):
                vals.append(float(_mod_pi((t.delta - tb.delta + s1 * t.psi - s2 * tb.psi) / 4 + m * np.pi / 2)))
    return sorted(vals)


def crossing_residual(s0, gamma, k, flux: FluxPair) -> float:
    """``max |L2 S2 - e^{-ik} I|`` and the loop-1 analogue at a candidate crossing."""
    s = apply_gamma(s0, gamma)
    e = np.exp(-1j * k) * np.eye(2)
    m2 = flux_block(flux.phi2) @ reduced_s2(s, k, flux.phi1, strict=False)
    m1 = flux_block(flux.phi1) @ reduced_s1(s, k, flux.phi2, strict=False)
    return float(max(np.abs(m2 - e).max(), np.abs(m1 - e).max()))


def _solve_flux(s0, t: TriangleData, red: _Reduced, gamma: float, kappa: float):
    """Crossing wavenumber and flux pair for ``k + gamma = kappa``."""
    k = kappa - gamma
    z = np.exp(1j * kappa)
    e1 = (t.A * z + t.B / z) / t.C
    phi1 = phase_of(e1)
    # phi2 from the first diagonal condition; fall back to the reduced matrix
    den = red.U * np.exp(2j * gamma) + red.Y * np.exp(-2j * k)
    num = red.Q1 * z + red.P1 / z
    if abs(den) > 1e-10 and abs(num) > 1e-10:
        phi2 = -phase_of(num / den)
    else:
        s2 = reduced_s2(apply_gamma(s0, gamma), k, phi1)
        phi2 = phase_of(np.exp(-1j * k) / s2[1, 0])
    return float(k), FluxPair(phi1, phi2)


def gamma_crossings(s0, with_sign: bool = True, check: bool = True) -> list[CrossingSolution]:
    """All crossing values of gamma in [0, pi) with their crossing points.

    Raises Inconsistent when the diagonal-equation route and the dual
    elimination route disagree, or when a returned point is not a crossing.
    """
    s0 = np.asarray(s0, dtype=complex)
    vals = gamma_values(s0)
    if not vals:
        return []
    t = triangle_data(small_coeffs(s0))
    if abs(t.C) < 1e-14:
        raise DegenerateEllipse("C vanishes; the flux cannot be recovered")
    red = _reduced_diag(s0, t)
    if check and t.main.selector != 0 and t.bar.selector != 0:
        dual = gamma_values_dual(s0)
        for _, g in vals:
            if _dist_mod(g, np.array(dual)).min() > 1e-9:
                raise Inconsistent(f"gamma {g:.12f} missing from the dual set {dual}")
    sols: list[CrossingSolution] = []
    for branch, g in vals:
        sg = 1 if branch < 2 else -1
        kappa = (t.delta + sg * t.psi) / 2
        k, fa = _solve_flux(s0, t, red, g, kappa)
        res = crossing_residual(s0, g, k, fa)
        if check and not res < 1e-7:
            raise Inconsistent(f"branch {branch}: residual {res:.2e} at gamma {g:.6f}")
        merged = any(_dist_mod(g, o.gamma) < MERGE_TOL for o in sols)
        if merged:
            sols = [o if _dist_mod(g, o.gamma) >= MERGE_TOL else _replace_merged(o) for o in sols]
            continue
        sol = CrossingSolution(gamma=g, branch=branch, k=k, flux_a=fa, flux_b=fa.shifted(np.pi, np.pi), residual=res)
        if with_sign:
            try:
                sol = _with_sign(sol, transition_sign(sol, s0))
            except (AssumptionViolated, SingularJacobian):
                pass
        sols.append(sol)
    return sorted(sols, key=lambda o: (o.gamma, o.branch))


def _replace_merged(o: CrossingSolution) -> CrossingSolution:
    return CrossingSolution(o.gamma, o.branch, o.k, o.flux_a, o.flux_b, o.sign, o.residual, True)


def _with_sign(o: CrossingSolution, sign: int) -> CrossingSolution:
    return CrossingSolution(o.gamma, o.branch, o.k, o.flux_a, o.flux_b, sign, o.residual, o.merged)


def field_jacobian(s0, gamma, k, flux: FluxPair, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``(h0, h1, h2, h3)``.

    Columns are derivatives by ``(phi1, phi2, gamma, k)``.
    """
    x0 = np.array([flux.phi1, flux.phi2, gamma, k], dtype=float)
    pts = np.repeat(x0[None, :], 8, axis=0)
    for i in range(4):
        pts[2 * i, i] += step
        pts[2 * i + 1, i] -= step
    s = apply_gamma(s0, pts[:, 2])
    h0, h = h_field_batch(s, pts[:, 3], pts[:, 0], pts[:, 1])
    # h0 is an angle; difference it on the circle
    f = np.concatenate([h0[:, None], h], axis=1)
    jac = np.empty((4, 4))
    for i in range(4):
        diff = f[2 * i] - f[2 * i + 1]
        diff[0] = (diff[0] + np.pi) % TWO_PI - np.pi
        jac[:, i] = diff / (2 * step)
    return jac


def transition_sign(sol: CrossingSolution, s0, step: float = FD_STEP) -> int:
    """Chern jump of the upper band when gamma increases through ``sol``.

    The jump is minus the orientation of ``h`` in the coordinates
    ``(phi1, phi2, k)`` times the sign of the energy derivative of ``h0``
    along the crossing manifold.
    """
    jac = field_jacobian(s0, sol.gamma, sol.k, sol.flux_a, step)
    dh0 = jac[0]
    dh = jac[1:]
    dh_dk = dh[:, 3]
    if not abs(dh0[3]) > np.linalg.norm(dh_dk):
        raise AssumptionViolated(f"|dh0/dk| = {abs(dh0[3]):.3e} <= |dh/dk| = {np.linalg.norm(dh_dk):.3e}")
    orient = np.linalg.det(dh[:, [0, 1, 3]])
    if abs(orient) < 1e-10:
        raise SingularJacobian(f"det = {orient:.2e}")
    dh_dp = dh[:, :3]
    if abs(np.linalg.det(dh_dp)) < 1e-10:
        raise SingularJacobian("field Jacobian in (phi1, phi2, gamma) is singular")
    phik = np.linalg.solve(dh_dp, dh_dk)
    energy = dh0[3] - phik @ dh0[:3]
    return int(-np.sign(orient) * np.sign(energy))


@dataclass(frozen=True)
class RealSBoundaries:
    gammas: list
    gammas_literal: list
    E: tuple
    Ebar: tuple
    tan_candidates: list
    residuals: dict = field(default_factory=dict)


def _ratio_sqrt(a, b, c, d):
    """``+-sqrt(-((a+b)^2/(c+d)^2 - 1) / ((a-b)^2/(c-d)^2 - 1))``; None if not real."""
    with np.errstate(divide="ignore", invalid="ignore"):
        x = ((a + b) / (c + d)) ** 2 - 1
        y = ((a - b) / (c - d)) ** 2 - 1
        val = -x / y
    if not np.isfinite(val) or val < 0:
        if np.isinf(val) or (y == 0 and x != 0):
            return (np.inf, -np.inf)
        return None
    r = float(np.sqrt(val))
    return (r, -r)


def boundary_residuals(p: ScatterParams) -> dict:
    """Residuals of the gamma = 0 boundary relations in the alpha-beta plane.

    Each relation is written in product form, e.g. ``cos u sin(tp/2) -
    s cos(ep/2) cos v`` for ``cos u / cos v = s cos(ep/2) / sin(tp/2)``,
    with ``u = (alpha-beta)/2``, ``v = (alpha+beta)/2``.
    """
    tp = p.theta1 + p.eta1 + p.theta2 + p.eta2
    ep = -p.theta1 - p.eta1 + p.theta2 + p.eta2
    tm = p.theta1 - p.eta1 + p.theta2 - p.eta2
    em = -p.theta1 + p.eta1 + p.theta2 - p.eta2
    u = (p.alpha - p.beta) / 2
    v = (p.alpha + p.beta) / 2
    out = {}
    for s, tag in ((1, "+"), (-1, "-")):
        out[f"cos_ep{tag}"] = np.cos(u) * np.sin(tp / 2) - s * np.cos(ep / 2) * np.cos(v)
        out[f"sin_ep{tag}"] = np.cos(u) * np.cos(tp / 2) - s * np.sin(ep / 2) * np.cos(v)
        out[f"cos_em{tag}"] = np.sin(u) * np.sin(tm / 2) - s * np.cos(em / 2) * np.sin(v)
        out[f"sin_em{tag}"] = np.sin(u) * np.cos(tm / 2) - s * np.sin(em / 2) * np.sin(v)
    return out


def real_s_boundaries(p: ScatterParams) -> RealSBoundaries:
    """Crossing values and boundary relations for a real gamma-free matrix."""
    s0 = build_s0(p)
    if np.abs(s0.imag).max() > 1e-12:
        raise ComplexInput(f"imaginary part {np.abs(s0.imag).max():.2e}")
    s0 = s0.real.astype(complex)
    c = small_coeffs(s0)
    t = triangle_data(c)
    gammas = []
    literal = []
    if t.solvable and t.bar.solvable:
        tb = t.bar
        x = t.psi * t.main.selector - tb.psi * tb.selector
        base = t.delta - tb.delta
        gammas = sorted(float(_mod_pi((base + sg * x) / 4 + m * np.pi / 2)) for sg in (1, -1) for m in (0, 1))
        literal = sorted(float(_mod_pi(sg * (t.psi + tb.psi) / 2)) for sg in (1, -1))
    E = _ratio_sqrt(c.a.real, c.b.real, c.c.real, c.d.real)
    Eb = _ratio_sqrt(c.abar.real, c.bbar.real, c.cbar.real, c.dbar.real)
    cands = []
    if E is not None and Eb is not None:
        for e in E:
            for eb in Eb:
                # tan(k+gamma) = E and tan(k-gamma) = Ebar give 2 gamma = atan E - atan Ebar
                cands.append(float(np.remainder((np.arctan(e) - np.arctan(eb)) / 2, np.pi / 2)))
    return RealSBoundaries(
        gammas=gammas,
        gammas_literal=literal,
        E=E if E is not None else (),
        Ebar=Eb if Eb is not None else (),
        tan_candidates=sorted(set(cands)),
        residuals=boundary_residuals(p),
    )
