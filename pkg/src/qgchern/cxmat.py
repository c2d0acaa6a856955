"""Small dense complex linear algebra for 2x2 and 4x4 unitaries.

The 4x4 eigensolver roots the characteristic quartic in closed form,
polishes each root with Newton steps and builds eigenvectors from the
spectral projectors.  Everything is vectorised over leading batch axes.
Matrices whose fast-path result fails the residual checks (clustered
eigenvalues, mostly) are recomputed one by one from a complex Schur
factorisation, which is exact for normal matrices and returns an
orthonormal basis for degenerate subspaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NoConvergence, NonUnitary

TWO_PI = 2.0 * np.pi
UNITARY_TOL = 1e-9
DEGENERACY_TOL = 1e-8
_FAST_PATH_TOL = 1e-10
_NEWTON_STEPS = 2

_SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


@dataclass(frozen=True)
class EigenSystem:
    """Eigenphases in (-pi, pi], ascending, with matching orthonormal columns."""

    phases: np.ndarray
    vectors: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(1j * self.phases)


@dataclass(frozen=True)
class PauliDecomp:
    """``m = exp(i (h0 I + h . sigma))`` with ``|h|`` in ``[0, pi/2]``."""

    h0: float
    h: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.h))


def wrap_angle(x):
    """Reduce angles to (-pi, pi]."""
    y = np.remainder(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    y = np.where(y <= -np.pi, y + TWO_PI, y)
    return y if np.ndim(y) else float(y)


def phase_of(z):
    """Argument of ``z`` in (-pi, pi], insensitive to the sign of zero."""
    return wrap_angle(np.angle(z))


def mul(a, b):
    return np.matmul(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def adjoint(a):
    return np.conj(np.swapaxes(np.asarray(a, dtype=complex), -1, -2))


def det(m):
    """Determinant of 2x2 or 4x4 matrices by cofactor expansion."""
    m = np.asarray(m, dtype=complex)
    n = m.shape[-1]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if n == 4:
        total = 0
        for col in range(4):
            keep = [c for c in range(4) if c != col]
            minor = m[..., 1:, :][..., keep]
            total = total + (-1) ** col * m[..., 0, col] * _det3(minor)
        return total
    return np.linalg.det(m)


def _det3(m):
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


def unitarity_defect(m):
    """Largest entry of ``|m m^dagger - I|`` per matrix."""
    m = np.asarray(m, dtype=complex)
    eye = np.eye(m.shape[-1])
    return np.abs(mul(m, adjoint(m)) - eye).max(axis=(-2, -1))


def assert_unitary(m, tol: float = 1e-10):
    """Return ``m`` as a complex array, raising NonUnitary if it is not unitary."""
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise NonUnitary(f"not a square matrix: shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonUnitary("non-finite entries")
    err = float(np.max(unitarity_defect(m)))
    if err > tol:
        raise NonUnitary(f"unitarity defect {err:.3e} exceeds {tol:.1e}")
    return m


def charpoly4(m):
    """Monic characteristic polynomial coefficients of 4x4 matrices.

    Returns ``(..., 5)`` coefficients, highest power first, from the power
    sums ``tr m^j`` through Newton's identities.
    """
    m = np.asarray(m, dtype=complex)
    m2 = m @ m
    m3 = m2 @ m
    p1 = np.trace(m, axis1=-2, axis2=-1)
    p2 = np.trace(m2, axis1=-2, axis2=-1)
    p3 = np.trace(m3, axis1=-2, axis2=-1)
    p4 = np.einsum("...ij,...ji->...", m2, m2)
    e1 = p1
    e2 = (e1 * p1 - p2) / 2
    e3 = (e2 * p1 - e1 * p2 + p3) / 3
    e4 = (e3 * p1 - e2 * p2 + e1 * p3 - p4) / 4
    one = np.ones_like(e1)
    return np.stack([one, -e1, e2, -e3, e4], axis=-1)


def _cbrt(z):
    return np.where(z == 0, 0, np.exp(np.log(np.where(z == 0, 1, z)) / 3))


def _cubic_largest_root(b, c, d):
    """Root of largest modulus of ``x^3 + b x^2 + c x + d`` (Cardano)."""
    p = c - b * b / 3
    q = 2 * b**3 / 27 - b * c / 3 + d
    disc = np.sqrt(q * q / 4 + p**3 / 27)
    w1 = -q / 2 + disc
    w2 = -q / 2 - disc
    w = np.where(np.abs(w1) >= np.abs(w2), w1, w2)
    u = _cbrt(w)
    omega = np.exp(2j * np.pi / 3)
    best = None
    best_abs = None
    for j in range(3):
        uj = u * omega**j
        safe = np.where(uj == 0, 1, uj)
        t = np.where(uj == 0, 0, uj - p / (3 * safe))
        x = t - b / 3
        if best is None:
            best, best_abs = x, np.abs(x)
        else:
            better = np.abs(x) > best_abs
            best = np.where(better, x, best)
            best_abs = np.where(better, np.abs(x), best_abs)
    # one Newton step on the resolvent
    f = ((best + b) * best + c) * best + d
    fp = (3 * best + 2 * b) * best + c
    step = np.where(np.abs(fp) > 1e-300, f / np.where(fp == 0, 1, fp), 0)
    return best - step


def quartic_roots(coeffs, newton_steps: int = _NEWTON_STEPS):
    """Roots of monic quartics ``x^4 + a x^3 + b x^2 + c x + d`` (Ferrari).

    ``coeffs`` has shape ``(..., 5)`` with a leading 1.  Each root gets
    ``newton_steps`` Newton corrections on the original polynomial.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    lead = coeffs[..., 0]
    a, b, c, d = (coeffs[..., i] / lead for i in range(1, 5))
    # depress: x = y - a/4
    p = b - 3 * a * a / 8
    q = c - a * b / 2 + a**3 / 8
    r = d - a * c / 4 + a * a * b / 16 - 3 * a**4 / 256
    # resolvent m: 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0
    m = _cubic_largest_root(p, p * p / 4 - r, -q * q / 8)
    s = np.sqrt(2 * m)
    small = np.abs(s) < 1e-150
    s_safe = np.where(small, 1, s)
    roots = []
    for sign in (1, -1):
        # y^2 - sign*s*y + p/2 + m + sign*q/(2 s) = 0
        lin = -sign * s
        const = p / 2 + m + np.where(small, 0, sign * q / (2 * s_safe))
        disc = np.sqrt(lin * lin - 4 * const)
        roots.append((-lin + disc) / 2)
        roots.append((-lin - disc) / 2)
    # biquadratic fallback when the resolvent root vanishes (q = 0)
    if np.any(small):
        z = np.sqrt(p * p / 4 - r)
        y2a = -p / 2 + z
        y2b = -p / 2 - z
        alt = [np.sqrt(y2a), -np.sqrt(y2a), np.sqrt(y2b), -np.sqrt(y2b)]
        roots = [np.where(small, alt[i], roots[i]) for i in range(4)]
    x = np.stack(roots, axis=-1) - (a / 4)[..., None]
    cf = [a[..., None], b[..., None], c[..., None], d[..., None]]
    for _ in range(newton_steps):
        f = (((x + cf[0]) * x + cf[1]) * x + cf[2]) * x + cf[3]
        fp = ((4 * x + 3 * cf[0]) * x + 2 * cf[1]) * x + cf[2]
        ok = np.abs(fp) > 1e-7 * (1 + np.abs(f))
        x = x - np.where(ok, f / np.where(ok, fp, 1), 0)
    return x


def _projector_vectors(m, lam):
    """Eigenvectors of normal 4x4 matrices from their spectral projectors."""
    eye = np.eye(4)
    b = [m - lam[..., i, None, None] * eye for i in range(4)]
    b01 = b[0] @ b[1]
    b23 = b[2] @ b[3]
    prods = [b[1] @ b23, b[0] @ b23, b01 @ b[3], b01 @ b[2]]
    vecs = np.empty(m.shape, dtype=complex)
    for j in range(4):
        pj = prods[j]
        norms = np.linalg.norm(pj, axis=-2)
        col = np.argmax(norms, axis=-1)
        v = np.take_along_axis(pj, col[..., None, None], axis=-1)[..., 0]
        nv = np.take_along_axis(norms, col[..., None], axis=-1)
        vecs[..., :, j] = v / np.where(nv == 0, 1, nv)
    return vecs


def _schur_eig(m):
    t, z = scipy.linalg.schur(m, output="complex")
    lam = np.diag(t).copy()
    res = np.abs(np.triu(t, 1)).max() if m.shape[-1] > 1 else 0.0
    if not np.isfinite(res) or res > 1e-8:
        raise NoConvergence(f"Schur form not diagonal (off-diagonal {res:.2e})")
    return lam, z


def eig_unitary_batch(m, check: bool = True):
    """Eigen-decomposition of a stack of 4x4 unitaries.

    Returns ``(phases, vectors)`` with phases ascending in (-pi, pi] along
    the last axis and eigenvectors as matching columns.
    """
    m = np.asarray(m, dtype=complex)
    if check:
        assert_unitary(m, UNITARY_TOL)
    shape = m.shape[:-2]
    flat = m.reshape(-1, 4, 4)
    lam = quartic_roots(charpoly4(flat))
    lam = lam / np.abs(lam)
    vec = _projector_vectors(flat, lam)
    resid = np.abs(flat @ vec - vec * lam[:, None, :]).max(axis=(-2, -1))
    orth = np.abs(adjoint(vec) @ vec - np.eye(4)).max(axis=(-2, -1))
    bad = ~((resid < _FAST_PATH_TOL) & (orth < _FAST_PATH_TOL))
    for i in np.flatnonzero(bad):
        lam[i], vec[i] = _schur_eig(flat[i])
    phases = phase_of(lam)
    order = np.argsort(phases, axis=-1, kind="stable")
    phases = np.take_along_axis(phases, order, -1)
    vec = np.take_along_axis(vec, order[:, None, :], -1)
    return phases.reshape(shape + (4,)), vec.reshape(shape + (4, 4))


def eig_unitary(m) -> EigenSystem:
    """Eigenphases and orthonormal eigenvectors of one 4x4 unitary."""
    m = np.asarray(m, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
    phases, vectors = eig_unitary_batch(m)
    return EigenSystem(phases=phases, vectors=vectors)


def pauli_log_batch(m, check: bool = True):
    """Vectorised Pauli logarithm; returns ``(h0, h)`` with ``h`` shaped (..., 3).

    Uses the shortest-arc branch: ``exp(i h0)`` is the square root of the
    determinant for which ``Re tr(m) exp(-i h0) >= 0``, so ``|h|`` lies in
    ``[0, pi/2]`` and ``h0`` in (-pi, pi].
    """
    m = np.asarray(m, dtype=complex)
    if check:
        assert_unitary(m, UNITARY_TOL)
    root = np.sqrt(det(m))
    tr = m[..., 0, 0] + m[..., 1, 1]
    root = np.where((tr * np.conj(root)).real < 0, -root, root)
    w = m * np.conj(root)[..., None, None]
    c = ((w[..., 0, 0] + w[..., 1, 1]) / 2).real
    sx = ((w[..., 0, 1] + w[..., 1, 0]) / 2).imag
    sy = ((w[..., 0, 1] - w[..., 1, 0]) / 2).real
    sz = ((w[..., 0, 0] - w[..., 1, 1]) / 2).imag
    s = np.sqrt(sx * sx + sy * sy + sz * sz)
    r = np.arctan2(s, c)
    scale = np.where(s > 0, r / np.where(s > 0, s, 1), 0.0)
    h = np.stack([sx, sy, sz], axis=-1) * scale[..., None]
    return phase_of(root), h


def pauli_log(m) -> PauliDecomp:
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    h0, h = pauli_log_batch(m)
    return PauliDecomp(h0=float(h0), h=np.asarray(h, dtype=float))


def pauli_exp(h0, h):
    """``exp(i (h0 I + h . sigma))`` for scalar or batched inputs."""
    h = np.asarray(h, dtype=float)
    h0 = np.asarray(h0, dtype=float)
    r = np.linalg.norm(h, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    n = h / safe[..., None]
    ns = np.einsum("...k,kij->...ij", n, _SIGMA)
    eye = np.eye(2)
    rot = np.cos(r)[..., None, None] * eye + 1j * np.sin(r)[..., None, None] * ns
    return np.exp(1j * h0)[..., None, None] * rot
