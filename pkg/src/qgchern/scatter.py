"""Vertex scattering matrix of the four-port scatterer and its gamma family."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .cxmat import assert_unitary
from .errors import ValidationError

PARAM_NAMES = (
    "alpha",
    "beta",
    "gamma",
    "theta1",
    "theta2",
    "eta1",
    "eta2",
    "nu1",
    "nu2",
    "mu1",
    "mu2",
)


@dataclass(frozen=True)
class ScatterParams:
    """Angles (radians) of the scatterer decomposition.

    ``alpha``/``beta`` set the inter-loop mixing, ``theta``/``eta`` the
    in-loop rotations, ``nu``/``mu`` the complex phases and ``gamma`` the
    block phase applied on top of the gamma-free matrix.
    """

    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    eta1: float = 0.0
    eta2: float = 0.0
    nu1: float = 0.0
    nu2: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float, np.floating, np.integer)) or not math.isfinite(v):
                raise ValidationError(f"parameter {f.name} must be a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))

    def with_(self, **changes) -> "ScatterParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def is_real(self) -> bool:
        return self.nu1 == 0 and self.nu2 == 0 and self.mu1 == 0 and self.mu2 == 0


@dataclass(frozen=True)
class SBlocks:
    s11: np.ndarray
    s12: np.ndarray
    s21: np.ndarray
    s22: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.s11, self.s12], [self.s21, self.s22]])


def rotation(t):
    """Real rotation ``[[cos t, sin t], [-sin t, cos t]]``."""
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, s], [-s, c]], dtype=complex)


def phase_diag(x):
    return np.diag([np.exp(1j * x), np.exp(-1j * x)])


def build_s0(p: ScatterParams) -> np.ndarray:
    """Gamma-free scattering matrix ``diag(U1, U2) . M(alpha, beta) . diag(V1, V2)``."""
    u1 = rotation(p.theta1) @ phase_diag(p.nu1)
    u2 = rotation(p.theta2) @ phase_diag(p.nu2)
    v1 = phase_diag(p.mu1) @ rotation(p.eta1)
    v2 = phase_diag(-p.mu2) @ rotation(p.eta2)
    d = np.diag([np.cos(p.alpha), np.cos(p.beta)])
    dbar = np.diag([np.sin(p.alpha), np.sin(p.beta)])
    z = np.zeros((2, 2))
    left = np.block([[u1, z], [z, u2]])
    middle = np.block([[d, dbar], [-dbar, d]])
    right = np.block([[v1, z], [z, v2]])
    return assert_unitary(left @ middle @ right, 1e-12)


def gamma_phases(gamma):
    """Diagonal of the gamma block phase, shape (..., 4)."""
    g = np.asarray(gamma, dtype=float)[..., None]
    return np.exp(1j * g * np.array([1, 1, -1, -1]))


def apply_gamma(s0, gamma):
    """``diag(e^{i gamma} I2, e^{-i gamma} I2) . s0``; broadcasts over gamma."""
    s0 = np.asarray(s0, dtype=complex)
    return gamma_phases(gamma)[..., :, None] * s0


def build_s(p: ScatterParams) -> np.ndarray:
    """Full scattering matrix including the gamma phase."""
    return apply_gamma(build_s0(p), p.gamma)


def blocks(s) -> SBlocks:
    s = np.asarray(s, dtype=complex)
    return SBlocks(s[:2, :2], s[:2, 2:], s[2:, :2], s[2:, 2:])


def random_params(rng: np.random.Generator, real: bool = False, gamma: bool = False) -> ScatterParams:
    """Uniform draw of all angles in [0, 2 pi); phases zeroed when ``real``."""
    vals = {name: float(rng.uniform(0, 2 * np.pi)) for name in PARAM_NAMES}
    if not gamma:
        vals["gamma"] = 0.0
    if real:
        for name in ("nu1", "nu2", "mu1", "mu2"):
            vals[name] = 0.0
    return ScatterParams(**vals)


def _parse_value(raw: str, key: str, lineno: int) -> float:
    text = raw.strip().lower().replace(" ", "")
    try:
        return float(text)
    except ValueError:
        pass
    # allow simple multiples of pi such as "pi/4", "-pi", "2*pi/3"
    sign = 1.0
    if text.startswith("-"):
        sign, text = -1.0, text[1:]
    num, _, den = text.partition("/")
    factor, _, rest = num.partition("*")
    try:
        if factor == "pi" and not rest:
            value = np.pi
        elif rest == "pi":
            value = float(factor) * np.pi
        elif factor.endswith("pi") and not rest:
            value = float(factor[:-2]) * np.pi
        else:
            raise ValueError
        if den:
            value /= float(den)
    except ValueError:
        raise ValidationError(f"line {lineno}: cannot parse value {raw.strip()!r} for {key}") from None
    return sign * value


def parse_config_text(text: str, extra_keys=()) -> tuple[dict, dict]:
    """Parse flat ``key = value`` text.

    Returns ``(params, extras)``: scatterer angles as floats and any keys
    listed in ``extra_keys`` as raw strings.  Unknown or repeated keys are
    rejected.
    """
    params: dict = {}
    extras: dict = {}
    allowed_extra = set(extra_keys)
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in params or key in extras:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        if key in PARAM_NAMES:
            params[key] = _parse_value(value, key, lineno)
        elif key in allowed_extra:
            extras[key] = value
        else:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
    return params, extras


def load_params(path) -> ScatterParams:
    """Read a scatterer parameter file (no scan keys allowed)."""
    params, _ = parse_config_text(Path(path).read_text())
    return ScatterParams(**params)
