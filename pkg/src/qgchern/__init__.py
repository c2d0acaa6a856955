"""Band topology of the two-loop quantum graph with a four-port scatterer."""

from .chern import ChernVector, PreimagePoint, chern_degree, chern_fhs, jacobian_sign
from .cxmat import EigenSystem, PauliDecomp, eig_unitary, pauli_exp, pauli_log
from .degeneracy import (
    CrossingSolution,
    SmallCoeffs,
    TriangleData,
    gamma_crossings,
    real_s_boundaries,
    small_coeffs,
    transition_sign,
    triangle_data,
)
from .scatter import ScatterParams, SBlocks, apply_gamma, blocks, build_s, build_s0
from .spectral import BandSet, FluxPair, HField, band_set, h_field, lambda_of, reduced_s1, reduced_s2

__all__ = [
    "BandSet",
    "ChernVector",
    "CrossingSolution",
    "EigenSystem",
    "FluxPair",
    "HField",
    "PauliDecomp",
    "PreimagePoint",
    "SBlocks",
    "ScatterParams",
    "SmallCoeffs",
    "TriangleData",
    "apply_gamma",
    "band_set",
    "blocks",
    "build_s",
    "build_s0",
    "chern_degree",
    "chern_fhs",
    "eig_unitary",
    "gamma_crossings",
    "h_field",
    "jacobian_sign",
    "lambda_of",
    "pauli_exp",
    "pauli_log",
    "real_s_boundaries",
    "reduced_s1",
    "reduced_s2",
    "small_coeffs",
    "transition_sign",
    "triangle_data",
]
