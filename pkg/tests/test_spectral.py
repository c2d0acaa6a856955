import numpy as np
import pytest
from hypothesis import given, settings

from conftest import haar_unitary, s0_draws, seeds
from qgchern import spectral
from qgchern.cxmat import TWO_PI
from qgchern.errors import SingularReduction
from qgchern.spectral import FluxPair


def _eig_oracle(s, flux):
    m = spectral.lambda_of(flux) @ s
    return np.sort(np.mod(-np.angle(np.linalg.eigvals(m)), TWO_PI))


def test_flux_pair_reduced():
    f = FluxPair(-0.5, 7.0)
    assert f.phi1 == pytest.approx(TWO_PI - 0.5)
    assert f.phi2 == pytest.approx(7.0 - TWO_PI)
    assert f.shifted(np.pi, np.pi).phi1 == pytest.approx(np.pi - 0.5)


def test_lambda_has_unit_determinant():
    lam = spectral.lambda_batch(np.linspace(0, 6, 7), 1.3)
    assert np.allclose(np.linalg.det(lam), 1)


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_bands_match_numpy_eigenvalues(seed):
    s = haar_unitary(4, seed)
    rng = np.random.default_rng(seed)
    flux = FluxPair(*rng.uniform(0, TWO_PI, 2))
    b = spectral.band_set(s, flux)
    assert np.all(np.diff(b.k) >= 0) and b.k[-1] - b.k[0] < TWO_PI
    assert _same_on_circle(b.k, _eig_oracle(s, flux))
    assert b.k.sum() == pytest.approx(spectral.sum_target(s), abs=1e-9)
    m = spectral.lambda_of(flux) @ s
    for j in range(4):
        v = b.vectors[:, j]
        assert np.abs(m @ v - np.exp(-1j * b.k[j]) * v).max() < 1e-10


def _same_on_circle(k, ref):
    # match each band to its nearest oracle value on the circle
    d = np.abs(np.angle(np.exp(1j * (np.asarray(k)[:, None] - ref[None, :]))))
    return d.min(axis=1).max() < 1e-10 and d.min(axis=0).max() < 1e-10


def test_identity_scatterer_bands():
    b = spectral.band_set(np.eye(4, dtype=complex), FluxPair(0, 0))
    assert np.allclose(b.k, [-np.pi, 0, 0, np.pi])


def test_pi_shift_symmetry():
    for s in s0_draws(5, 11):
        t = np.linspace(0, TWO_PI, 12, endpoint=False)
        p1, p2 = np.meshgrid(t, t, indexing="ij")
        k, _ = spectral.bands_batch(s, p1, p2)
        ks, _ = spectral.bands_batch(s, p1 + np.pi, p2 + np.pi)
        a = np.sort(np.mod(k + np.pi, TWO_PI), axis=-1)
        b = np.sort(np.mod(ks, TWO_PI), axis=-1)
        d = np.angle(np.exp(1j * (a - b)))
        assert np.abs(d).max() < 1e-9


def test_lift_is_continuous_around_a_loop():
    s = s0_draws(1, 3)[0]
    t = np.linspace(0, TWO_PI, 1001)
    k, _ = spectral.bands_batch(s, t, 0.4 + 0.0 * t)
    steps = np.abs(np.diff(k, axis=0)).max()
    assert steps < 0.05
    assert np.allclose(k[0], k[-1], atol=1e-9)


def test_continue_bands_tracks_path():
    s = s0_draws(1, 4)[0]
    path = [FluxPair(t, 2 * t) for t in np.linspace(0, 1, 50)]
    out = spectral.continue_bands(s, path)
    ks = np.array([b.k for b in out])
    assert np.abs(np.diff(ks, axis=0)).max() < 0.2


def test_band_gaps_include_wrap():
    g = spectral.band_gaps(np.array([-3.0, -1.0, 0.5, 2.0]))
    assert np.allclose(g, [2.0, 1.5, 1.5, TWO_PI - 5.0])


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_reduced_matrices_are_unitary(seed):
    rng = np.random.default_rng(seed)
    s = haar_unitary(4, seed)
    k, phi = rng.uniform(-np.pi, np.pi, 2)
    for red in (spectral.reduced_s1(s, k, phi), spectral.reduced_s2(s, k, phi)):
        assert np.abs(red.conj().T @ red - np.eye(2)).max() < 1e-8


def test_reduced_secular_vanishes_at_bands():
    s = haar_unitary(4, 9)
    flux = FluxPair(0.7, 2.1)
    b = spectral.band_set(s, flux)
    for which in (1, 2):
        vals = spectral.reduced_secular(s, b.k, flux.phi1, flux.phi2, which)
        assert np.abs(vals).max() < 1e-10


def test_singular_reduction_raises():
    # block-diagonal S: the closed loop is exactly resonant at k with e^{-ik} in spec(L1 S11)
    s = np.eye(4, dtype=complex)
    with pytest.raises(SingularReduction):
        spectral.reduced_s2(s, 0.0, 0.0)
    red = spectral.reduced_s2(s, 0.0, 0.0, strict=False)
    assert np.all(np.isnan(red))


def test_h_field_reproduces_reduced_matrix():
    from qgchern.cxmat import pauli_exp

    s = haar_unitary(4, 12)
    flux = FluxPair(1.0, 2.0)
    k = 0.3
    hf = spectral.h_field(s, k, flux)
    target = np.exp(1j * k) * spectral.flux_block(flux.phi2) @ spectral.reduced_s2(s, k, flux.phi1)
    assert np.abs(pauli_exp(hf.h0, hf.h) - target).max() < 1e-10
