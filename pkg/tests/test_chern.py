import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import scatter_params, seeds
from qgchern import chern
from qgchern.errors import GapClosure
from qgchern.scatter import apply_gamma, build_s0, random_params


def _full(p):
    return apply_gamma(build_s0(p), p.gamma)


def test_grid_too_small():
    with pytest.raises(ValueError):
        chern.chern_fhs(np.eye(4, dtype=complex), n=4)


def test_identity_has_gap_closure():
    with pytest.raises(GapClosure):
        chern.chern_fhs(np.eye(4, dtype=complex), n=8)


def test_grid_doubling_escalates_past_aliased_grid():
    # n = 16 hides a whole turn inside one plaquette here; n = 32 and 64 agree
    from conftest import fig_params

    s = _full(fig_params(nu1=0.6, beta=0.3, gamma=0.725, alpha=1e-3))
    assert chern.chern_fhs(s, n=16, check_doubling=False).c != (0, 0, 0, 0)
    cv = chern.chern_fhs(s, n=16)
    assert cv.converged and cv.c == (0, 0, 0, 0) and cv.grid_n == 32
    assert chern.chern_degree(s).c == cv.c
    assert not chern.chern_fhs(s, n=16, max_doublings=0).converged


def test_decoupled_loops_reported_as_gap_closure():
    # alpha = beta = 0 decouples the loops; bands of the two loops cross
    from conftest import fig_params

    with pytest.raises(GapClosure):
        chern.chern_fhs(_full(fig_params(nu1=0.6, gamma=0.5)), n=16)


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_chern_vector_classification(seed):
    p = random_params(np.random.default_rng(seed), gamma=True)
    try:
        cv = chern.chern_fhs(_full(p), n=24)
    except GapClosure:
        return
    if not cv.converged:
        return
    assert sum(cv.c) == 0
    assert sum(abs(x) for x in cv.c) <= 4
    assert cv.is_trivial or cv.is_alternating


@given(seeds, st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
@settings(max_examples=15, deadline=None)
def test_flux_translation_gauge_leaves_chern_unchanged(seed, a, b):
    # D S D^dagger with D = diag(e^{ia}, e^{-ia}, e^{ib}, e^{-ib}) translates the flux torus
    s = _full(random_params(np.random.default_rng(seed), gamma=True))
    d = np.exp(1j * np.array([a, -a, b, -b]))
    moved = d[:, None] * s * np.conj(d)[None, :]
    try:
        c1 = chern.chern_fhs(s, n=24)
        c2 = chern.chern_fhs(moved, n=24)
    except GapClosure:
        return
    if c1.converged and c2.converged:
        assert c1.c == c2.c


def test_alternating_vector_property():
    assert chern.ChernVector(c=(1, -1, 1, -1), grid_n=8, converged=True).is_alternating
    assert not chern.ChernVector(c=(1, 1, -1, -1), grid_n=8, converged=True).is_alternating
    assert chern.ChernVector(c=(0, 0, 0, 0), grid_n=8, converged=True).is_trivial


def test_bloch_vector_unit_length():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    f = chern.bloch_vector(psi)
    assert np.allclose(np.linalg.norm(f, axis=-1), 1)
    assert np.allclose(chern.bloch_vector(np.array([1, 0])), [0, 0, 1])


def test_degree_route_agrees_on_draws():
    rng = np.random.default_rng(77)
    done = 0
    while done < 8:
        s = _full(random_params(rng, gamma=True))
        try:
            deg = chern.chern_degree(s)
            fhs = chern.chern_fhs(s, n=40)
        except GapClosure:
            continue
        if not fhs.converged:
            continue
        assert deg.c == fhs.c
        if not deg.is_trivial:
            assert len(deg.preimages) == 8
        done += 1


def test_pole_preimages_are_eigenvectors_of_the_loop_field():
    from qgchern.spectral import flux_block, reduced_s2

    rng = np.random.default_rng(5)
    seen = 0
    for _ in range(20):
        s = _full(random_params(rng, gamma=True))
        for flux, k, pole in chern.pole_preimages(s):
            m = np.exp(1j * k) * (flux_block(flux.phi2) @ reduced_s2(s, k, flux.phi1))
            assert abs(m[0, 1]) < 1e-9 and abs(m[1, 0]) < 1e-9
            slot = 0 if pole == "north" else 1
            assert abs(m[slot, slot] - 1) < 1e-9
            seen += 1
    assert seen > 0
