import numpy as np
import pytest
from hypothesis import given, settings

from conftest import fig_params, s0_draws, seeds
from qgchern import degeneracy as dg
from qgchern.chern import chern_fhs
from qgchern.errors import ComplexInput, GapClosure
from qgchern.scatter import apply_gamma, build_s0, random_params
from qgchern.spectral import band_gaps, bands_batch


def _mod_dist(x, y, period=np.pi):
    return np.abs(np.remainder(np.asarray(x) - y + period / 2, period) - period / 2)


def _solvable_draws(n, seed, real=False):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        s0 = build_s0(random_params(rng, real=real))
        if dg.gamma_values(s0):
            out.append(s0)
    return out


def test_small_coeffs_reflectionless_condition():
    # a z + b/z = c e^{i phi1} + d e^{-i phi1} at every pole preimage of loop 1
    s0 = _solvable_draws(1, 3)[0]
    for sol in dg.gamma_crossings(s0, with_sign=False):
        c = dg.small_coeffs(s0)
        z = np.exp(1j * (sol.k + sol.gamma))
        e = np.exp(1j * sol.flux_a.phi1)
        assert abs(c.a * z + c.b / z - c.c * e - c.d / e) < 1e-9


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_signed_dual_identity(seed):
    s0 = build_s0(random_params(np.random.default_rng(seed)))
    for tri in (dg.triangle_data(dg.small_coeffs(s0)), dg.triangle_data(dg.small_coeffs(s0)).bar):
        # |A|^2 - |B|^2 = C D as a signed identity
        assert abs(abs(tri.A) ** 2 - abs(tri.B) ** 2 - tri.C * tri.D) < 1e-12


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_psi_tilde_identity(seed):
    s0 = build_s0(random_params(np.random.default_rng(seed)))
    t = dg.triangle_data(dg.small_coeffs(s0))
    if t.solvable:
        ids = dg.dual_identities(t)
        assert abs(ids["c_sin_psi_tilde"] - ids["d_sin_psi"]) < 1e-9


def test_triangle_inequalities():
    assert dg.triangle_inequalities(3, 4, 5)
    assert not dg.triangle_inequalities(1, 2, 3.5)


def test_gamma_routes_agree():
    for s0 in _solvable_draws(30, 8):
        vals = [g for _, g in dg.gamma_values(s0)]
        dual = dg.gamma_values_dual(s0)
        assert len(vals) == len(dual) == 4
        for g in vals:
            assert _mod_dist(g, np.array(dual)).min() < 1e-9
        nec = np.array(dg.gamma_values_necessary(s0))
        for g in vals:
            assert _mod_dist(g, nec).min() < 1e-9


def test_unsolvable_gives_no_crossings():
    rng = np.random.default_rng(4)
    for _ in range(200):
        s0 = build_s0(random_params(rng))
        t = dg.triangle_data(dg.small_coeffs(s0))
        if not (t.solvable and t.bar.solvable):
            assert dg.gamma_crossings(s0) == []
            return
    pytest.fail("no unsolvable draw found")


def test_crossings_close_the_gap_at_both_flux_points():
    for s0 in _solvable_draws(20, 9):
        for sol in dg.gamma_crossings(s0):
            s = apply_gamma(s0, sol.gamma)
            for flux, k in ((sol.flux_a, sol.k), (sol.flux_b, sol.k_b)):
                kb, _ = bands_batch(s, flux.phi1, flux.phi2)
                gaps = band_gaps(kb)
                assert gaps.min() < 1e-6
                i = int(np.argmin(gaps))
                mid = kb[i] + gaps[i] / 2
                assert _mod_dist(mid, k, 2 * np.pi) < 1e-6


def test_crossing_bands_are_complementary():
    for s0 in _solvable_draws(20, 10):
        for sol in dg.gamma_crossings(s0, with_sign=False):
            s = apply_gamma(s0, sol.gamma)
            pairs = []
            for flux in (sol.flux_a, sol.flux_b):
                kb, _ = bands_batch(s, flux.phi1, flux.phi2)
                i = int(np.argmin(band_gaps(kb)))
                pairs.append({i, (i + 1) % 4})
            assert pairs[0].isdisjoint(pairs[1])


def test_transition_sign_matches_chern_jump():
    p = fig_params(alpha=1.0, beta=0.3, nu1=0.6)
    s0 = build_s0(p)
    sols = dg.gamma_crossings(s0)
    assert len(sols) == 4
    for sol in sols:
        h = 2e-3
        before = chern_fhs(apply_gamma(s0, sol.gamma - h), n=24)
        after = chern_fhs(apply_gamma(s0, sol.gamma + h), n=24)
        s = apply_gamma(s0, sol.gamma)
        kb, _ = bands_batch(s, sol.flux_a.phi1, sol.flux_a.phi2)
        lower = int(np.argmin(band_gaps(kb)))
        upper = (lower + 1) % 4
        assert after.c[upper] - before.c[upper] == sol.sign


def test_fig_point_crossings_and_signs():
    sols = dg.gamma_crossings(build_s0(fig_params(alpha=1.0, beta=0.3, nu1=0.6)))
    assert [round(o.gamma, 4) for o in sols] == [0.3218, 1.0341, 1.8926, 2.6049]
    assert [o.sign for o in sols] == [1, -1, 1, -1]


def test_real_s_rejects_complex():
    with pytest.raises(ComplexInput):
        dg.real_s_boundaries(fig_params(alpha=1, beta=0.5, nu1=0.3))


def test_real_s_corrected_values_match_general_route():
    rng = np.random.default_rng(21)
    hits = 0
    for _ in range(200):
        p = random_params(rng, real=True)
        r = dg.real_s_boundaries(p)
        general = [g for _, g in dg.gamma_values(build_s0(p))]
        assert len(r.gammas) == len(general)
        for g in general:
            assert _mod_dist(g, np.array(r.gammas)).min() < 1e-9
            # tan-route candidates contain every crossing modulo pi/2
            assert _mod_dist(g, np.array(r.tan_candidates), np.pi / 2).min() < 1e-7
        hits += bool(general)
    assert hits > 20


def test_real_s_literal_formula_misses_crossings():
    # the (psi + psibar)/2 form is kept for comparison; it disagrees with the crossings
    misses = 0
    rng = np.random.default_rng(13)
    n = 0
    while n < 30:
        p = random_params(rng, real=True)
        r = dg.real_s_boundaries(p)
        if not r.gammas:
            continue
        n += 1
        lit = np.array(r.gammas_literal)
        misses += any(_mod_dist(g, lit).min() > 1e-6 for g in r.gammas)
    assert misses > 0


def test_real_s_quarter_pi_has_no_crossing():
    for s0 in _solvable_draws(20, 14, real=True):
        for sol in dg.gamma_crossings(s0, with_sign=False):
            assert _mod_dist(sol.gamma, np.pi / 4, np.pi / 2) > 1e-6


def test_gamma_zero_edges_satisfy_boundary_relations():
    # along alpha fixed, the edges of the solvable region at gamma = 0 are crossings
    # emerging at gamma = 0 mod pi/2, and one boundary relation vanishes there
    base = fig_params()

    def solvable(a, b):
        return bool(dg.gamma_values(build_s0(base.with_(alpha=a, beta=b))))

    edges = 0
    for a in (0.2, 1.857, 3.514):
        bs = np.linspace(0.01, 2 * np.pi - 0.01, 120)
        flags = [solvable(a, b) for b in bs]
        for i in range(len(bs) - 1):
            if flags[i] == flags[i + 1]:
                continue
            lo, hi = bs[i], bs[i + 1]
            for _ in range(60):
                mid = (lo + hi) / 2
                if solvable(a, mid) == flags[i]:
                    lo = mid
                else:
                    hi = mid
            b = hi if flags[i + 1] else lo
            p = base.with_(alpha=a, beta=b)
            gam = np.array([g for _, g in dg.gamma_values(build_s0(p))])
            assert _mod_dist(gam, 0.0, np.pi / 2).max() < 1e-5
            res = dg.boundary_residuals(p)
            assert min(abs(v) for v in res.values()) < 1e-12
            edges += 1
    assert edges >= 8
