import math

import numpy as np
import pytest
from scipy import integrate

from levygsd.gsd_diagnostics import (
    _coherent,
    box_verdict,
    default_n_rule,
    equivalence_consistency,
    gs_bound_check,
    gs_integrability,
    gsd_scan,
    intrinsic_norm_2p,
    intrinsic_ratio,
    lemma_consistency_check,
    operator_norm_2p,
    weighted_lp_norm,
)
from levygsd.grid_spectral import Field, ground_state, make_grid
from levygsd.levy_models import make_model
from levygsd.potentials import constant, power_log_loglog, quadratic

BROWNIAN = make_model("brownian", a=1.0)
CAUCHY = make_model("stable", alpha=1.0)


@pytest.fixture(scope="module")
def harmonic():
    return ground_state(BROWNIAN.symbol, quadratic(), make_grid(1, 12.0, 1024))


@pytest.fixture(scope="module")
def cauchy_small():
    return ground_state(CAUCHY.symbol, quadratic(), make_grid(1, 8.0, 256))


# -- intrinsic ratio and weighted norms ------------------------------------------


def test_intrinsic_ratio_at_time_zero(harmonic):
    u = intrinsic_ratio(harmonic, BROWNIAN.symbol, quadratic(), 0.0)
    assert np.allclose(u.values * harmonic.phi0.values, 1.0, rtol=1e-14)


def test_intrinsic_ratio_is_positive(harmonic):
    u = intrinsic_ratio(harmonic, BROWNIAN.symbol, quadratic(), 0.5)
    assert np.all(u.values > 0) and u.meta["excluded"] == []


def test_weighted_norm_of_constant():
    g = make_grid(1, 4.0, 64)
    phi = Field(g, np.exp(-g.nodes**2))
    for p in (3.0, 4.0, math.inf):
        assert weighted_lp_norm(Field(g, np.ones(64)), phi, p) == pytest.approx(1.0, rel=1e-14)


def test_weighted_norm_of_half_indicator():
    g = make_grid(1, 4.0, 64)
    phi = Field(g, np.ones(64))
    f = Field(g, (g.nodes < 0).astype(float))
    assert weighted_lp_norm(f, phi, math.inf) == 1.0
    mask = g.window()
    frac = np.sum(mask & (g.nodes < 0)) / np.sum(mask)
    assert weighted_lp_norm(f, phi, 4.0) == pytest.approx(frac**0.25, rel=1e-14)


def test_weighted_norm_against_quadrature():
    g = make_grid(1, 2.0, 65536)
    phi_fn = lambda x: math.pi**-0.25 * math.exp(-x * x / 2)
    phi = Field(g, np.pi**-0.25 * np.exp(-g.nodes**2 / 2))
    got = weighted_lp_norm(Field(g, 1.0 / phi.values), phi, 3.0)
    num = integrate.quad(lambda x: phi_fn(x) ** -1, -1.5, 1.5, epsrel=1e-13)[0]
    den = integrate.quad(lambda x: phi_fn(x) ** 2, -1.5, 1.5, epsrel=1e-13)[0]
    assert got == pytest.approx((num / den) ** (1 / 3), rel=1e-4)


def test_weighted_norm_arguments():
    g = make_grid(1, 4.0, 64)
    f = Field(g, np.ones(64))
    with pytest.raises(ValueError):
        weighted_lp_norm(f, Field(make_grid(1, 4.0, 128), np.ones(128)), 4.0)
    with pytest.raises(ValueError):
        weighted_lp_norm(f, f, 0.5)
    with pytest.raises(ValueError):
        weighted_lp_norm(f, f, 4.0, window=0.0)


def test_default_n_rule():
    rule = default_n_rule()
    assert rule(8.0) == 512 and rule(12.0) == 1024 and rule(16.0) == 1024


# -- verdicts -------------------------------------------------------------------


def test_box_verdicts():
    assert box_verdict([3.0, 1.0, 1.005]) == "finite"
    assert box_verdict([1.0, 20.0, 400.0]) == "divergent"
    assert box_verdict([1.0, 2.0, 3.0]) == "inconclusive"
    assert box_verdict([1.0]) == "inconclusive"


def test_coherence_in_p():
    ps = [3.0, 4.0, math.inf]
    out, clashes = _coherent({3.0: "inconclusive", 4.0: "divergent", math.inf: "inconclusive"}, ps)
    assert out[math.inf] == "divergent" and out[3.0] == "inconclusive" and not clashes
    out, _ = _coherent({3.0: "inconclusive", 4.0: "inconclusive", math.inf: "finite"}, ps)
    assert out[3.0] == out[4.0] == "finite"
    out, clashes = _coherent({3.0: "divergent", 4.0: "finite", math.inf: "finite"}, ps)
    assert clashes == [(3.0, 4.0), (3.0, math.inf)]
    assert set(out.values()) == {"inconclusive"}


def test_cauchy_scan_finite():
    # the sup norm creeps up like 1/R towards its limit, so boxes double up to R = 64
    rep = gsd_scan(CAUCHY, power_log_loglog(2), [0.25], [3, 4, math.inf], [16, 32, 64])
    for p in (3.0, 4.0, math.inf):
        assert rep.verdict(0.25, p) == "finite"
    assert rep.to_csv().splitlines()[0] == "model,potential,t,p,R_box,N,norm,verdict"
    assert len(rep.entries) == 9


def test_scan_arguments():
    with pytest.raises(ValueError):
        gsd_scan(CAUCHY, quadratic(), [0.5], [4], [12, 8])
    with pytest.raises(ValueError):
        gsd_scan(make_model("stable", d=2), quadratic(d=2), [0.5], [4], [8])


# -- ground-state bounds ----------------------------------------------------------


def test_gs_bound_rejects_diffusion(harmonic):
    with pytest.raises(ValueError):
        gs_bound_check(harmonic, BROWNIAN, quadratic())


def test_gs_bound_window_in_buffer(cauchy_small):
    with pytest.raises(ValueError):
        gs_bound_check(cauchy_small, CAUCHY, quadratic(), window=(6.0, 7.0))


def test_gs_integrability_gaussian(harmonic):
    val, ok = gs_integrability(harmonic, 0.0)
    assert ok and val == pytest.approx(math.pi**-0.25 * math.sqrt(2 * math.pi), rel=1e-5)
    val, ok = gs_integrability(harmonic, 0.5)
    assert ok and val == pytest.approx(math.pi**-0.125 * 2 * math.sqrt(math.pi), rel=1e-5)
    with pytest.raises(ValueError):
        gs_integrability(harmonic, 1.0)


def test_gs_integrability_cauchy_box_stable():
    vals = []
    for R in (16.0, 32.0):
        spec = ground_state(CAUCHY.symbol, quadratic(), make_grid(1, R, int(R * 32)))
        vals.append(gs_integrability(spec, 0.0)[0])
    assert abs(vals[1] - vals[0]) < 2e-3 * vals[1]


# -- operator norms ---------------------------------------------------------------


@pytest.mark.parametrize("n, p", [(4, 4.0), (16, 3.0), (50, 8.0)])
def test_identity_norm(n, p):
    est = operator_norm_2p(np.eye(n), np.ones(n), p)
    assert est.converged and est.value == pytest.approx(n ** (0.5 - 1 / p), rel=1e-10)


def test_operator_norm_p_range():
    for p in (2.0, math.inf):
        with pytest.raises(ValueError):
            operator_norm_2p(np.eye(4), np.ones(4), p)


def test_rank_one_averaging_norm():
    # f -> <f, w> 1 has norm 1 from L^2(w) to L^p(w)
    w = np.linspace(1.0, 2.0, 20)
    w = w / w.sum()
    M = np.ones((20, 1)) * w[None, :]
    assert operator_norm_2p(M, w, 5.0).value == pytest.approx(1.0, rel=1e-8)


def test_intrinsic_norm_stable_under_refinement():
    vals = []
    for n in (256, 512):
        spec = ground_state(BROWNIAN.symbol, quadratic(), make_grid(1, 8.0, n))
        vals.append(intrinsic_norm_2p(spec, BROWNIAN.symbol, quadratic(), 0.5, 4.0).value)
    assert abs(vals[1] - vals[0]) < 1e-2 * vals[1]


def test_lemma_holds_for_cauchy(cauchy_small):
    rep = lemma_consistency_check(cauchy_small, CAUCHY.symbol, quadratic(), 0.25, 3.0)
    assert rep.holds and rep.lhs > 0 and rep.slack >= 1


def test_lemma_rejects_flat_potential():
    spec = ground_state(CAUCHY.symbol, constant(1.0), make_grid(1, 8.0, 64), check_time=0.5)
    with pytest.raises(ValueError):
        lemma_consistency_check(spec, CAUCHY.symbol, constant(1.0), 0.25, 3.0)


def test_equivalence_excludes_diffusion():
    with pytest.raises(ValueError):
        equivalence_consistency(BROWNIAN, quadratic(), [0.5], [4], [8])
