import math

import numpy as np
import pytest
from scipy import integrate

from levygsd.errors import IntegrabilityUndetermined
from levygsd.levy_models import (
    CATALOG,
    JumpProfile,
    LevySymbol,
    comparability_check,
    eval_density,
    eval_symbol,
    jump_paring_check,
    jump_paring_ratio,
    make_model,
    minimal_integrability_time,
    paring_diverges,
    stable_density_constant,
)


# -- eval_symbol ------------------------------------------------------------


def test_stable_closed_form_value():
    assert eval_symbol(make_model("stable", alpha=1.0), 2.0) == 2.0


def test_relativistic_vanishes_at_origin():
    assert eval_symbol(make_model("relativistic", alpha=1.0, m=1.0), 0.0) == 0.0


def test_stable_quadrature_matches_closed_form():
    sym = make_model("stable", alpha=1.5).symbol
    assert abs(sym.radial(1.0, method="quadrature") - 1.0) < 1e-6


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("rho", [1e-3, 0.3, 1.0, 7.0, 250.0])
def test_stable_quadrature_over_frequencies(alpha, rho):
    sym = make_model("stable", alpha=alpha).symbol
    exact = rho**alpha
    assert sym.radial(rho, method="quadrature") == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("rho", [0.01, 0.5, 2.0, 40.0])
def test_tempered_quadrature_matches_closed_form(rho):
    sym = make_model("tempered", alpha=1.0, c=1.0).symbol
    assert sym.radial(rho, method="quadrature") == pytest.approx(sym.radial(rho, method="closed"), rel=1e-7)


def test_tempered_closed_form_non_unit_alpha():
    sym = make_model("tempered", alpha=0.6, c=2.0).symbol
    for rho in (0.3, 3.0):
        assert sym.radial(rho, method="quadrature") == pytest.approx(sym.radial(rho, method="closed"), rel=1e-7)


def test_jump_diffusion_quadrature_includes_gaussian_part():
    sym = make_model("jump-diffusion", alpha=1.0, a=1.0).symbol
    assert sym.radial(3.0, method="quadrature") == pytest.approx(9.0 + 3.0, rel=1e-7)


def test_stable_symbol_in_two_dimensions():
    sym = make_model("stable", d=2, alpha=1.0).symbol
    assert sym([3.0, 4.0]) == pytest.approx(5.0)
    assert sym.radial(2.0, method="quadrature") == pytest.approx(2.0, rel=1e-6)


def test_quadrature_symbols_large_frequency_finite():
    for name in ("layered", "stretched-exp", "gaussian-tail-counterexample"):
        psi = make_model(name).symbol.radial(np.array([1e-3, 1.0, 1e4]))
        assert np.all(np.isfinite(psi)) and np.all(np.diff(psi) > 0)


def test_brownian_symbol():
    assert eval_symbol(make_model("brownian", a=1.0), 3.0) == 9.0


def test_unknown_model_and_parameter():
    with pytest.raises(KeyError, match="nope"):
        make_model("nope")
    with pytest.raises(ValueError):
        make_model("stable", beta=2.0)


def test_catalog_models_build():
    for name in CATALOG:
        m = make_model(name)
        assert m.name == name and m.d == 1


# -- eval_density -----------------------------------------------------------


def test_density_polynomial_tail():
    prof = JumpProfile(1.0, "polynomial", gamma=1.0)
    assert eval_density(prof, 2.0) == pytest.approx(0.25)
    assert eval_density(prof, 0.5) == pytest.approx(4.0)


def test_density_exponential_tail():
    prof = JumpProfile(1.0, "exponential", gamma=1.0 + 1e-9, c=1.0)
    assert eval_density(prof, 2.0) == pytest.approx(math.e * math.exp(-2.0) / 2.0, rel=1e-8)


def test_density_rejects_origin():
    with pytest.raises(ValueError):
        eval_density(JumpProfile(1.0, "polynomial", gamma=1.0), 0.0)


def test_exponential_profile_needs_gamma_bound():
    with pytest.raises(ValueError):
        JumpProfile(1.0, "exponential", gamma=1.0, c=1.0)


def test_stable_density_constant_cauchy():
    assert stable_density_constant(1.0, 1) == pytest.approx(1 / math.pi)


def test_profile_integrability_conditions():
    # (1 ^ r^2) g integrable, total mass infinite
    prof = JumpProfile(1.2, "polynomial", gamma=0.8)
    small = integrate.quad(lambda r: r * r * prof(r), 0, 1)[0]
    large = integrate.quad(lambda r: prof(r), 1, np.inf)[0]
    assert np.isfinite(small) and np.isfinite(large)
    masses = [integrate.quad(prof, eps, 1.0)[0] for eps in (1e-2, 1e-4, 1e-6)]
    assert masses[0] < masses[1] < masses[2] and masses[2] > 1e5


# -- jump paring --------------------------------------------------------------


def _paring_oracle(prof, x, n=400001):
    """Independent trapezoid oracle in the variable y on three panels."""
    total = 0.0
    for lo, hi, tail in ((-1.0, None, -1), (x + 1.0, None, 1), (1.0, x - 1.0, 0)):
        if tail:
            # map the half line onto (0, 1] with y = edge + tail * (1/s - 1)
            s = np.linspace(1e-6, 1.0, n)
            y = lo + tail * (1.0 / s - 1.0)
            jac = 1.0 / s**2
        else:
            y = np.linspace(lo, hi, n)
            jac = np.ones_like(y)
        f = prof(np.abs(x - y)) * prof(np.abs(y)) * jac
        total += float(np.trapezoid(f, s if tail else y))
    return total / prof(x)


def test_paring_ratio_matches_trapezoid_oracle():
    prof = JumpProfile(1.0, "polynomial", gamma=1.0)
    got = jump_paring_ratio(prof, [5.0])[0][1]
    assert got == pytest.approx(_paring_oracle(prof, 5.0), rel=1e-4)


def test_polynomial_and_exponential_paring_bounded():
    for prof in (JumpProfile(1.0, "polynomial", gamma=1.0), JumpProfile(1.0, "exponential", gamma=1.5, c=1.0)):
        ok, ratios = jump_paring_check(prof)
        q = [r for _, r in ratios]
        assert ok and max(q) < 20.0


def test_gaussian_tail_paring_blows_up():
    prof = JumpProfile(1.0, "gaussian_tail")
    ratios = jump_paring_ratio(prof, [2, 3, 4, 5, 6])
    diverged, at = paring_diverges(ratios)
    assert diverged and at <= 6
    assert ratios[-1][1] > 1e3
    assert ratios[-1][1] >= math.exp(36 / 2 - 0.5)
    assert not jump_paring_check(prof)[0]


def test_paring_radius_precondition():
    with pytest.raises(ValueError):
        jump_paring_ratio(JumpProfile(1.0, "polynomial", gamma=1.0), [1.5])


# -- comparability -------------------------------------------------------------


def test_comparability_polynomial_band():
    ok, (lo, hi) = comparability_check(JumpProfile(1.0, "polynomial", gamma=1.0))
    assert ok and 1.0 <= lo and hi <= 4.0


def test_comparability_gaussian_tail_fails():
    ok, _ = comparability_check(JumpProfile(1.0, "gaussian_tail"))
    assert not ok


def test_comparability_stretched_against_direct_evaluation():
    prof = JumpProfile(1.0, "stretched_exponential", c=1.0, beta=0.5)
    ok, (lo, hi) = comparability_check(prof)
    r = np.linspace(1.0, 100.0, 2000)
    g = lambda s: math.exp(1 / math.log(3) - math.sqrt(s) / math.log(2 + s))
    direct = np.array([g(x) / g(x + 1) for x in r])
    assert ok and direct.max() < 2.0 and hi <= direct.max() * (1 + 1e-9)


def test_comparability_radius_precondition():
    with pytest.raises(ValueError):
        comparability_check(JumpProfile(1.0, "polynomial", gamma=1.0), [0.5, 2.0])


# -- integrability time ---------------------------------------------------------


def test_integrability_time_stable_and_jump_diffusion():
    assert minimal_integrability_time(make_model("stable", alpha=1.0).symbol) == 0.0
    assert minimal_integrability_time(make_model("jump-diffusion", alpha=1.0, a=1.0).symbol) == 0.0


def test_integrability_time_geometric_stable():
    tol = 1e-3
    tb = minimal_integrability_time(make_model("geometric-stable", alpha=1.0).symbol, tol=tol)
    assert abs(tb - 1.0) <= 5 * tol


def test_integrability_time_rejects_bad_tol():
    with pytest.raises(ValueError):
        minimal_integrability_time(make_model("stable").symbol, tol=0.0)


def test_integrability_error_type():
    assert issubclass(IntegrabilityUndetermined, Exception)


def test_relativistic_profile_mapping():
    m = make_model("relativistic", alpha=1.5, m=2.0)
    assert m.profile.tail == "exponential"
    assert m.profile.c == pytest.approx(2.0 ** (1 / 1.5))
    assert m.profile.gamma == pytest.approx((1 + 1.5 + 1) / 2)


def test_symbol_rejects_unknown_kind():
    with pytest.raises(ValueError):
        LevySymbol("weird")


# -- d >= 2 quadrature through the one-dimensional marginal ----------------------


def test_power_profile_symbol_in_three_dimensions_is_homogeneous():
    sym = JumpProfile(1.5, "polynomial", d=3, gamma=1.5)
    from levygsd.levy_models import model_from_profile

    s = model_from_profile(sym).symbol
    vals = [s.radial(r, method="quadrature") / r**1.5 for r in (1e-2, 0.5, 3.0, 50.0)]
    assert max(vals) / min(vals) - 1 < 1e-9


def test_exponential_profile_symbol_in_two_dimensions_matches_polar_oracle():
    from scipy import special

    from levygsd.levy_models import model_from_profile

    s = model_from_profile(JumpProfile(1.0, "exponential", d=2, gamma=2.0, c=1.0)).symbol
    for rho in (0.5, 3.0):
        f = lambda r: (1 - special.j0(rho * r)) * s.density(r) * 2 * np.pi * r
        ref = sum(integrate.quad(f, a, b, limit=500, epsrel=1e-11)[0] for a, b in ((0, 1), (1, 10), (10, 60)))
        assert s.radial(rho, method="quadrature") == pytest.approx(ref, rel=1e-8)
