import json
import math

import numpy as np
import pytest

from levygsd.feynman_kac_mc import (
    McConfig,
    block_rng,
    dumps_exact,
    fk_estimate,
    fk_estimate_many,
    sample_endpoints,
    sample_increment,
    simulate_path,
    small_jump_variance,
)
from levygsd.grid_spectral import Field, make_grid, propagate_semigroup
from levygsd.levy_models import make_model, stable_density_constant
from levygsd.potentials import constant, quadratic

CAUCHY = make_model("stable", alpha=1.0)


def _cf_z(x, xi, dt, psi):
    """z-score of the empirical E cos(xi X) against exp(-dt psi)."""
    c = np.cos(xi * x)
    return abs(c.mean() - math.exp(-dt * psi)) / (c.std() / math.sqrt(c.size))


def test_brownian_increment_variance():
    x = sample_increment(make_model("brownian", a=1.0), 0.01, block_rng(1, 0), 200_000)
    assert x.var() == pytest.approx(0.02, rel=0.02)


def test_brownian_half_variance_at_quarter_coefficient():
    x = sample_increment(make_model("brownian", a=0.25), 1.0, block_rng(2, 0), 200_000)
    assert x.var() == pytest.approx(0.5, rel=0.02)


def test_cauchy_increment_quartiles():
    x = sample_increment(CAUCHY, 0.1, block_rng(3, 0), 200_000)
    p = np.mean(np.abs(x) <= 0.1)
    assert abs(p - 0.5) < 4 * math.sqrt(0.25 / x.size)


@pytest.mark.parametrize(
    "name, params",
    [
        ("stable", {"alpha": 1.5}),
        ("relativistic", {"alpha": 1.0, "m": 1.0}),
        ("geometric-stable", {"alpha": 1.5}),
        ("jump-diffusion", {"alpha": 1.0, "a": 0.5}),
    ],
)
def test_exact_samplers_characteristic_function(name, params):
    model = make_model(name, **params)
    x = sample_increment(model, 0.5, block_rng(4, 0), 200_000)
    for xi in (0.5, 1.5):
        assert _cf_z(x, xi, 0.5, model.symbol.radial(xi)) < 4


def test_compound_poisson_characteristic_function():
    model = make_model("tempered", alpha=1.0, c=1.0)
    x = sample_increment(model, 1.0, block_rng(5, 0), 200_000, epsilon=0.1)
    for xi in (0.5, 1.0):
        assert _cf_z(x, xi, 1.0, model.symbol.radial(xi, method="closed")) < 4


def test_small_jump_variance_stable():
    a = 1.5
    c = stable_density_constant(a, 1)
    assert small_jump_variance(make_model("stable", alpha=a), 0.25) == pytest.approx(
        2 * c * 0.25 ** (2 - a) / (2 - a), rel=1e-10
    )


def test_sample_increment_two_dimensions_shape():
    x = sample_increment(make_model("stable", d=2, alpha=1.0), 0.1, block_rng(6, 0), 10)
    assert x.shape == (10, 2)


def test_path_length_and_start():
    cfg = McConfig(dt=0.1)
    path = simulate_path(CAUCHY, [0.5], 0.3, cfg, block_rng(0, 0))
    assert path.shape == (4,) and path[0] == 0.5


def test_path_increments_uncorrelated():
    cfg = McConfig(dt=0.01)
    path = simulate_path(make_model("brownian", a=1.0), [0.0], 200.0, cfg, block_rng(7, 0))
    inc = np.diff(path)
    r = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(r) < 4 / math.sqrt(inc.size)


def test_non_integer_step_count_rejected():
    with pytest.raises(ValueError):
        simulate_path(CAUCHY, [0.0], 0.25, McConfig(dt=0.1), block_rng(0, 0))


# -- Feynman-Kac estimates ----------------------------------------------------------


def test_zero_and_constant_potentials_exact():
    cfg = McConfig(n_paths=5000, dt=0.05, seed=11)
    zero, const = fk_estimate_many(CAUCHY, [constant(0.0), constant(0.7)], [0.0], 1.0, cfg)
    assert zero.mean == 1.0 and zero.stderr == 0.0
    assert const.mean == math.exp(-0.7) and const.stderr == 0.0


def test_cauchy_quadratic_against_spectral_propagation():
    cfg = McConfig(n_paths=40_000, dt=0.005, seed=12)
    est = fk_estimate(CAUCHY, quadratic(), [0.0], 0.5, cfg)
    g = make_grid(1, 32.0, 2048)
    ref = propagate_semigroup(Field(g, np.ones(g.N)), CAUCHY.symbol, quadratic(), 0.5, 200).at(0.0)
    # the left-endpoint time average carries an O(dt) bias on top of the noise
    assert abs(est.mean - ref) < 4 * est.stderr + 5e-3


def test_estimates_independent_of_worker_count():
    base = McConfig(n_paths=10_000, dt=0.1, seed=13)
    a = fk_estimate(CAUCHY, quadratic(), [0.3], 1.0, base)
    b = fk_estimate(CAUCHY, quadratic(), [0.3], 1.0, McConfig(n_paths=10_000, dt=0.1, seed=13, workers=4))
    assert a.to_json() == b.to_json()
    c = fk_estimate(CAUCHY, quadratic(), [0.3], 1.0, McConfig(n_paths=10_000, dt=0.1, seed=14))
    assert c.mean != a.mean


def test_sample_endpoints_reproducible():
    cfg = McConfig(n_paths=9000, dt=0.25, seed=5)
    a = sample_endpoints(CAUCHY, 1.0, cfg, x0=[1.0])
    b = sample_endpoints(CAUCHY, 1.0, McConfig(n_paths=9000, dt=0.25, seed=5, workers=3), x0=[1.0])
    assert a.shape == (9000,) and np.array_equal(a, b)


def test_estimate_argument_checks():
    cfg = McConfig(n_paths=10, dt=0.1)
    with pytest.raises(ValueError):
        fk_estimate(CAUCHY, quadratic(), [0.0, 0.0], 1.0, cfg)
    with pytest.raises(ValueError):
        fk_estimate(CAUCHY, quadratic(d=2), [0.0], 1.0, cfg)
    with pytest.raises(ValueError):
        fk_estimate(CAUCHY, quadratic(), [0.0], 0.0, cfg)


@pytest.mark.parametrize(
    "kw", [{"n_paths": 0}, {"dt": 0.0}, {"epsilon": 1.5}, {"seed": -1}, {"small_jumps": "x"}, {"workers": 0}]
)
def test_mc_config_validation(kw):
    with pytest.raises(ValueError):
        McConfig(**kw)


def test_record_json_round_trip():
    est = fk_estimate(CAUCHY, quadratic(), [0.0], 0.5, McConfig(n_paths=100, dt=0.1, seed=1))
    back = json.loads(est.to_json())
    assert back["mean"] == est.mean and back["stderr"] == est.stderr and back["seed"] == 1
