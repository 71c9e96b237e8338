"""Classifier verdicts against hand-evaluated tables of the analytic side conditions.

Each entry is (d1, d2, d3) -> (gsd for all p, agsd for all p) for
V(x) = (1+|x|)^d1 log(2+|x|)^d2 log log(e^e+|x|)^d3.
"""

import pytest

from levygsd.acceptance import GOLDEN_GRIDS, golden_table
from levygsd.levy_models import make_model
from levygsd.potentials import classify_contractivity, power_log_loglog

T, F = True, False

POLYNOMIAL = {
    (2.0, 0.0, 0.0): (T, T), (0.5, -3.0, 0.0): (T, T), (0.1, 0.0, -2.0): (T, T), (0.0, 2.0, 0.0): (T, T),
    (0.0, 1.5, -4.0): (T, T), (0.0, 1.0, 1.0): (T, T), (0.0, 1.0, 0.5): (T, T), (0.0, 1.0, 0.0): (F, T),
    (0.0, 1.0, -0.5): (F, F), (0.0, 0.5, 3.0): (F, F), (0.0, 0.0, 2.0): (F, F), (0.0, 0.9, 10.0): (F, F),
}
STRETCHED = {
    (2.0, 0.0, 0.0): (T, T), (1.5, -5.0, 0.0): (T, T), (1.0, 1.0, 0.0): (T, T), (1.0, 0.0, 0.0): (T, T),
    (1.0, -0.5, 0.0): (T, T), (1.0, -1.0, 0.0): (F, T), (1.0, -1.5, 0.0): (F, F), (1.0, -3.0, 0.0): (F, F),
    (0.9, 10.0, 0.0): (F, F), (0.5, 0.0, 0.0): (F, F), (0.0, 3.0, 0.0): (F, F), (0.99, 100.0, 0.0): (F, F),
}
EXPONENTIAL = {
    (2.0, 0.0, 0.0): (T, T), (1.5, -5.0, 0.0): (T, T), (1.0, 2.0, 0.0): (T, T), (1.0, 0.5, 0.0): (T, T),
    (1.0, 0.01, 0.0): (T, T), (1.0, 0.0, 0.0): (F, T), (1.0, -0.5, 0.0): (F, F), (1.0, -2.0, 0.0): (F, F),
    (0.9, 10.0, 0.0): (F, F), (0.5, 0.0, 0.0): (F, F), (0.0, 3.0, 0.0): (F, F), (0.99, 100.0, 0.0): (F, F),
}
CASES = [
    (name, params, table)
    for names, table in (
        ([("stable", {}), ("layered", {}), ("jump-diffusion", {})], POLYNOMIAL),
        ([("stretched-exp", {"beta": 1.0})], STRETCHED),
        ([("relativistic", {}), ("tempered", {}), ("relativistic", {"alpha": 1.5, "m": 2.0})], EXPONENTIAL),
    )
    for name, params in names
]


@pytest.mark.parametrize("name, params, table", CASES, ids=[f"{c[0]}-{i}" for i, c in enumerate(CASES)])
def test_golden_table(name, params, table):
    model = make_model(name, **params)
    for dl, expected in table.items():
        v = classify_contractivity(power_log_loglog(*dl), model)
        assert (v.gsd_all_p, v.agsd_all_p) == expected, dl


def test_tables_cover_acceptance_grids():
    for fam, table in (("polynomial", POLYNOMIAL), ("stretched_exponential", STRETCHED), ("exponential", EXPONENTIAL)):
        assert set(GOLDEN_GRIDS[fam]) == set(table)
        for _, dl, g, a, eg, ea in golden_table(fam):
            assert (eg, ea) == table[dl]
