"""Acceptance checks shared by ``levygsd verify`` and the test-suite.

Each ``check_<n>`` returns a :class:`CheckResult`.  ``passed`` depends only
on computed numbers, never on wall-clock time; ``elapsed`` is reported
separately so callers can enforce runtime budgets.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .feynman_kac_mc import McConfig, dumps_exact, fk_estimate_many, sample_endpoints
from .grid_spectral import Field, dense_oracle, ground_state, heat_kernel, make_grid, propagate_semigroup
from .gsd_diagnostics import (
    equivalence_consistency,
    gs_bound_check,
    gsd_scan,
    intrinsic_ratio,
    lemma_consistency_check,
    operator_norm_2p,
)
from .levy_models import CATALOG, JumpProfile, jump_paring_check, jump_paring_ratio, make_model, paring_diverges
from .potentials import classify_contractivity, constant, power_log_loglog, quadratic

INF = math.inf


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    budget: float = math.inf
    elapsed: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{status}] {self.title} ({self.elapsed:.2f} s, budget {self.budget:g} s)"

    def record(self) -> dict:
        """Wall-clock free summary for manifests."""
        return {"criterion": self.number, "title": self.title, "passed": self.passed, "details": self.details}


def _timed(number: int, title: str, budget: float):
    def wrap(fn: Callable[[], tuple]):
        def run() -> CheckResult:
            t0 = time.perf_counter()
            passed, details = fn()
            return CheckResult(number, title, bool(passed), details, budget, time.perf_counter() - t0)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def _harmonic():
    return make_model("brownian", a=1.0), quadratic()


@_timed(1, "harmonic oscillator ground state", 10.0)
def check_1():
    model, pot = _harmonic()
    grid = make_grid(1, 12.0, 1024)
    spec = ground_state(model.symbol, pot, grid, tol=1e-6)
    x = grid.nodes
    exact = math.pi**-0.25 * np.exp(-(x**2) / 2)
    err = math.sqrt(grid.h * np.sum((spec.phi0.values - exact) ** 2)) / math.sqrt(grid.h * np.sum(exact**2))
    lam_dense, _, lam1 = dense_oracle(model.symbol, pot, grid)
    d = {
        "lambda0": spec.lambda0,
        "lambda0_error": abs(spec.lambda0 - 1.0),
        "phi0_rel_l2_error": err,
        "dense_lambda0": lam_dense,
        "dense_lambda1": lam1,
        "dense_gap": abs(lam_dense - spec.lambda0),
    }
    ok = d["lambda0_error"] <= 1e-3 and err <= 1e-3 and d["dense_gap"] <= 1e-4
    return ok, d


@_timed(2, "Mehler intrinsic ratio profile", 30.0)
def check_2():
    model, pot = _harmonic()
    grid = make_grid(1, 12.0, 1024)
    spec = ground_state(model.symbol, pot, grid, tol=1e-6)
    x = grid.nodes
    i0 = int(np.argmin(np.abs(x)))
    sel = (np.abs(x) <= 6.0) & (x != 0.0)
    worst = {}
    for t in (0.25, 0.5, 1.0):
        u = intrinsic_ratio(spec, model.symbol, pot, t)
        num = np.log(u.values[sel]) - math.log(u.values[i0])
        exact = x[sel] ** 2 * (1.0 - math.tanh(2 * t)) / 2
        worst[str(t)] = float(np.max(np.abs(num - exact) / exact))
    return max(worst.values()) <= 0.02, {"max_rel_error": worst}


@_timed(3, "harmonic GSD threshold scan", 120.0)
def check_3():
    model, pot = _harmonic()
    times = (0.2, 0.25, 0.35, 0.5, 1.0)
    rep = gsd_scan(model, pot, times, [4.0, INF], [8.0, 12.0, 16.0])
    want = {(0.35, 4.0): "finite", (0.2, 4.0): "divergent"}
    for t in (0.25, 0.5, 1.0):
        want[(t, INF)] = "divergent"
    got = {k: rep.verdict(*k) for k in want}
    d = {
        "verdicts": {f"t={t} p={p}": v for (t, p), v in got.items()},
        "norms": {f"t={t} p={p}": rep.norms(t, p) for (t, p) in want},
        "plateau_t035_p4": _rel_change(rep.norms(0.35, 4.0)),
    }
    return got == want, d


def _rel_change(norms):
    return abs(norms[-1] - norms[-2]) / abs(norms[-2])


# admissible (t, R, N) per catalog symbol for the mass check
_MASS_SETUP = {"geometric-stable": (8.0, 64.0, 2048)}


@_timed(4, "heat-kernel exactness and mass", 5.0)
def check_4():
    cauchy = make_model("stable", alpha=1.0)
    p = heat_kernel(cauchy.symbol, 1.0, make_grid(1, 2048.0, 2**16))
    cauchy_err = abs(p.at(0.0) - 1 / math.pi)
    gauss = make_model("brownian", a=1.0)
    q = heat_kernel(gauss.symbol, 0.5, make_grid(1, 16.0, 512))
    gauss_err = abs(q.at(0.0) - (2 * math.pi) ** -0.5)
    mass = {}
    for name in CATALOG:
        t, R, N = _MASS_SETUP.get(name, (1.0, 4.0, 128))
        k = heat_kernel(make_model(name).symbol, t, make_grid(1, R, N))
        mass[name] = abs(k.mass() - 1.0)
    d = {"cauchy_p10_error": cauchy_err, "gauss_p05_error": gauss_err, "mass_error": mass}
    ok = cauchy_err <= 1e-6 and gauss_err <= 1e-6 and max(mass.values()) <= 1e-6
    return ok, d


def mc_records(seed: int = 20240101, workers: int = 1) -> tuple:
    """Monte Carlo records behind criterion 5, plus the spectral reference."""
    cauchy = make_model("stable", alpha=1.0)
    c = 0.7
    cfg_small = McConfig(n_paths=20_000, dt=0.01, seed=seed, workers=workers)
    zero, const = fk_estimate_many(cauchy, [constant(0.0), constant(c)], [0.0], 1.0, cfg_small)
    model, pot = _harmonic()
    cfg = McConfig(n_paths=100_000, dt=1e-3, seed=seed, workers=workers)
    harm = fk_estimate_many(model, [pot], [0.0], 0.5, cfg)[0]
    cfg_law = McConfig(n_paths=100_000, dt=0.1, seed=seed, workers=workers)
    x1 = sample_endpoints(cauchy, 1.0, cfg_law)
    hit = float(np.mean(np.abs(x1) <= 1.0))
    law = {"p_hat": hit, "stderr": math.sqrt(hit * (1 - hit) / x1.size), "n_paths": int(x1.size), "seed": seed}
    records = {"zero": zero.to_record(), "const": const.to_record(), "harmonic": harm.to_record(), "cauchy_law": law}
    return records, c


def harmonic_reference(t: float = 0.5) -> float:
    model, pot = _harmonic()
    grid = make_grid(1, 12.0, 1024)
    out = propagate_semigroup(Field(grid, np.ones(grid.N)), model.symbol, pot, t, 500)
    return out.at(0.0)


@_timed(5, "Monte Carlo cross-validation", 120.0)
def check_5():
    rec, c = mc_records()
    ref = harmonic_reference()
    h = rec["harmonic"]
    law = rec["cauchy_law"]
    d = {
        "zero_mean": rec["zero"]["mean"],
        "const_mean": rec["const"]["mean"],
        "const_exact": math.exp(-c),
        "harmonic_mc": h["mean"],
        "harmonic_stderr": h["stderr"],
        "harmonic_spectral": ref,
        "harmonic_z": abs(h["mean"] - ref) / h["stderr"],
        "cauchy_p_hat": law["p_hat"],
        "cauchy_z": abs(law["p_hat"] - 0.5) / law["stderr"],
    }
    ok = (
        rec["zero"]["mean"] == 1.0
        and rec["const"]["mean"] == math.exp(-c)
        and d["harmonic_z"] <= 3.0
        and h["stderr"] <= 0.02 * h["mean"]
        and d["cauchy_z"] <= 3.0
    )
    return ok, d


@_timed(6, "jump-paring verifier", 60.0)
def check_6():
    poly = JumpProfile(1.0, "polynomial", gamma=1.0)
    expo = JumpProfile(1.0, "exponential", gamma=1.5, c=1.0)
    ok_poly, r_poly = jump_paring_check(poly)
    ok_expo, r_expo = jump_paring_check(expo)
    gauss = JumpProfile(1.0, "gaussian_tail")
    ratios = jump_paring_ratio(gauss, [2.0, 3.0, 4.0, 5.0, 6.0])
    diverged, at = paring_diverges(ratios)
    q6 = ratios[-1][1]
    # midpoint oracle: |y - x/2| <= 1/2 gives g(x-y) g(y) >= exp(-x^2/2 - 1/2)
    oracle = math.exp(36.0 / 2 - 0.5)
    d = {
        "polynomial_max_ratio": max(q for _, q in r_poly),
        "exponential_max_ratio": max(q for _, q in r_expo),
        "gaussian_diverged_at": at,
        "gaussian_ratio_6": q6,
        "midpoint_lower_bound_6": oracle,
    }
    ok = ok_poly and ok_expo and diverged and at <= 6.0 and q6 > 1e3 and q6 >= oracle
    return ok, d


# literal side conditions of the three tail examples: (gsd, agsd)
def _poly_rule(d1, d2, d3):
    # the AGSD list is read with d2 > 1 in its second clause; with d2 >= 1
    # the third clause would be redundant and d3 < 0 would contradict the
    # growth comparison
    gsd = d1 > 0 or (d1 == 0 and d2 > 1) or (d1 == 0 and d2 == 1 and d3 > 0)
    agsd = d1 > 0 or (d1 == 0 and d2 > 1) or (d1 == 0 and d2 == 1 and d3 >= 0)
    return gsd, agsd


def _stretched_rule(d1, d2, d3):
    return d1 > 1 or (d1 == 1 and d2 > -1), d1 > 1 or (d1 == 1 and d2 >= -1)


def _exp_rule(d1, d2, d3):
    return d1 > 1 or (d1 == 1 and d2 > 0), d1 > 1 or (d1 == 1 and d2 >= 0)


GOLDEN_GRIDS = {
    "polynomial": [
        (2.0, 0.0, 0.0), (0.5, -3.0, 0.0), (0.1, 0.0, -2.0), (0.0, 2.0, 0.0),
        (0.0, 1.5, -4.0), (0.0, 1.0, 1.0), (0.0, 1.0, 0.5), (0.0, 1.0, 0.0),
        (0.0, 1.0, -0.5), (0.0, 0.5, 3.0), (0.0, 0.0, 2.0), (0.0, 0.9, 10.0),
    ],
    "stretched_exponential": [
        (2.0, 0.0, 0.0), (1.5, -5.0, 0.0), (1.0, 1.0, 0.0), (1.0, 0.0, 0.0),
        (1.0, -0.5, 0.0), (1.0, -1.0, 0.0), (1.0, -1.5, 0.0), (1.0, -3.0, 0.0),
        (0.9, 10.0, 0.0), (0.5, 0.0, 0.0), (0.0, 3.0, 0.0), (0.99, 100.0, 0.0),
    ],
    "exponential": [
        (2.0, 0.0, 0.0), (1.5, -5.0, 0.0), (1.0, 2.0, 0.0), (1.0, 0.5, 0.0),
        (1.0, 0.01, 0.0), (1.0, 0.0, 0.0), (1.0, -0.5, 0.0), (1.0, -2.0, 0.0),
        (0.9, 10.0, 0.0), (0.5, 0.0, 0.0), (0.0, 3.0, 0.0), (0.99, 100.0, 0.0),
    ],
}
GOLDEN_RULES = {"polynomial": _poly_rule, "stretched_exponential": _stretched_rule, "exponential": _exp_rule}
GOLDEN_MODELS = {
    "polynomial": [("stable", {}), ("layered", {}), ("jump-diffusion", {})],
    # the stretched side conditions are stated for |log nu| ~ r / log r, i.e. beta = 1
    "stretched_exponential": [("stretched-exp", {"beta": 1.0})],
    "exponential": [("relativistic", {}), ("tempered", {})],
}


def golden_table(family: str) -> list:
    """Rows (model, delta, gsd, agsd, expected_gsd, expected_agsd) for one tail family."""
    rows = []
    rule = GOLDEN_RULES[family]
    for name, params in GOLDEN_MODELS[family]:
        model = make_model(name, **params)
        first = True
        for dl in GOLDEN_GRIDS[family]:
            v = classify_contractivity(power_log_loglog(*dl), model, check_assumptions=first)
            first = False
            rows.append((name, dl, v.gsd_all_p, v.agsd_all_p) + rule(*dl))
    return rows


@_timed(7, "classifier golden tables", 1.0)
def check_7():
    mism = []
    count = 0
    for fam in GOLDEN_GRIDS:
        for name, dl, g, a, eg, ea in golden_table(fam):
            count += 1
            if (g, a) != (eg, ea):
                mism.append({"model": name, "delta": list(dl), "got": [g, a], "expected": [eg, ea]})
    return not mism, {"cases": count, "mismatches": mism}


@_timed(8, "ground-state two-sided bound", 60.0)
def check_8():
    model = make_model("stable", alpha=1.0)
    pot = power_log_loglog(2.0)
    spec = ground_state(model.symbol, pot, make_grid(1, 16.0, 1024), tol=1e-6)
    main = gs_bound_check(spec, model, pot, window=(6.0, 10.0))
    a = gs_bound_check(spec, model, pot, window=(6.0, 8.0))
    b = gs_bound_check(spec, model, pot, window=(8.0, 10.0))
    up_ratio = a.upper / b.upper
    low_ratio = a.lower / b.lower
    d = {
        "lambda0": spec.lambda0,
        "upper": main.upper,
        "lower": main.lower,
        "spread": main.spread,
        "upper_ratio_6_8_vs_8_10": up_ratio,
        "lower_ratio_6_8_vs_8_10": low_ratio,
    }
    stable = all(0.1 <= q <= 10.0 for q in (up_ratio, low_ratio))
    return main.passed and stable, d


@_timed(9, "operator norms and lemma consistency", 60.0)
def check_9():
    ident = {}
    for n in (16, 50):
        w = np.full(n, 1.0 / n)
        for p in (3.0, 4.0, 8.0):
            est = operator_norm_2p(np.eye(n), w, p).value
            exact = n ** (0.5 - 1.0 / p)
            ident[f"n={n} p={p}"] = abs(est - exact)
    model, pot = _harmonic()
    spec = ground_state(model.symbol, pot, make_grid(1, 12.0, 1024), tol=1e-6)
    harm = lemma_consistency_check(spec, model.symbol, pot, 0.35, 4.0, t_b=0.1)
    cauchy = make_model("stable", alpha=1.0)
    spec_c = ground_state(cauchy.symbol, pot, make_grid(1, 8.0, 512), tol=1e-6)
    cq = lemma_consistency_check(spec_c, cauchy.symbol, pot, 0.25, 3.0, t_b=0.1)
    d = {
        "identity_max_error": max(ident.values()),
        "harmonic": {"lhs": harm.lhs, "rhs": harm.rhs, "holds": harm.holds},
        "cauchy_quadratic": {"lhs": cq.lhs, "rhs": cq.rhs, "holds": cq.holds},
    }
    return max(ident.values()) <= 1e-10 and harm.holds and cq.holds, d


@_timed(10, "classifier versus scan equivalence", 180.0)
def check_10():
    model = make_model("stable", alpha=1.0)
    res = equivalence_consistency(model, power_log_loglog(2.0), [0.25, 0.5, 1.0], [4.0, INF], [16.0, 24.0, 32.0])
    cls = res["classifier"]
    rep = res["report"]
    d = {
        "classifier": [cls["gsd_all_p"], cls["agsd_all_p"]],
        "scan_all_finite": res["scan_all_finite"],
        "disagreements": res["disagreements"],
        "verdicts": {f"t={t} p={p}": v for (t, p), v in rep.verdicts.items()},
    }
    ok = cls["gsd_all_p"] is True and cls["agsd_all_p"] is True and res["scan_all_finite"] is True
    return ok and not res["disagreements"], d


@_timed(11, "Monte Carlo determinism", 240.0)
def check_11():
    a = dumps_exact(mc_records(workers=1)[0])
    b = dumps_exact(mc_records(workers=1)[0])
    c = dumps_exact(mc_records(workers=8)[0])
    return a == b and a == c, {"repeat_identical": a == b, "workers_identical": a == c}


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 12)}


def run_checks(numbers: Optional[list] = None, progress: Optional[Callable] = None) -> list:
    out = []
    for n in numbers or sorted(CHECKS):
        if n not in CHECKS:
            raise KeyError(f"no acceptance criterion {n}")
        res = CHECKS[n]()
        if progress:
            progress(res)
        out.append(res)
    return out
