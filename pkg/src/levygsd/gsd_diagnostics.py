"""Ground-state domination diagnostics on top of the grid solver.

The central object is the intrinsic ratio ``u_t = e^{lambda0 t} T_t 1 / phi0``.
Its ``L^p(mu)`` norms, with ``mu = phi0^2 dx`` restricted to the inner part of
the box, are tracked while the box grows; a plateau means finite, sustained
growth means divergent.  Operator norms ``L^2(mu) -> L^p(mu)`` of the
transformed semigroup are estimated with Boyd's nonlinear power method.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalError
from .grid_spectral import (
    Field,
    Grid,
    SpectralResult,
    SplitStepper,
    ground_state,
    heat_kernel,
    make_grid,
    potential_on_grid,
    propagate_semigroup,
)
from .levy_models import LevyModel, LevySymbol, eval_density
from .potentials import Potential, classify_contractivity, sup_ball

WINDOW = 0.75
PLATEAU = 0.01
GROWTH = 10.0
UNDERFLOW = 1e-300
VERDICTS = ("finite", "divergent", "inconclusive")


def _pkey(p: float):
    return "inf" if math.isinf(p) else p


# ---------------------------------------------------------------------------
# Intrinsic ratio and weighted norms
# ---------------------------------------------------------------------------


def _steps_for(t: float, dt: float) -> int:
    """Largest step count whose step is not below dt (keeps the solver's mode)."""
    return max(1, int(math.floor(t / dt * (1 + 1e-12))))


def intrinsic_ratio(
    spec: SpectralResult, symbol: LevySymbol, pot: Potential, t: float, steps: Optional[int] = None
) -> Field:
    """u_t = e^{lambda0 t} T_t 1 / phi0 on the grid of ``spec``.

    Nodes where phi0 < 1e-300 are set to 0 and listed in ``meta["excluded"]``.
    """
    phi = spec.phi0.values
    grid = spec.phi0.grid
    bad = phi < UNDERFLOW
    safe = np.where(bad, 1.0, phi)
    if t == 0:
        vals = 1.0 / safe
        meta = {}
    else:
        n = steps if steps is not None else _steps_for(t, spec.dt)
        one = Field(grid, np.ones(grid.shape))
        T1 = propagate_semigroup(one, symbol, pot, t, n, mode=spec.mode if spec.mode == "kernel" else "auto")
        vals = math.exp(spec.lambda0 * t) * T1.values / safe
        meta = dict(T1.meta)
    vals = np.where(bad, 0.0, vals)
    meta["excluded"] = np.flatnonzero(bad.ravel()).tolist()
    return Field(grid, vals, "intrinsic_ratio", t, meta)


def weighted_lp_norm(f: Field, phi0: Field, p: float, window: float = WINDOW, exclude=None) -> float:
    """Norm in L^p(mu) with mu = phi0^2 dx normalised to a probability on the window."""
    if f.grid != phi0.grid:
        raise ValueError("fields live on different grids")
    if not 0 < window <= 1:
        raise ValueError("window fraction must lie in (0, 1]")
    mask = f.grid.window(window)
    if exclude:
        flat = mask.ravel().copy()
        flat[np.asarray(exclude, dtype=int)] = False
        mask = flat.reshape(mask.shape)
    if not np.any(mask):
        raise ValueError("empty window")
    v = np.abs(f.values[mask])
    if math.isinf(p):
        return float(v.max())
    if not p >= 1:
        raise ValueError("p must be >= 1")
    w = phi0.values[mask] ** 2
    w = w / w.sum()
    # scale out the maximum to keep |f|^p in range
    top = float(v.max())
    if top == 0:
        return 0.0
    return top * float(np.sum(w * (v / top) ** p)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# GSD scans
# ---------------------------------------------------------------------------


def default_n_rule(h_target: float = 1.0 / 32):
    """Nodes per box: the power of two giving spacing closest to, not above, h_target."""

    def rule(R: float) -> int:
        return int(2 ** math.ceil(math.log2(2 * R / h_target - 1e-9)))

    return rule


def box_verdict(norms: Sequence[float], plateau: float = PLATEAU, growth: float = GROWTH) -> str:
    """Trend verdict for norms on increasing boxes."""
    v = [float(x) for x in norms]
    if len(v) >= 2 and all(math.isfinite(x) and x > 0 for x in v[-2:]):
        if abs(v[-1] - v[-2]) / v[-2] < plateau:
            return "finite"
    ratios = [b / a if a > 0 else math.inf for a, b in zip(v[:-1], v[1:])]
    for a, b in zip(ratios[:-1], ratios[1:]):
        if a > growth and b > growth:
            return "divergent"
    return "inconclusive"


def _coherent(verdicts: dict, p_sorted: list) -> tuple:
    """Propagate divergence upward and finiteness downward in p; clashes become inconclusive."""
    out = dict(verdicts)
    clashes = []
    for i, p in enumerate(p_sorted):
        if verdicts[p] == "divergent":
            for q in p_sorted[i + 1 :]:
                if verdicts[q] == "finite":
                    clashes.append((p, q))
    if clashes:
        for p, q in clashes:
            for r in p_sorted:
                if p <= r <= q:
                    out[r] = "inconclusive"
        return out, clashes
    for i, p in enumerate(p_sorted):
        if out[p] == "divergent":
            for q in p_sorted[i + 1 :]:
                out[q] = "divergent"
        if out[p] == "finite":
            for q in p_sorted[:i]:
                out[q] = "finite"
    return out, clashes


@dataclass
class GsdReport:
    model: str
    potential: str
    entries: list  # dicts with t, p, R_box, N, norm
    verdicts: dict  # (t, p) -> verdict after coherence
    raw_verdicts: dict
    window: float = WINDOW
    meta: dict = field(default_factory=dict)

    def norms(self, t: float, p: float) -> list:
        return [e["norm"] for e in self.entries if e["t"] == t and e["p"] == p]

    def verdict(self, t: float, p: float) -> str:
        return self.verdicts[(t, p)]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "potential": self.potential,
            "window": self.window,
            "entries": [{**e, "p": _pkey(e["p"])} for e in self.entries],
            "verdicts": [
                {"t": t, "p": _pkey(p), "verdict": v, "raw": self.raw_verdicts[(t, p)]}
                for (t, p), v in self.verdicts.items()
            ],
            "meta": self.meta,
        }

    def to_json(self) -> str:
        from .feynman_kac_mc import dumps_exact

        return dumps_exact(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "potential", "t", "p", "R_box", "N", "norm", "verdict"])
        for e in self.entries:
            w.writerow(
                [
                    self.model,
                    self.potential,
                    "%.17g" % e["t"],
                    _pkey(e["p"]),
                    "%.17g" % e["R_box"],
                    e["N"],
                    "%.17g" % e["norm"],
                    self.verdicts[(e["t"], e["p"])],
                ]
            )
        return buf.getvalue()


def _label(x) -> str:
    if isinstance(x, LevyModel):
        return x.name
    if isinstance(x, Potential):
        return x.label or json.dumps(x.describe(), sort_keys=True)
    return str(x)


def gsd_scan(
    model: LevyModel,
    pot: Potential,
    t_list: Sequence[float],
    p_list: Sequence[float],
    box_list: Sequence[float],
    n_rule=None,
    tol: float = 1e-6,
    window: float = WINDOW,
    mode: str = "auto",
) -> GsdReport:
    """Norms of u_t in L^p(mu) over growing boxes, with trend verdicts."""
    boxes = [float(b) for b in box_list]
    if any(b2 <= b1 for b1, b2 in zip(boxes[:-1], boxes[1:])):
        raise ValueError("boxes must be strictly increasing")
    if model.d != 1 or pot.d != 1:
        raise ValueError("scans are implemented for d = 1")
    n_rule = n_rule or default_n_rule()
    sym = model.symbol
    t_list = [float(t) for t in t_list]
    p_list = sorted(float(p) for p in p_list)
    entries = []
    solver = []
    for R in boxes:
        grid = make_grid(1, R, n_rule(R))
        spec = ground_state(sym, pot, grid, tol, mode=mode)
        solver.append({"R_box": R, "N": grid.N, **spec.to_dict()})
        for t in t_list:
            u = intrinsic_ratio(spec, sym, pot, t)
            for p in p_list:
                nrm = weighted_lp_norm(u, spec.phi0, p, window, u.meta.get("excluded"))
                entries.append({"t": t, "p": p, "R_box": R, "N": grid.N, "norm": nrm})
    raw = {}
    for t in t_list:
        for p in p_list:
            raw[(t, p)] = box_verdict([e["norm"] for e in entries if e["t"] == t and e["p"] == p])
    final = {}
    clashes = {}
    for t in t_list:
        coh, cl = _coherent({p: raw[(t, p)] for p in p_list}, p_list)
        for p in p_list:
            final[(t, p)] = coh[p]
        if cl:
            clashes[t] = [[_pkey(a), _pkey(b)] for a, b in cl]
    meta = {"solver": solver, "boxes": boxes, "plateau": PLATEAU, "growth": GROWTH}
    if clashes:
        meta["coherence_clashes"] = clashes
    return GsdReport(_label(model), _label(pot), entries, final, raw, window, meta)


# ---------------------------------------------------------------------------
# Ground-state bounds and integrability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GsBound:
    upper: float  # sup phi0 / nu over the window
    lower: float  # inf phi0 V_r* / nu over the window
    spread: float  # C6^2 with C6 = max(1, upper, 1/lower)
    passed: bool
    window: tuple
    r: float


def gs_bound_check(
    spec: SpectralResult,
    model: LevyModel,
    pot: Potential,
    r: float = 0.5,
    window: tuple = (6.0, 10.0),
    cap: float = 1e3,
) -> GsBound:
    """Two-sided ground-state bound nu/V_r* <~ phi0 <~ nu on an annulus.

    ``spread`` is C^2 for the smallest C with
    ``(1/C) nu/V_r* <= phi0 <= C nu`` on the sampled nodes.
    """
    if model.profile is None:
        raise ValueError("proposition hypotheses not met: the model has no jump part")
    lo, hi = window
    grid = spec.phi0.grid
    if hi > WINDOW * grid.R:
        raise ValueError(f"window edge {hi} lies in the outer buffer of a box with R = {grid.R}")
    rad = grid.radii()
    mask = (rad >= lo) & (rad <= hi)
    if not np.any(mask):
        raise ValueError("no grid nodes in the window")
    pts = grid.points()[mask]
    phi = spec.phi0.values[mask]
    up, low = [], []
    for x, f in zip(pts, phi):
        nu = eval_density(model, x)
        up.append(f / nu)
        low.append(f * sup_ball(pot, np.atleast_1d(x), r) / nu)
    upper, lower = float(max(up)), float(min(low))
    c6 = max(1.0, upper, 1.0 / lower) if lower > 0 else math.inf
    spread = c6**2
    ok = math.isfinite(upper) and lower > 0 and spread <= cap
    return GsBound(upper, lower, spread, ok, (lo, hi), r)


def gs_integrability(spec: SpectralResult, delta: float, window: float = WINDOW, rtol: float = 1e-3) -> tuple:
    """(h^d sum_window phi0^(1-delta), converged) with converged comparing the 2/3 window."""
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    g = spec.phi0.grid
    vals = np.maximum(spec.phi0.values, 0.0) ** (1.0 - delta)
    full = g.cell * float(np.sum(vals[g.window(window)]))
    inner = g.cell * float(np.sum(vals[g.window(window * 2 / 3)]))
    return full, abs(full - inner) <= rtol * full


# ---------------------------------------------------------------------------
# Operator norms L^2(mu) -> L^p(mu)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.value


def operator_norm_2p(
    M: np.ndarray,
    weights: np.ndarray,
    p: float,
    rtol: float = 1e-8,
    max_iter: int = 2000,
    starts: Optional[Sequence[np.ndarray]] = None,
) -> NormEstimate:
    """Norm of f -> M f from L^2(w) to L^p(w), w a probability vector.

    Boyd's nonlinear power method on ``A = diag(w^(1/p)) M diag(w^(-1/2))``:
    ``g <- A^T J(A g)`` normalised in l^2, with J the l^p duality map.  The
    iterates are non-decreasing for non-negative A; the largest value over
    the starting vectors (uniform plus point masses at the ends and the
    middle) is returned.
    """
    if not 2 < p < math.inf:
        raise ValueError("p must lie in (2, inf)")
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    n = w.size
    A = (w ** (1.0 / p))[:, None] * np.asarray(M, dtype=float) * (w**-0.5)[None, :]
    if starts is None:
        starts = [np.sqrt(w)]
        for j in sorted({0, n // 2, n - 1, int(np.argmin(w))}):
            e = np.zeros(n)
            e[j] = 1.0
            starts.append(e)
    best = NormEstimate(0.0, True, 0)
    for g0 in starts:
        g = np.asarray(g0, dtype=float)
        g = g / np.linalg.norm(g)
        val = 0.0
        conv = False
        it = 0
        for it in range(1, max_iter + 1):
            y = A @ g
            ny = np.linalg.norm(y, ord=p) if np.any(y) else 0.0
            if ny == 0:
                break
            z = np.sign(y) * (np.abs(y) / ny) ** (p - 1)
            g_new = A.T @ z
            ng = np.linalg.norm(g_new)
            if ng == 0:
                break
            g = g_new / ng
            new = float(np.linalg.norm(A @ g, ord=p))
            if abs(new - val) <= rtol * max(new, 1e-300):
                val = max(val, new)
                conv = True
                break
            val = max(val, new)
        if val > best.value:
            best = NormEstimate(val, conv, it)
    if not best.converged:
        warnings.warn("nonlinear power method hit the iteration cap; value is a lower bound", RuntimeWarning)
    return best


def _common_steps(times: Sequence[float], dt: float, max_k: int = 100000) -> tuple:
    """A step dt' >= ~dt such that every time is a whole number of steps."""
    ts = [t for t in times if t > 0]
    if not ts:
        return dt, [0 for _ in times]
    base = min(ts)
    k0 = max(1, int(math.floor(base / dt)))
    for k in range(k0, 0, -1):
        h = base / k
        counts = [t / h for t in times]
        if all(abs(c - round(c)) < 1e-9 * max(1.0, c) for c in counts):
            return h, [int(round(c)) for c in counts]
    raise ValueError(f"no common time step for {list(times)}")


def intrinsic_operator(spec: SpectralResult, symbol: LevySymbol, pot: Potential, t: float, dt=None, window=WINDOW):
    """(M, weights): the transformed semigroup e^{lambda0 t} phi0^{-1} T_t phi0 on the window."""
    grid = spec.phi0.grid
    if grid.d != 1:
        raise ValueError("dense intrinsic operators are limited to d = 1")
    mask = grid.window(window)
    phi = spec.phi0.values
    if t == 0:
        T = np.eye(grid.N)
    else:
        step, (n,) = _common_steps([t], dt or spec.dt)
        st = SplitStepper(symbol, pot, grid, step, spec.mode if spec.mode == "kernel" else "auto")
        T = st.matrix(n)
    M = math.exp(spec.lambda0 * t) * (T / phi[:, None]) * phi[None, :]
    w = phi[mask] ** 2
    return M[np.ix_(mask, mask)], w / w.sum()


def intrinsic_norm_2p(
    spec: SpectralResult, symbol: LevySymbol, pot: Potential, t: float, p: float, window: float = WINDOW, dt=None
) -> NormEstimate:
    """Estimate of the norm of the transformed semigroup from L^2(mu) to L^p(mu)."""
    M, w = intrinsic_operator(spec, symbol, pot, t, dt, window)
    return operator_norm_2p(M, w, p)


@dataclass(frozen=True)
class LemmaReport:
    lhs: float
    rhs: float
    slack: float
    holds: bool
    norm_2inf: float
    norm_2inf_kernel_bound: Optional[float]
    u_norm: float
    t: float
    t_b: float
    p: float
    warning: Optional[str] = None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lemma_consistency_check(
    spec: SpectralResult,
    symbol: LevySymbol,
    pot: Potential,
    t: float,
    p: float,
    t_b: float = 0.1,
    window: float = WINDOW,
) -> LemmaReport:
    """Check  C_{2,p,t+t_b} <= ||e^{-t_b H}||_{2,inf} e^{lambda0 t_b} ||u_t||_{L^p(mu)}.

    Both sides use the same time step, so the discrete propagators compose
    exactly.  ``||e^{-t_b H}||_{2,inf}`` is the exact discrete value
    ``max_i (sum_j T_ij^2 / h)^{1/2}``; the free-kernel bound is reported
    alongside when the heat kernel is resolvable on the grid.
    """
    grid = spec.phi0.grid
    V = potential_on_grid(pot, grid)
    if pot.confining is False or (pot.confining is None and np.ptp(V) == 0):
        raise ValueError("lemma check needs a confining potential")
    if not t_b > 0:
        raise ValueError("t_b must be positive")
    step, (n_t, n_b) = _common_steps([t, t_b], spec.dt)
    st = SplitStepper(symbol, pot, grid, step, spec.mode if spec.mode == "kernel" else "auto")
    Tb = st.matrix(n_b)
    Tt = st.matrix(n_t) if n_t else np.eye(grid.N)
    T = Tt @ Tb
    phi = spec.phi0.values
    mask = grid.window(window)
    w = phi[mask] ** 2
    w = w / w.sum()
    M = math.exp(spec.lambda0 * (t + t_b)) * (T / phi[:, None]) * phi[None, :]
    lhs = operator_norm_2p(M[np.ix_(mask, mask)], w, p).value
    norm_2inf = float(np.sqrt(np.max(np.sum(Tb**2, axis=1)) / grid.h))
    try:
        pk = heat_kernel(symbol, t_b, grid).values
        kb = math.exp(t_b * max(0.0, -float(V.min()))) * math.sqrt(grid.h * float(np.sum(pk**2)))
    except (NumericalError, ValueError):
        kb = None
    u = math.exp(spec.lambda0 * t) * (Tt @ np.ones(grid.N)) / phi
    u_norm = weighted_lp_norm(Field(grid, u), spec.phi0, p, window)
    rhs = norm_2inf * math.exp(spec.lambda0 * t_b) * u_norm
    slack = rhs / lhs if lhs > 0 else math.inf
    warn = "vacuous: right side exceeds left by more than 1e6" if slack > 1e6 else None
    return LemmaReport(lhs, rhs, slack, lhs <= rhs * (1 + 1e-12), norm_2inf, kb, u_norm, t, t_b, p, warn)


# ---------------------------------------------------------------------------
# Classifier versus numerics
# ---------------------------------------------------------------------------


def equivalence_consistency(
    model: LevyModel,
    pot: Potential,
    t_list: Sequence[float],
    p_list: Sequence[float],
    box_list: Sequence[float],
    n_rule=None,
    tol: float = 1e-6,
) -> dict:
    """Compare the analytic verdict with a numerical scan.

    gsd_all_p should match "finite at every scanned (t, p)", and agsd_all_p
    should match "finite at the largest t for every p".  Inconclusive
    entries are listed but never counted as disagreements.
    """
    if model.profile is None:
        raise ValueError("equivalences need a jump model; pure diffusion is excluded")
    verdict = classify_contractivity(pot, model)
    report = gsd_scan(model, pot, t_list, p_list, box_list, n_rule, tol)
    ts = sorted(report.verdicts and {t for t, _ in report.verdicts})
    inconclusive = [(t, _pkey(p)) for (t, p), v in report.verdicts.items() if v == "inconclusive"]
    disagreements = []

    def decided(cells):
        vs = [report.verdicts[c] for c in cells]
        if all(v == "finite" for v in vs):
            return True
        if any(v == "divergent" for v in vs):
            return False
        return None

    all_cells = list(report.verdicts)
    late = [c for c in all_cells if c[0] == ts[-1]]
    num_gsd = decided(all_cells)
    num_agsd = decided(late)
    if verdict.gsd_all_p is not None and num_gsd is not None and num_gsd != verdict.gsd_all_p:
        disagreements.append({"property": "gsd_all_p", "classifier": verdict.gsd_all_p, "scan": num_gsd})
    if verdict.agsd_all_p is not None and num_agsd is not None and num_agsd != verdict.agsd_all_p:
        disagreements.append({"property": "agsd_all_p", "classifier": verdict.agsd_all_p, "scan": num_agsd})
    return {
        "classifier": verdict.to_dict(),
        "scan_all_finite": num_gsd,
        "scan_late_finite": num_agsd,
        "disagreements": disagreements,
        "inconclusive": inconclusive,
        "report": report,
    }
