"""Monte Carlo for the Feynman-Kac functional T_t 1(x) = E^x[exp(-int_0^t V(X_s) ds)].

Increments are exact where a closed sampler exists (stable via
Chambers-Mallows-Stuck, Brownian, relativistic and geometric stable by
subordination).  Other models use compound Poisson jumps of radius > eps
drawn from the exact Levy density, plus a Gaussian for the small jumps with
the matching variance.

Randomness is organised in fixed blocks of paths.  Block ``b`` draws from
``Philox(SeedSequence(seed, spawn_key=(b,)))``, so results do not depend on
how many workers process the blocks.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .levy_models import LevyModel, sphere_area
from .potentials import Potential

BLOCK_SIZE = 4096
SMALL_JUMP_MODES = ("gaussian_correction", "drop")


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    dt: float = 1e-3
    epsilon: float = 0.25
    seed: int = 0
    small_jumps: str = "gaussian_correction"
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.epsilon <= 1:
            raise ValueError("epsilon must lie in (0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.small_jumps not in SMALL_JUMP_MODES:
            raise ValueError(f"small_jumps must be one of {SMALL_JUMP_MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    config: McConfig
    model: str = ""
    potential: str = ""
    x0: tuple = ()
    t: float = 0.0

    def to_record(self) -> dict:
        cfg = self.config
        return {
            "model": self.model,
            "potential": self.potential,
            "x0": list(self.x0),
            "t": self.t,
            "mean": self.mean,
            "stderr": self.stderr,
            "n_paths": self.n_paths,
            "dt": cfg.dt,
            "epsilon": cfg.epsilon,
            "seed": cfg.seed,
            "small_jumps": cfg.small_jumps,
        }

    def to_json(self) -> str:
        return dumps_exact(self.to_record())


def dumps_exact(obj) -> str:
    """JSON with floats written as '%.17g' (round-trip exact), keys sorted."""

    def conv(o):
        if isinstance(o, float):
            return _Raw("%.17g" % o if math.isfinite(o) else json.dumps(str(o)))
        if isinstance(o, dict):
            return {k: conv(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [conv(v) for v in o]
        if isinstance(o, np.generic):
            return conv(o.item())
        return o

    return _encode(conv(obj))


class _Raw(str):
    pass


def _encode(o) -> str:
    if isinstance(o, _Raw):
        return str(o)
    if isinstance(o, dict):
        return "{" + ", ".join(json.dumps(str(k)) + ": " + _encode(o[k]) for k in sorted(o)) + "}"
    if isinstance(o, list):
        return "[" + ", ".join(_encode(v) for v in o) + "]"
    return json.dumps(o)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _cms_symmetric(alpha: float, rng, size) -> np.ndarray:
    """Symmetric alpha-stable variates with E exp(i xi X) = exp(-|xi|^alpha)."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    if alpha == 1.0:
        return np.tan(u)
    w = rng.standard_exponential(size)
    return np.sin(alpha * u) / np.cos(u) ** (1 / alpha) * (np.cos((1 - alpha) * u) / w) ** ((1 - alpha) / alpha)


def _positive_stable(a: float, rng, size) -> np.ndarray:
    """Positive a-stable variates, E exp(-s S) = exp(-s^a), a in (0, 1) (Kanter)."""
    u = rng.uniform(0.0, np.pi, size)
    w = rng.standard_exponential(size)
    return (np.sin(a * u) / np.sin(u) ** (1 / a)) * (np.sin((1 - a) * u) / w) ** ((1 - a) / a)


def _stable_vector(alpha: float, d: int, rng, size: int) -> np.ndarray:
    """Rotation invariant stable vectors with E exp(i xi.X) = exp(-|xi|^alpha)."""
    if d == 1:
        return _cms_symmetric(alpha, rng, size)
    a = alpha / 2
    s = _positive_stable(a, rng, size) if a < 1 else np.ones(size)
    return np.sqrt(2.0 * s)[:, None] * rng.standard_normal((size, d))


def _gauss(d, rng, size, var) -> np.ndarray:
    z = rng.standard_normal(size if d == 1 else (size, d))
    return math.sqrt(var) * z


def small_jump_variance(source, eps: float) -> float:
    """int_{|y| < eps} |y|^2 nu(y) dy.

    ``source`` is a :class:`LevyModel` (its exact density is used) or a radial
    density callable with a ``d`` attribute, such as a JumpProfile.
    """
    if isinstance(source, LevyModel):
        n, d = source.levy_density, source.d
        if n is None:
            return 0.0
    else:
        n, d = source, getattr(source, "d", 1)
    val, _ = integrate.quad(lambda r: r ** (d + 1) * n(r), 0.0, eps, epsabs=1e-14, epsrel=1e-12, limit=200)
    return sphere_area(d) * val


@lru_cache(maxsize=32)
def _jump_table(model: LevyModel, eps: float):
    """Rate of jumps with |z| > eps and a tabulated inverse CDF of their radius."""
    n, d = model.levy_density, model.d
    area = sphere_area(d)
    lo = math.log(eps)
    hi = lo + 1.0
    top = n(eps) * eps**d
    # extend until the radial mass density r^d n(r) is negligible
    while n(math.exp(hi)) * math.exp(hi * d) > 1e-16 * top and hi < math.log(1e15):
        hi += 1.0
    u = np.linspace(lo, hi, 8001)
    r = np.exp(u)
    dens = np.asarray(n(r), dtype=float) * r**d
    cdf = integrate.cumulative_trapezoid(dens, u, initial=0.0)
    rate = area * cdf[-1]
    return rate, cdf / cdf[-1], u


def _compound_poisson(model: LevyModel, dt: float, eps: float, rng, size: int) -> np.ndarray:
    rate, cdf, u = _jump_table(model, eps)
    d = model.d
    k = rng.poisson(rate * dt, size)
    total = int(k.sum())
    out = np.zeros(size if d == 1 else (size, d))
    if total == 0:
        return out
    radii = np.exp(np.interp(rng.uniform(0.0, 1.0, total), cdf, u))
    owner = np.repeat(np.arange(size), k)
    if d == 1:
        jumps = radii * np.where(rng.uniform(size=total) < 0.5, -1.0, 1.0)
        return np.bincount(owner, weights=jumps, minlength=size)
    g = rng.standard_normal((total, d))
    jumps = radii[:, None] * g / np.linalg.norm(g, axis=1, keepdims=True)
    np.add.at(out, owner, jumps)
    return out


def sample_increment(
    model: LevyModel,
    dt: float,
    rng: np.random.Generator,
    size: Optional[int] = None,
    epsilon: float = 0.25,
    small_jumps: str = "gaussian_correction",
) -> np.ndarray:
    """Increments X_dt - X_0, shape (size,) in d = 1 or (size, d); one draw if size is None."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    m = 1 if size is None else int(size)
    d = model.d
    sym = model.symbol
    s = model.sampler
    if s == "gaussian":
        out = _gauss(d, rng, m, 2.0 * sym.a * dt)
    elif s in ("stable", "jump_diffusion"):
        out = dt ** (1 / sym.alpha) * _stable_vector(sym.alpha, d, rng, m)
        if sym.a > 0:
            out = out + _gauss(d, rng, m, 2.0 * sym.a * dt)
    elif s == "relativistic":
        out = _relativistic(sym.alpha, sym.m, d, dt, rng, m)
    elif s == "geometric_stable":
        g = rng.gamma(dt, 1.0, m)
        z = _stable_vector(sym.alpha, d, rng, m)
        out = (g ** (1 / sym.alpha))[:, None] * z if d > 1 else g ** (1 / sym.alpha) * z
    else:
        out = _compound_poisson(model, dt, epsilon, rng, m)
        if small_jumps == "gaussian_correction":
            out = out + _gauss(d, rng, m, dt * small_jump_variance(model, epsilon) / d)
        elif small_jumps != "drop":
            raise ValueError(f"unknown small-jump mode {small_jumps!r}")
        if sym.a > 0:
            out = out + _gauss(d, rng, m, 2.0 * sym.a * dt)
    if size is None:
        return out[0] if d == 1 else out[0]
    return out


def _relativistic(alpha, mass, d, dt, rng, size) -> np.ndarray:
    """Brownian motion (psi = |xi|^2) run by a tempered alpha/2-stable subordinator.

    The subordinator has Laplace exponent (lam + theta)^(alpha/2) - m with
    theta = m^(2/alpha); it is drawn by rejection from the untempered law
    with acceptance probability exp(-theta S).
    """
    a = alpha / 2
    theta = mass ** (1 / a)
    scale = dt ** (1 / a)
    s = np.empty(size)
    todo = np.arange(size)
    while todo.size:
        cand = scale * _positive_stable(a, rng, todo.size)
        keep = rng.uniform(size=todo.size) < np.exp(-theta * cand)
        s[todo[keep]] = cand[keep]
        todo = todo[~keep]
    z = rng.standard_normal(size if d == 1 else (size, d))
    root = np.sqrt(2.0 * s)
    return root * z if d == 1 else root[:, None] * z


def simulate_path(model: LevyModel, x0, t: float, cfg: McConfig, rng: np.random.Generator) -> np.ndarray:
    """Skeleton X_0 = x0, X_dt, ..., X_t, shape (steps+1,) or (steps+1, d)."""
    if not t > 0:
        raise ValueError("t must be positive")
    n = _n_steps(t, cfg.dt)
    dt = t / n
    inc = sample_increment(model, dt, rng, n, cfg.epsilon, cfg.small_jumps)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if model.d == 1:
        return np.concatenate([[x0[0]], x0[0] + np.cumsum(inc)])
    return np.vstack([x0, x0 + np.cumsum(inc, axis=0)])


def _n_steps(t: float, dt: float) -> int:
    n = max(1, int(round(t / dt)))
    if abs(n * dt - t) > 1e-9 * t:
        raise ValueError(f"t = {t} is not a whole number of steps of size {dt}")
    return n


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def _block_values(model, pots, x0, t, cfg, block, count):
    """exp(-t * time-average of V) per path for each potential, one block."""
    rng = block_rng(cfg.seed, block)
    n = _n_steps(t, cfg.dt)
    dt = t / n
    d = model.d
    pos = np.repeat(x0[None, :], count, axis=0) if d > 1 else np.full(count, x0[0])
    first = [np.asarray(p(pos), dtype=float) for p in pots]
    acc = [np.zeros(count) for _ in pots]
    for k in range(1, n):
        pos = pos + sample_increment(model, dt, rng, count, cfg.epsilon, cfg.small_jumps)
        for j, p in enumerate(pots):
            acc[j] += np.asarray(p(pos), dtype=float) - first[j]
    # left-endpoint rule written as t * (V_0 + mean of (V_k - V_0)), exact for constant V
    return np.stack([np.exp(-t * (f + a / n)) for f, a in zip(first, acc)])


def fk_estimate_many(
    model: LevyModel, pots: Sequence[Potential], x0, t: float, cfg: McConfig
) -> list:
    """Estimates for several potentials on common random paths."""
    if not t > 0:
        raise ValueError("t must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (model.d,):
        raise ValueError(f"x0 must have {model.d} coordinates")
    for p in pots:
        if p.d != model.d:
            raise ValueError("potential and model dimensions differ")
    nblocks = -(-cfg.n_paths // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, cfg.n_paths - b * BLOCK_SIZE) for b in range(nblocks)]
    job = lambda b: _block_values(model, pots, x0, t, cfg, b, sizes[b])
    if cfg.workers == 1:
        parts = [job(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(job, range(nblocks)))
    vals = np.concatenate(parts, axis=1)
    out = []
    for j, p in enumerate(pots):
        v = vals[j]
        ref = v[0]
        dev = v - ref
        mean = ref + float(np.sum(dev)) / v.size
        if v.size > 1:
            stderr = math.sqrt(float(np.sum((v - mean) ** 2)) / (v.size * (v.size - 1)))
        else:
            stderr = 0.0
        if np.all(dev == 0):
            mean, stderr = float(ref), 0.0
        out.append(
            McEstimate(float(mean), stderr, int(v.size), cfg, model.name, _pot_label(p), tuple(map(float, x0)), float(t))
        )
    return out


def fk_estimate(model: LevyModel, pot: Potential, x0, t: float, cfg: McConfig) -> McEstimate:
    return fk_estimate_many(model, [pot], x0, t, cfg)[0]


def _pot_label(p: Potential) -> str:
    return p.label or json.dumps(p.describe(), sort_keys=True)


def config_dict(cfg: McConfig) -> dict:
    return asdict(cfg)


def sample_endpoints(model: LevyModel, t: float, cfg: McConfig, x0=None) -> np.ndarray:
    """X_t for ``cfg.n_paths`` paths, built from the dt-skeleton in fixed RNG blocks."""
    if not t > 0:
        raise ValueError("t must be positive")
    n = _n_steps(t, cfg.dt)
    dt = t / n
    d = model.d
    x0 = np.zeros(d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    nblocks = -(-cfg.n_paths // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, cfg.n_paths - b * BLOCK_SIZE) for b in range(nblocks)]

    def job(b):
        rng = block_rng(cfg.seed, b)
        pos = np.zeros((sizes[b], d)) if d > 1 else np.zeros(sizes[b])
        for _ in range(n):
            pos = pos + sample_increment(model, dt, rng, sizes[b], cfg.epsilon, cfg.small_jumps)
        return pos

    if cfg.workers == 1:
        parts = [job(b) for b in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(job, range(nblocks)))
    out = np.concatenate(parts, axis=0)
    return out + (x0 if d > 1 else x0[0])
