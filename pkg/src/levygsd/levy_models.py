"""Symmetric jump Levy processes: profiles, symbols, catalog, structural checks.

A model couples a characteristic exponent ``psi`` (the symbol) with a radial
jump profile ``g``.  By convention the Levy density reported by
:func:`eval_density` is ``g(|x|)`` itself (unit comparability constant); the
symbol, heat kernels and path samplers use the exact density of the process,
which may differ from ``g`` by a bounded factor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, interpolate, special

from .errors import IntegrabilityUndetermined, QuadratureError

TAIL_FAMILIES = ("polynomial", "stretched_exponential", "exponential", "gaussian_tail")


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def stable_density_constant(alpha: float, d: int = 1) -> float:
    """Constant C with |xi|^alpha = int (1 - cos xi.z) C |z|^(-d-alpha) dz."""
    return (
        alpha
        * 2.0 ** (alpha - 1)
        * math.gamma((d + alpha) / 2)
        / (math.pi ** (d / 2) * math.gamma(1 - alpha / 2))
    )


# ---------------------------------------------------------------------------
# Jump profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpProfile:
    """Radial profile g with g(r) = r^(-d-alpha) on (0, 1] and a tail family on [1, inf).

    Tail families (r >= 1):

    * ``polynomial``: ``r^(-d-gamma)``
    * ``stretched_exponential``: ``exp(c/log 3 - c r^beta / log(2+r))``
    * ``exponential``: ``exp(c - c r) r^(-gamma)``, requires gamma > (d+1)/2
    * ``gaussian_tail``: ``exp(-r^2)``; fails the jump-paring property and is
      kept only as a counterexample.
    """

    alpha: float
    tail: str
    d: int = 1
    gamma: Optional[float] = None
    c: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValueError(f"small-scale index alpha must lie in (0,2), got {self.alpha}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.tail not in TAIL_FAMILIES:
            raise ValueError(f"unknown tail family {self.tail!r}")
        if self.tail == "polynomial":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("polynomial tail needs gamma > 0")
        elif self.tail == "stretched_exponential":
            if self.c is None or self.c <= 0 or self.beta is None or not 0 < self.beta <= 1:
                raise ValueError("stretched-exponential tail needs c > 0 and beta in (0,1]")
        elif self.tail == "exponential":
            if self.c is None or self.c <= 0:
                raise ValueError("exponential tail needs c > 0")
            if self.gamma is None or self.gamma <= (self.d + 1) / 2:
                raise ValueError("exponential tail needs gamma > (d+1)/2")

    def log_g(self, r):
        """Natural log of the profile, vectorised over r > 0."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            lr = np.log(r)
        small = -(self.d + self.alpha) * lr
        if self.tail == "polynomial":
            large = -(self.d + self.gamma) * lr
        elif self.tail == "stretched_exponential":
            large = self.c / math.log(3.0) - self.c * r**self.beta / np.log(2.0 + r)
        elif self.tail == "exponential":
            large = self.c - self.c * r - self.gamma * lr
        else:
            large = -(r**2)
        return np.where(r <= 1.0, small, large)

    def __call__(self, r):
        out = np.exp(self.log_g(r))
        return float(out) if np.ndim(out) == 0 else out

    def tail_growth_order(self) -> tuple[float, float, float]:
        """Exponents (a, b, c) with |log g(r)| comparable to r^a (log r)^b (log log r)^c."""
        if self.tail == "polynomial":
            return (0.0, 1.0, 0.0)
        if self.tail == "stretched_exponential":
            return (float(self.beta), -1.0, 0.0)
        if self.tail == "exponential":
            return (1.0, 0.0, 0.0)
        return (2.0, 0.0, 0.0)

    @property
    def admissible(self) -> bool:
        """Whether the family is known to satisfy the jump-paring property."""
        return self.tail != "gaussian_tail"


@dataclass(frozen=True)
class PowerDensity:
    """n(r) = scale * r^(-exponent)."""

    scale: float
    exponent: float

    def __call__(self, r):
        return self.scale * r ** (-self.exponent)


@dataclass(frozen=True)
class TemperedDensity:
    """n(r) = exp(-c r) r^(-exponent)."""

    c: float
    exponent: float

    def __call__(self, r):
        return np.exp(-self.c * r) * r ** (-self.exponent)


# ---------------------------------------------------------------------------
# Symbols
# ---------------------------------------------------------------------------


class _TabulatedMarginal:
    """Spline interpolant of log(marginal) against log|s|, see LevySymbol._marginal."""

    def __init__(self, lo, hi, s_min, s_max, heavy):
        self.lo, self.hi = lo, hi
        self.s_min, self.s_max, self.heavy = s_min, s_max, heavy
        self.slope_lo = float(lo(math.log(s_min), 1))
        self.slope_hi = float(hi(math.log(s_max), 1))

    @classmethod
    def build(cls, n, d, area, r_cut, epsrel):
        def marg(s):
            # u = s v makes the integrand O(1): n(s sqrt(1 + v^2)) / n(s)
            ns = n(s)
            if not ns > 0:
                return 0.0
            f = lambda v: n(s * math.sqrt(1.0 + v * v)) / ns * v ** (d - 2)
            # the integrand lives on v = O(1) but the kink at |z| = 1 can sit far out, so split by decades
            top = math.sqrt(1.0 / (s * s) - 1.0) if s < 1.0 else 0.0
            pts = [0.0] + [10.0**k for k in range(int(math.log10(top)) + 1) if 10.0**k < top] if top > 1.0 else [0.0]
            pts = pts + ([top] if top > 0.0 else []) + [np.inf]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                # pieces that underflow can come back as tiny negative numbers
                tot = sum(
                    max(integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=400)[0], 0.0)
                    for a, b in zip(pts[:-1], pts[1:])
                )
            return area * ns * s ** (d - 1) * tot

        heavy = r_cut is None
        s_max = 1e8 if heavy else float(r_cut)
        near = np.geomspace(1e-9, 0.5, 120)
        s_lo = np.unique(np.concatenate([np.geomspace(1e-6, 0.5, 400), 1.0 - near]))
        s_hi = np.unique(np.concatenate([1.0 + near, np.geomspace(1.5, s_max, 60 * int(math.log10(s_max) + 1))]))
        s_lo = np.append(s_lo, 1.0)
        s_hi = np.insert(s_hi, 0, 1.0)
        vals_lo = np.array([marg(x) for x in s_lo])
        vals_hi = np.array([marg(x) for x in s_hi])
        keep = vals_hi > 0
        lo = interpolate.CubicSpline(np.log(s_lo), np.log(vals_lo))
        hi = interpolate.CubicSpline(np.log(s_hi[keep]), np.log(vals_hi[keep]))
        return cls(lo, hi, float(s_lo[0]), float(s_hi[keep][-1]), heavy)

    def __call__(self, s):
        s = float(s)
        if s <= 0:
            return math.inf
        u = math.log(s)
        if s < self.s_min:
            return math.exp(float(self.lo(math.log(self.s_min))) + self.slope_lo * (u - math.log(self.s_min)))
        if s <= 1.0:
            return math.exp(float(self.lo(u)))
        if s <= self.s_max:
            return math.exp(float(self.hi(u)))
        if not self.heavy:
            return 0.0
        return math.exp(float(self.hi(math.log(self.s_max))) + self.slope_hi * (u - math.log(self.s_max)))


@lru_cache(maxsize=32)
def _marginal_table(symbol) -> _TabulatedMarginal:
    # the marginal decays like n(s) s^(d-1), so its tail is cut on that profile
    n, d = symbol.density, symbol.d
    r_cut = symbol._tail_cut(lambda r: n(r) * r ** (d - 1))
    return _TabulatedMarginal.build(n, d, sphere_area(d - 1), r_cut, symbol.quad.epsrel)


@dataclass(frozen=True)
class QuadratureSpec:
    epsabs: float = 1e-13
    epsrel: float = 1e-11
    limit: int = 400
    tail_cut: float = 1e-16  # relative to the density at r = 1
    accept: float = 1e-8  # largest accepted error estimate, relative to max(1, |value|)


CLOSED_FORMS = ("stable", "relativistic", "jump_diffusion", "geometric_stable", "tempered", "none")


@dataclass(frozen=True)
class LevySymbol:
    """Characteristic exponent psi(xi) = a|xi|^2 + int (1 - cos xi.z) n(|z|) dz.

    ``kind`` selects a closed form; ``density`` is the exact radial Levy
    density n used by the quadrature route (``None`` for pure diffusion or
    when only the closed form is known).
    """

    kind: str = "none"
    d: int = 1
    a: float = 0.0
    alpha: Optional[float] = None
    m: Optional[float] = None
    c: Optional[float] = None
    density: Optional[Callable] = None
    quad: QuadratureSpec = QuadratureSpec()
    label: str = ""

    def __post_init__(self):
        if self.kind not in CLOSED_FORMS:
            raise ValueError(f"unknown closed-form tag {self.kind!r}")
        if self.a < 0:
            raise ValueError("diffusion coefficient must be non-negative")

    @property
    def has_closed_form(self) -> bool:
        if self.kind == "tempered":
            return self.d == 1
        return self.kind != "none"

    def radial(self, rho, method: str = "auto"):
        """psi as a function of |xi|, vectorised."""
        rho = np.abs(np.asarray(rho, dtype=float))
        use_closed = method == "closed" or (method == "auto" and self.has_closed_form)
        if use_closed:
            if not self.has_closed_form:
                raise ValueError(f"no closed form for {self.kind!r} in d={self.d}")
            out = self._closed(rho)
        else:
            if self.density is None and self.kind != "none":
                raise ValueError(f"{self.kind!r} symbol has no density for quadrature")
            jump = np.vectorize(self._lk_integral, otypes=[float])(rho) if self.density else 0.0
            out = self.a * rho**2 + jump
        return float(out) if np.ndim(out) == 0 else out

    def __call__(self, xi, method: str = "auto"):
        xi = np.asarray(xi, dtype=float)
        if self.d == 1 or xi.ndim == 0:
            rho = np.abs(xi)
        else:
            rho = np.linalg.norm(xi, axis=-1)
        return self.radial(rho, method=method)

    def _closed(self, rho):
        al = self.alpha
        if self.kind == "stable":
            return self.a * rho**2 + rho**al
        if self.kind == "jump_diffusion":
            return self.a * rho**2 + rho**al
        if self.kind == "relativistic":
            return self.a * rho**2 + (rho**2 + self.m ** (2 / al)) ** (al / 2) - self.m
        if self.kind == "geometric_stable":
            return self.a * rho**2 + np.log1p(rho**al)
        if self.kind == "tempered":
            c = self.c
            if abs(al - 1.0) < 1e-12:
                jump = 2.0 * (rho * np.arctan(rho / c) - 0.5 * c * np.log1p((rho / c) ** 2))
            else:
                mod = (c * c + rho * rho) ** (al / 2) * np.cos(al * np.arctan(rho / c))
                jump = -2.0 * special.gamma(-al) * (mod - c**al)
            return self.a * rho**2 + jump
        return self.a * rho**2

    def _check(self, res, what):
        val, err = res[0], res[1]
        q = self.quad
        if not np.isfinite(val) or err > q.accept * max(1.0, abs(val)):
            raise QuadratureError(f"Levy-Khintchin quadrature failed on {what}", err)
        return val

    def _tail_cut(self, n=None):
        """Radius beyond which the density is negligible, or None for heavy tails."""
        n = n or self.density
        n1 = n(1.0)
        r = 2.0
        while r < 1e6:
            if n(r) * r <= self.quad.tail_cut * n1:
                return r
            r *= 2.0
        return None

    def _lk_1d(self, rho: float, n: Callable, r_cut: Optional[float]) -> float:
        """2 int_0^inf (1 - cos rho r) n(r) dr for a density n on the half line."""
        q = self.quad
        kw = dict(epsabs=q.epsabs, epsrel=q.epsrel, limit=q.limit)
        pieces = []
        # beyond u = 700 the integrand of any density with finite tail mass is below 1e-150
        in_log = lambda u: n(math.exp(u)) * math.exp(u) if u < 700.0 else 0.0
        log_mass = lambda lo, hi: integrate.quad(in_log, lo, hi, **kw)
        # 1 - cos written as 2 sin^2 keeps the small-argument cancellation exact
        smooth = lambda r: 2.0 * math.sin(rho * r / 2) ** 2 * n(r)
        split = min(1.0, 1.0 / rho)
        pieces.append(integrate.quad(smooth, 0.0, split, **kw))
        if split < 1.0:
            # mass in log r, the cosine part with an oscillatory weight
            pieces.append(log_mass(math.log(split), 0.0))
            cos_mid = integrate.quad(n, split, 1.0, weight="cos", wvar=rho, **kw)
            pieces.append((-cos_mid[0], cos_mid[1]))
        top = 50.0 / rho
        if r_cut is not None:
            top = min(top, r_cut)
        top = max(top, 1.0)
        if top > 1.0:
            pieces.append(integrate.quad(smooth, 1.0, top, **kw))
        if r_cut is None or top < r_cut:
            pieces.append(log_mass(math.log(top), np.inf if r_cut is None else math.log(r_cut)))
            if r_cut is None:
                cos_far = integrate.quad(
                    n, top, np.inf, weight="cos", wvar=rho, epsabs=q.epsabs, limlst=200, limit=q.limit
                )
            else:
                # one oscillatory panel per doubling of the radius
                edges = np.unique(np.concatenate([[top], top * 2.0 ** np.arange(1, 64), [r_cut]]))
                edges = edges[edges <= r_cut]
                panels = [
                    integrate.quad(n, lo, hi, weight="cos", wvar=rho, **kw) for lo, hi in zip(edges[:-1], edges[1:])
                ]
                cos_far = (sum(p[0] for p in panels), sum(p[1] for p in panels))
            pieces.append((-cos_far[0], cos_far[1]))
        val = sum(p[0] for p in pieces)
        err = sum(p[1] for p in pieces)
        return 2.0 * self._check((val, err), "the radial integral")

    def _marginal(self) -> Callable:
        """Density of the first coordinate of the Levy measure, as a function of |s|.

        Power laws have a closed-form power-law marginal.  Other densities are
        integrated over the remaining d - 1 coordinates on a table of |s|
        (clustered at the profile's kink s = 1) and interpolated by cubic
        splines in log-log coordinates, with power-law extension at both ends.
        """
        n = self.density
        d = self.d
        area = sphere_area(d - 1)
        if isinstance(n, PowerDensity):
            k = n.exponent
            b = special.beta((d - 1) / 2, (k - d + 1) / 2)
            return PowerDensity(n.scale * area * b / 2, k - d + 1)
        return _marginal_table(self)

    def _lk_integral(self, rho: float) -> float:
        if rho == 0.0:
            return 0.0
        n = self.density
        d = self.d
        q = self.quad
        kw = dict(epsabs=q.epsabs, epsrel=q.epsrel, limit=q.limit)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            if d == 1:
                return self._lk_1d(rho, n, self._tail_cut())
            # the radial mass n(r) r^(d-1) decides where the shell integral can stop
            r_cut = self._tail_cut(lambda r: n(r) * r ** (d - 1))
            if r_cut is None or isinstance(n, PowerDensity):
                # psi depends only on the one-dimensional marginal, which is
                # heavy-tailed here (and a closed form for power laws)
                return self._lk_1d(rho, self._marginal(), None)
            nu = d / 2 - 1

            def one_minus_avg(s):
                if s < 1e-3:
                    return s * s / (2 * d) - s**4 / (8 * d * (d + 2))
                return 1.0 - math.gamma(d / 2) * (2.0 / s) ** nu * special.jv(nu, s)

            split = min(1.0, 1.0 / rho)
            f = lambda r: one_minus_avg(rho * r) * n(r) * r ** (d - 1)
            total = self._check(integrate.quad(f, 0.0, split, **kw), "inner ball")
            try:
                total += self._check(
                    integrate.quad(f, split, r_cut, epsabs=q.epsabs, epsrel=q.epsrel, limit=20 * q.limit),
                    "outer shell",
                )
            except QuadratureError:
                # the Bessel average oscillates too long; fall back to the marginal
                return self._lk_1d(rho, self._marginal(), r_cut)
            return sphere_area(d) * total


# ---------------------------------------------------------------------------
# Models and catalog
# ---------------------------------------------------------------------------

SAMPLERS = ("gaussian", "stable", "jump_diffusion", "relativistic", "geometric_stable", "compound_poisson")


@dataclass(frozen=True)
class LevyModel:
    name: str
    d: int
    symbol: LevySymbol
    profile: Optional[JumpProfile]
    sampler: str
    params: tuple = ()
    density_constant: float = 1.0

    def __post_init__(self):
        if self.symbol.d != self.d or (self.profile is not None and self.profile.d != self.d):
            raise ValueError("symbol, profile and model must share the dimension")
        if self.profile is not None and self.symbol.alpha is not None:
            if abs(self.profile.alpha - self.symbol.alpha) > 1e-12 and self.symbol.kind != "none":
                raise ValueError("symbol and profile disagree on alpha")
        if self.symbol.kind == "stable":
            if self.profile is None or self.profile.tail != "polynomial" or self.profile.gamma != self.symbol.alpha:
                raise ValueError("stable symbol requires a polynomial profile with gamma = alpha")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")

    @property
    def has_jumps(self) -> bool:
        return self.profile is not None

    @property
    def exact_stable(self) -> bool:
        return self.sampler in ("stable", "jump_diffusion")

    @property
    def compound_poisson(self) -> bool:
        return self.sampler == "compound_poisson"

    @cached_property
    def levy_density(self) -> Optional[Callable]:
        """Exact radial Levy density of the process (None for pure diffusion)."""
        return self.symbol.density

    def describe(self) -> dict:
        out = {"model": self.name, "d": self.d}
        out.update(dict(self.params))
        return out


CATALOG = {
    "stable": {"alpha": 1.0},
    "relativistic": {"alpha": 1.0, "m": 1.0},
    "tempered": {"alpha": 1.0, "c": 1.0},
    "geometric-stable": {"alpha": 1.0},
    "jump-diffusion": {"alpha": 1.0, "a": 1.0},
    "layered": {"alpha": 1.0, "gamma": 3.0},
    "stretched-exp": {"alpha": 1.0, "c": 1.0, "beta": 0.5},
    "gaussian-tail-counterexample": {"alpha": 1.0},
    "brownian": {"a": 1.0},
}


def make_model(name: str, d: int = 1, **params) -> LevyModel:
    """Build a catalog model from its identifier and numeric parameters."""
    if name not in CATALOG:
        raise KeyError(f"unknown model id {name!r}; known ids: {', '.join(CATALOG)}")
    unknown = set(params) - set(CATALOG[name])
    if unknown:
        raise ValueError(f"model {name!r} does not take parameters {sorted(unknown)}")
    p = {**CATALOG[name], **{k: float(v) for k, v in params.items()}}
    frozen = tuple(sorted(p.items()))

    if name == "brownian":
        sym = LevySymbol("none", d=d, a=p["a"], label=name)
        return LevyModel(name, d, sym, None, "gaussian", frozen)

    al = p["alpha"]
    if name in ("stable", "jump-diffusion"):
        prof = JumpProfile(al, "polynomial", d, gamma=al)
        const = stable_density_constant(al, d)
        dens = PowerDensity(const, d + al)
        if name == "stable":
            sym = LevySymbol("stable", d=d, alpha=al, density=dens, label=name)
            return LevyModel(name, d, sym, prof, "stable", frozen, const)
        sym = LevySymbol("jump_diffusion", d=d, a=p["a"], alpha=al, density=dens, label=name)
        return LevyModel(name, d, sym, prof, "jump_diffusion", frozen, const)
    if name == "relativistic":
        prof = JumpProfile(al, "exponential", d, gamma=(d + al + 1) / 2, c=p["m"] ** (1 / al))
        sym = LevySymbol("relativistic", d=d, alpha=al, m=p["m"], label=name)
        return LevyModel(name, d, sym, prof, "relativistic", frozen)
    if name == "tempered":
        prof = JumpProfile(al, "exponential", d, gamma=d + al, c=p["c"])
        dens = TemperedDensity(p["c"], d + al)
        sym = LevySymbol("tempered", d=d, alpha=al, c=p["c"], density=dens, label=name)
        return LevyModel(name, d, sym, prof, "compound_poisson", frozen)
    if name == "geometric-stable":
        prof = JumpProfile(al, "polynomial", d, gamma=al)
        sym = LevySymbol("geometric_stable", d=d, alpha=al, label=name)
        return LevyModel(name, d, sym, prof, "geometric_stable", frozen)
    if name == "layered":
        if p["gamma"] <= 2:
            raise ValueError("layered stable process needs gamma > 2")
        prof = JumpProfile(al, "polynomial", d, gamma=p["gamma"])
    elif name == "stretched-exp":
        prof = JumpProfile(al, "stretched_exponential", d, c=p["c"], beta=p["beta"])
    else:
        prof = JumpProfile(al, "gaussian_tail", d)
    sym = LevySymbol("none", d=d, alpha=al, density=prof, label=name)
    return LevyModel(name, d, sym, prof, "compound_poisson", frozen)


def model_from_profile(profile: JumpProfile, a: float = 0.0) -> LevyModel:
    """Model whose exact Levy density equals the profile; symbol by quadrature."""
    sym = LevySymbol("none", d=profile.d, a=a, alpha=profile.alpha, density=profile, label=f"profile:{profile.tail}")
    params = tuple(sorted((k, v) for k, v in vars(profile).items() if isinstance(v, float)))
    return LevyModel(f"profile-{profile.tail}", profile.d, sym, profile, "compound_poisson", params)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def eval_symbol(model: LevyModel, xi, method: str = "auto") -> float:
    return model.symbol(xi, method=method)


def eval_density(model_or_profile, x) -> float:
    """nu(x) = g(|x|) under the unit-constant convention; rejects x = 0."""
    prof = model_or_profile.profile if isinstance(model_or_profile, LevyModel) else model_or_profile
    if prof is None:
        raise ValueError("model has no jump part")
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(x, dtype=float))))
    if r == 0.0:
        raise ValueError("Levy density is singular at the origin")
    return prof(r)


def _paring_integral_1d(profile: JumpProfile, x: float, log_gx: float) -> float:
    lg = profile.log_g

    def f(y):
        return math.exp(float(lg(abs(x - y))) + float(lg(abs(y))) - log_gx)

    kw = dict(epsabs=0.0, epsrel=1e-10, limit=500)
    pieces = [(-np.inf, -1.0), (x + 1.0, np.inf)]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in pieces:
            val, err = integrate.quad(f, lo, hi, **kw)
            total += val
        if x - 1.0 > 1.0:
            val, err = integrate.quad(f, 1.0, x - 1.0, points=[x / 2], **kw)
            if err > 1e-6 * abs(val) + 1e-300:
                raise QuadratureError("jump-paring convolution did not converge", err)
            total += val
    return total


def _paring_integral_nd(profile: JumpProfile, x: float, log_gx: float) -> float:
    d = profile.d
    lg = profile.log_g
    w = sphere_area(d - 1) if d > 2 else 2.0

    def f(theta, r):
        s = math.sqrt(max(r * r + x * x - 2 * r * x * math.cos(theta), 0.0))
        if s <= 1.0:
            return 0.0
        return math.exp(float(lg(s)) + float(lg(r)) - log_gx) * r ** (d - 1) * math.sin(theta) ** (d - 2)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.dblquad(f, 1.0, np.inf, 0.0, math.pi, epsabs=0.0, epsrel=1e-7)
    return w * val


def jump_paring_ratio(profile: JumpProfile, x_values) -> list[tuple[float, float]]:
    """Ratios I(x)/g(|x|) with I(x) = int_{|x-y|>1,|y|>1} g(|x-y|) g(|y|) dy.

    The integrand is evaluated relative to g(|x|) in log space, so rapidly
    decaying profiles give an overflowing (infinite) ratio rather than 0/0.
    """
    out = []
    for x in x_values:
        x = float(x)
        if x < 2.0:
            raise ValueError(f"jump-paring radii must be >= 2, got {x}")
        log_gx = float(profile.log_g(x))
        with np.errstate(over="ignore"):
            try:
                if profile.d == 1:
                    ratio = _paring_integral_1d(profile, x, log_gx)
                else:
                    ratio = _paring_integral_nd(profile, x, log_gx)
            except OverflowError:
                ratio = math.inf
        out.append((x, ratio))
    return out


def paring_diverges(ratios) -> tuple[bool, Optional[float]]:
    """Divergence heuristic: growth > 10x per radius doubling on two consecutive intervals.

    Returns (diverged, radius at which divergence was declared).
    """
    hits = 0
    for (r0, q0), (r1, q1) in zip(ratios, ratios[1:]):
        if not math.isfinite(q1) or q0 <= 0:
            per_doubling = math.inf
        else:
            per_doubling = (q1 / q0) ** (1.0 / math.log2(r1 / r0))
        hits = hits + 1 if per_doubling > 10.0 else 0
        if hits >= 2:
            return True, r1
    return False, None


def jump_paring_check(profile: JumpProfile, radii=(2, 5, 10, 20, 50)):
    """Return (passes, ratios) for the jump-paring property on sampled radii."""
    ratios = jump_paring_ratio(profile, radii)
    diverged, _ = paring_diverges(ratios)
    return (not diverged and all(math.isfinite(q) for _, q in ratios)), ratios


def comparability_check(profile: JumpProfile, radii=None):
    """Whether g(r)/g(r+1) stays in a bounded band over the sampled radii.

    A band counts as bounded when the largest ratio over the upper half of the
    radii is at most twice the largest over the lower half (no growth trend).
    Returns (passed, (min_ratio, max_ratio)).
    """
    if radii is None:
        radii = np.geomspace(1.0, 100.0, 60)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii < 1.0):
        raise ValueError("comparability radii must be >= 1")
    with np.errstate(over="ignore"):
        ratios = np.exp(profile.log_g(radii) - profile.log_g(radii + 1.0))
    half = len(ratios) // 2
    lo, hi = ratios[: max(half, 1)], ratios[half:]
    passed = bool(np.all(np.isfinite(ratios)) and hi.max() <= 2.0 * lo.max())
    return passed, (float(ratios.min()), float(ratios.max()))


# ---------------------------------------------------------------------------
# Heat-kernel integrability
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _decade_table(symbol: LevySymbol, first: int, last: int):
    """psi and radial Jacobian on Gauss-Legendre nodes in log|xi|, one row per decade."""
    rows = []
    for j in range(first, last):
        lo, hi = j * math.log(10), (j + 1) * math.log(10)
        u = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
        rho = np.exp(u)
        rows.append((symbol.radial(rho), u, 0.5 * (hi - lo) * _GL_WEIGHTS))
    return rows


def _integrability_verdict(table, t: float, d: int) -> str:
    logs = []
    for psi, u, w in table:
        expo = -t * psi + d * u
        top = expo.max()
        logs.append(top + math.log(np.sum(w * np.exp(expo - top))))
    logs = np.array(logs)
    ratios = np.exp(np.diff(logs))
    last = ratios[-2:]
    if np.all(last < 1.0):
        return "finite"
    if np.all(last >= 1.0):
        return "divergent"
    return "inconclusive"


def minimal_integrability_time(symbol: LevySymbol, tol: float = 1e-3, max_decade: Optional[int] = None) -> float:
    """Estimate t_b = inf{t : int exp(-t psi) dxi < inf} by bisection.

    Each probe integrates exp(-t psi) over decade shells |xi| in [10^j, 10^(j+1)],
    j >= 2, and calls the integral divergent when the shell contributions stop
    decaying geometrically.  Returns 0 when the probe at t = tol already
    converges.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_decade is None:
        max_decade = 15 if symbol.has_closed_form else 8
    table = _decade_table(symbol, 2, max_decade)
    d = symbol.d
    with np.errstate(over="ignore", under="ignore"):
        first = _integrability_verdict(table, tol, d)
        if first == "finite":
            return 0.0
        if first == "inconclusive":
            raise IntegrabilityUndetermined(f"divergence test inconclusive at t={tol}")
        hi = 1.0
        while _integrability_verdict(table, hi, d) != "finite":
            hi *= 2.0
            if hi > 1e4:
                raise IntegrabilityUndetermined("no integrable time found below 1e4")
        lo = tol
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            v = _integrability_verdict(table, mid, d)
            if v == "inconclusive":
                raise IntegrabilityUndetermined(f"divergence test inconclusive at t={mid}")
            if v == "finite":
                hi = mid
            else:
                lo = mid
    return 0.5 * (lo + hi)
