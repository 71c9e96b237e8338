"""Confining potentials and the growth-order contractivity classifier.

Family potentials are radial, ``V(x) = scale * f(|x|)`` with

    f(r) = (1+r)^d1 [log(2+r)]^d2 [log(2+log(2+r))]^d3,

so their growth at infinity is summarised by the exponent triple
``(d1, d2, d3)``.  The tails of the catalog jump profiles have ``|log g|``
of the same shape, and the classifier compares the two triples
lexicographically instead of taking numerical limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .levy_models import LevyModel, comparability_check, jump_paring_check

FAMILIES = ("power_log_loglog", "quadratic", "custom")
TAGS = ("tends_to_infinity", "bounded_below_positive", "tends_to_zero", "oscillates_unknown")

# radii used for sampled probes (witness constants, confinement along rays)
_WITNESS_RADII = np.geomspace(10.0, 1e6, 41)
_RAY_RADII = 10.0 ** np.arange(1, 13)


@dataclass(frozen=True)
class Potential:
    """Radial family potential or a user supplied evaluator.

    Parameters
    ----------
    family : {"power_log_loglog", "quadratic", "custom"}
    d1, d2, d3 : float
        Exponents of the power-log-loglog family.
    scale : float
        Positive multiplier.
    d : int
        Dimension of the points the potential is evaluated at.
    evaluator : callable, optional
        For ``custom``: maps an array of points (shape ``(..., d)``, or
        ``(...)`` when d = 1) to values.
    growth : tuple, optional
        Declared growth triple of a custom potential.  Without it the
        classifier reports ``oscillates_unknown``.
    locally_bounded : bool
        Declared for custom potentials; family potentials are continuous.
    """

    family: str = "power_log_loglog"
    d1: float = 0.0
    d2: float = 0.0
    d3: float = 0.0
    scale: float = 1.0
    d: int = 1
    evaluator: Optional[Callable] = field(default=None, compare=False)
    growth: Optional[tuple] = None
    locally_bounded: bool = True
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.family == "custom":
            if self.evaluator is None:
                raise ValueError("custom potential needs an evaluator")
            if self.growth is not None and len(self.growth) != 3:
                raise ValueError("declared growth must be a triple")
        elif self.evaluator is not None:
            raise ValueError("only custom potentials take an evaluator")

    @property
    def is_family(self) -> bool:
        return self.family != "custom"

    def radial(self, r):
        """f(r) times the scale, for family potentials."""
        if not self.is_family:
            raise ValueError("custom potentials have no radial form")
        r = np.asarray(r, dtype=float)
        if self.family == "quadratic":
            out = self.scale * r**2
        else:
            out = self.scale * (1.0 + r) ** self.d1
            if self.d2:
                out = out * np.log(2.0 + r) ** self.d2
            if self.d3:
                out = out * np.log(2.0 + np.log(2.0 + r)) ** self.d3
        return float(out) if np.ndim(out) == 0 else out

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "custom":
            out = np.asarray(self.evaluator(x), dtype=float)
            return float(out) if out.ndim == 0 else out
        r = np.abs(x) if self.d == 1 else np.linalg.norm(x, axis=-1)
        return self.radial(r)

    def growth_order(self) -> Optional[tuple]:
        """Exponent triple of V at infinity, or None when unknown."""
        if self.family == "quadratic":
            return (2.0, 0.0, 0.0)
        if self.family == "power_log_loglog":
            return (float(self.d1), float(self.d2), float(self.d3))
        return None if self.growth is None else tuple(float(g) for g in self.growth)

    @property
    def confining(self) -> Optional[bool]:
        """V -> inf at infinity, decided from the growth triple when known."""
        g = self.growth_order()
        return None if g is None else _lex_cmp(g, (0.0, 0.0, 0.0)) > 0

    def describe(self) -> dict:
        out = {"family": self.family, "scale": self.scale, "d": self.d}
        if self.family == "power_log_loglog":
            out.update(d1=self.d1, d2=self.d2, d3=self.d3)
        if self.label:
            out["label"] = self.label
        if self.growth is not None:
            out["growth"] = list(self.growth)
        return out


def power_log_loglog(d1=0.0, d2=0.0, d3=0.0, scale=1.0, d=1) -> Potential:
    return Potential("power_log_loglog", d1, d2, d3, scale=scale, d=d)


def quadratic(scale=1.0, d=1) -> Potential:
    return Potential("quadratic", scale=scale, d=d)


def constant(c: float = 0.0, d: int = 1) -> Potential:
    """V = c everywhere (a custom potential with declared flat growth)."""

    def ev(x, c=float(c), d=d):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape if d == 1 else x.shape[:-1], c)

    return Potential("custom", d=d, evaluator=ev, growth=(0.0, 0.0, 0.0), label=f"constant {c:g}")


def custom(evaluator, d=1, growth=None, locally_bounded=True, label="") -> Potential:
    return Potential("custom", d=d, evaluator=evaluator, growth=growth, locally_bounded=locally_bounded, label=label)


def potential_from_config(cfg: dict, d: int = 1) -> Potential:
    """Build a potential from a mapping such as ``{family = "power-log-loglog", d1 = 2}``.

    Families: ``power-log-loglog`` (d1, d2, d3, scale), ``quadratic`` (scale)
    and ``constant`` (c).
    """
    cfg = dict(cfg)
    fam = str(cfg.pop("family", "power_log_loglog")).replace("-", "_")
    if fam == "constant":
        pot = constant(float(cfg.pop("c", 0.0)), d)
        if cfg:
            raise ValueError(f"unknown potential keys: {sorted(cfg)}")
        return pot
    scale = float(cfg.pop("scale", 1.0))
    if fam == "quadratic":
        pot = quadratic(scale, d)
    elif fam == "power_log_loglog":
        pot = power_log_loglog(
            float(cfg.pop("d1", 0.0)), float(cfg.pop("d2", 0.0)), float(cfg.pop("d3", 0.0)), scale, d
        )
    else:
        raise ValueError(f"potential family {fam!r} cannot be built from a config")
    if cfg:
        raise ValueError(f"unknown potential keys: {sorted(cfg)}")
    return pot


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def eval_potential(pot: Potential, x) -> float:
    return pot(x)


def sup_ball(pot: Potential, x, r: float, samples: int = 513) -> float:
    """V_r*(x) = sup of V over the closed ball B(x, r), r in (0, 1].

    Family potentials are radial, so the sup runs over radii in
    ``[max(0, |x|-r), |x|+r]``; the endpoints are always included, which makes
    the result exact wherever f is monotone.  Custom potentials are sampled on
    a lattice of the ball (d <= 3).
    """
    if not 0 < r <= 1:
        raise ValueError(f"ball radius must lie in (0, 1], got {r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (pot.d,):
        raise ValueError(f"point must have {pot.d} coordinates")
    if pot.is_family:
        rad = float(np.linalg.norm(x))
        radii = np.linspace(max(0.0, rad - r), rad + r, samples)
        return float(np.max(pot.radial(radii)))
    if pot.d == 1:
        pts = x[0] + np.linspace(-r, r, samples)
        return float(np.max(pot(pts)))
    if pot.d > 3:
        raise ValueError("ball sampling is limited to d <= 3")
    m = {2: 65, 3: 17}[pot.d]
    axes = np.meshgrid(*[np.linspace(-r, r, m)] * pot.d, indexing="ij")
    offs = np.stack([a.ravel() for a in axes], axis=-1)
    offs = offs[np.linalg.norm(offs, axis=-1) <= r * (1 + 1e-12)]
    # add the boundary along the coordinate axes
    eye = np.eye(pot.d) * r
    offs = np.concatenate([offs, eye, -eye])
    return float(np.max(pot(x + offs)))


def borderline_ratio(pot: Potential, model: LevyModel, x) -> float:
    """V(x) / |log nu(x)| for |x| >= 2, with nu from :func:`eval_density`."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    rad = float(np.linalg.norm(xv))
    if rad < 2:
        raise ValueError("borderline ratio is only defined for |x| >= 2")
    if model.profile is None:
        raise ValueError("model has no jump part")
    # log of eval_density, computed directly so that deep tails do not underflow
    log_nu = float(model.profile.log_g(rad))
    if log_nu >= 0:
        raise ValueError(f"nu(x) = {math.exp(log_nu):.6g} >= 1, so |log nu| does not measure decay here")
    pt = xv if pot.d > 1 else xv[0]
    return float(pot(pt)) / -log_nu


@dataclass(frozen=True)
class ContractivityVerdict:
    """Analytic verdict on L^p-GSD / L^p-AGSD for all p in (2, inf].

    ``gsd_all_p`` is equivalent to intrinsic supercontractivity and to
    intrinsic ultracontractivity; ``agsd_all_p`` to intrinsic
    hypercontractivity and asymptotic intrinsic ultracontractivity.
    """

    gsd_all_p: Optional[bool]
    agsd_all_p: Optional[bool]
    tag: str
    witness: Optional[tuple] = None
    v_order: Optional[tuple] = None
    nu_order: Optional[tuple] = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        if self.gsd_all_p and self.agsd_all_p is False:
            raise ValueError("GSD for all p implies AGSD for all p")

    @property
    def isc(self):
        return self.gsd_all_p

    @property
    def iuc(self):
        return self.gsd_all_p

    @property
    def ihc(self):
        return self.agsd_all_p

    @property
    def aiuc(self):
        return self.agsd_all_p

    def to_dict(self) -> dict:
        return {
            "gsd_all_p": self.gsd_all_p,
            "agsd_all_p": self.agsd_all_p,
            "tag": self.tag,
            "witness": None if self.witness is None else {"C": self.witness[0], "R": self.witness[1]},
            "v_order": None if self.v_order is None else list(self.v_order),
            "nu_order": None if self.nu_order is None else list(self.nu_order),
        }


def _lex_cmp(a, b) -> int:
    for u, v in zip(a, b):
        if u > v:
            return 1
        if u < v:
            return -1
    return 0


def classify_contractivity(pot: Potential, model: LevyModel, check_assumptions: bool = True) -> ContractivityVerdict:
    """Classify by comparing the growth of V with that of |log nu| at infinity.

    Ratio -> inf gives GSD (and AGSD) for all p; a ratio bounded between
    positive constants gives AGSD only; ratio -> 0 gives neither.  Custom
    potentials without a declared growth triple get ``oscillates_unknown``.
    """
    prof = model.profile
    if prof is None:
        raise ValueError(f"model {model.name!r} has no jump profile to compare against")
    if not prof.admissible:
        raise ValueError(f"tail family {prof.tail!r} does not have the jump-paring property")
    if check_assumptions:
        ok, _ = jump_paring_check(prof)
        if not ok:
            raise ValueError("profile fails the sampled jump-paring check")
        ok, _ = comparability_check(prof)
        if not ok:
            raise ValueError("profile fails the sampled comparability check")
    v_order = pot.growth_order()
    nu_order = prof.tail_growth_order()
    if v_order is None:
        return ContractivityVerdict(None, None, "oscillates_unknown", nu_order=nu_order)
    s = _lex_cmp(v_order, nu_order)
    if s > 0:
        return ContractivityVerdict(True, True, "tends_to_infinity", v_order=v_order, nu_order=nu_order)
    if s < 0:
        return ContractivityVerdict(False, False, "tends_to_zero", v_order=v_order, nu_order=nu_order)
    return ContractivityVerdict(
        False, True, "bounded_below_positive", witness=agsd_witness(pot, model), v_order=v_order, nu_order=nu_order
    )


def agsd_witness(pot: Potential, model: LevyModel, radii=_WITNESS_RADII) -> tuple:
    """(C, R) with V(x) >= C |log nu(x)| at the sampled radii |x| >= R."""
    e = np.zeros(pot.d)
    e[0] = 1.0
    ratios = np.array([borderline_ratio(pot, model, r * e) for r in radii])
    return float(ratios.min()), float(radii[0])


def kato_confining_check(pot: Potential) -> tuple:
    """(ok, reason): locally bounded (hence local Kato class) and confining."""
    if not pot.locally_bounded:
        return False, "not locally bounded"
    if pot.is_family:
        if pot.confining:
            return True, "continuous and confining"
        return False, "not confining"
    # sample along the coordinate rays in both directions
    for k in range(pot.d):
        for sgn in (1.0, -1.0):
            pts = np.zeros((len(_RAY_RADII), pot.d))
            pts[:, k] = sgn * _RAY_RADII
            vals = np.asarray(pot(pts if pot.d > 1 else pts[:, 0]), dtype=float)
            if not np.all(np.isfinite(vals)):
                return False, "non-finite values along a ray"
            tail = vals[-4:]
            if not (np.all(np.diff(tail) > 0) and vals[-1] > vals[2] + 1.0):
                return False, "not confining along sampled rays"
    return True, "locally bounded and confining along sampled rays"
