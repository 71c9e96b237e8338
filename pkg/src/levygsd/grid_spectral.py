"""Periodic-box discretisation of H = -L + V.

Nodes are ``x_j = -R + j h`` with ``h = 2R/N`` along each axis and the
generator acts as the Fourier multiplier ``-psi(xi_k)`` on the standard
discrete frequencies.  The Feynman-Kac semigroup is approximated by Strang
splitting.  In d = 1 the free step can also be applied as a dense matrix with
non-negative entries (``mode="kernel"``): this keeps relative accuracy in the
far tail of positive fields, where FFT round-off would otherwise dominate.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import AliasingError, ConvergenceError, NumericalError, RingingError
from .levy_models import LevySymbol, minimal_integrability_time
from .potentials import Potential

ALIAS_TOL = 1e-12
RING_TOL = 1e-12
KERNEL_CLIP = 1e-14
KERNEL_MAX_N = 2048
DENSE_MAX_N = 1024


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box ``[-R, R)^d`` with N nodes per axis."""

    d: int
    R: float
    N: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if not self.R > 0:
            raise ValueError("box half-width must be positive")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.R / self.N

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates along one axis."""
        return -self.R + self.h * np.arange(self.N)

    @property
    def frequencies(self) -> np.ndarray:
        """Discrete frequencies along one axis, in FFT order.

        The set is symmetric about 0 apart from the Nyquist bin ``-pi/h``.
        """
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    @property
    def max_frequency(self) -> float:
        """Largest frequency of the symmetric part, ``(pi/h)(1 - 2/N)``."""
        return math.pi / self.h * (1.0 - 2.0 / self.N)

    @property
    def nyquist(self) -> float:
        return math.pi / self.h

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def cell(self) -> float:
        return self.h**self.d

    def points(self) -> np.ndarray:
        """Node coordinates, shape (N,) for d = 1 and (N,...,N,d) otherwise."""
        x = self.nodes
        if self.d == 1:
            return x
        return np.stack(np.meshgrid(*[x] * self.d, indexing="ij"), axis=-1)

    def radii(self) -> np.ndarray:
        p = self.points()
        return np.abs(p) if self.d == 1 else np.linalg.norm(p, axis=-1)

    def frequency_norms(self) -> np.ndarray:
        k = self.frequencies
        if self.d == 1:
            return np.abs(k)
        return np.sqrt(sum(g**2 for g in np.meshgrid(*[k] * self.d, indexing="ij")))

    def window(self, frac: float = 0.75) -> np.ndarray:
        """Mask of nodes with |x| <= frac * R (diagnostics ignore the rest)."""
        return self.radii() <= frac * self.R

    def describe(self) -> dict:
        return {"d": self.d, "R_box": self.R, "N": self.N, "h": self.h}


def make_grid(d: int, R_box: float, N: int) -> Grid:
    return Grid(int(d), float(R_box), int(N))


@dataclass(frozen=True)
class Field:
    """Real node values on a grid; the array is read-only."""

    grid: Grid
    values: np.ndarray
    kind: str = "field"
    t: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite values in {self.kind}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def l2_norm(self) -> float:
        return math.sqrt(self.grid.cell * float(np.sum(self.values**2)))

    def mass(self) -> float:
        return self.grid.cell * float(np.sum(self.values))

    def at(self, x) -> float:
        """Value at the node nearest to x."""
        g = self.grid
        idx = np.clip(np.rint((np.atleast_1d(np.asarray(x, dtype=float)) + g.R) / g.h).astype(int), 0, g.N - 1)
        return float(self.values[tuple(idx)])

    def to_csv(self, path) -> None:
        g = self.grid
        pts = g.points().reshape(g.size, g.d)
        cols = [f"x{i + 1}" for i in range(g.d)] if g.d > 1 else ["x"]
        data = np.column_stack([pts, self.values.reshape(-1)])
        np.savetxt(path, data, delimiter=",", header=",".join(cols + ["value"]), comments="", fmt="%.17g")

    def to_binary(self, path) -> None:
        """Little-endian dump: int64 d, int64 N, float64 R_box, then row-major float64 values."""
        g = self.grid
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qqd", g.d, g.N, g.R))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path, kind: str = "field") -> "Field":
        with open(path, "rb") as fh:
            d, n, r = struct.unpack("<qqd", fh.read(24))
            vals = np.frombuffer(fh.read(), dtype="<f8")
        return cls(make_grid(d, r, n), vals, kind)


@dataclass(frozen=True)
class SpectralResult:
    lambda0: float
    phi0: Field
    residual: float
    iterations: int
    dt: float = 0.0
    mode: str = "fft"
    lambda_decay: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0,
            "residual": self.residual,
            "iterations": self.iterations,
            "dt": self.dt,
            "mode": self.mode,
            "lambda_decay": self.lambda_decay,
        }


# ---------------------------------------------------------------------------
# Symbol and potential on the grid
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _symbol_cached(symbol: LevySymbol, grid: Grid) -> np.ndarray:
    rho = grid.frequency_norms()
    uniq, inv = np.unique(np.round(rho, 12), return_inverse=True)
    vals = np.asarray(symbol.radial(uniq), dtype=float)
    out = vals[inv].reshape(rho.shape)
    out.flat[0] = 0.0  # psi(0) = 0 exactly
    out.setflags(write=False)
    return out


def symbol_on_grid(symbol: LevySymbol, grid: Grid) -> np.ndarray:
    """psi at the discrete frequencies (FFT order), cached per (symbol, grid)."""
    if symbol.d != grid.d:
        raise ValueError("symbol and grid dimensions differ")
    return _symbol_cached(symbol, grid)


def potential_on_grid(pot: Potential, grid: Grid) -> np.ndarray:
    if pot.d != grid.d:
        raise ValueError("potential and grid dimensions differ")
    v = np.asarray(pot(grid.points()), dtype=float).reshape(grid.shape)
    if not np.all(np.isfinite(v)):
        raise NumericalError("potential is not finite on the grid")
    return v


def _fftn(f):
    return np.fft.fftn(f) if f.ndim > 1 else np.fft.fft(f)


def _ifftn(f):
    return np.fft.ifftn(f) if f.ndim > 1 else np.fft.ifft(f)


def _multiply(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    out = _ifftn(mult * _fftn(values))
    return out.real


def _ringing_guard(v: np.ndarray, what: str, tol: float = RING_TOL) -> np.ndarray:
    top = float(np.max(np.abs(v))) if v.size else 0.0
    neg = v < 0
    if np.any(neg):
        worst = float(-v[neg].min())
        if worst > tol * top:
            raise RingingError(f"{what}: negative values down to {-worst:.3e} (max {top:.3e})")
        v = np.where(neg, 0.0, v)
    return v


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def apply_generator(f: Field, symbol: LevySymbol) -> Field:
    """L f as the inverse transform of -psi(xi_k) f^(xi_k)."""
    psi = symbol_on_grid(symbol, f.grid)
    return Field(f.grid, -_multiply(f.values, psi), "generator", f.t)


def generator_matrix(symbol: LevySymbol, grid: Grid) -> np.ndarray:
    """Dense matrix of L on a d = 1 grid (circulant, symmetric)."""
    if grid.d != 1 or grid.N > DENSE_MAX_N:
        raise ValueError(f"dense matrices need d = 1 and N <= {DENSE_MAX_N}")
    c = np.fft.ifft(symbol_on_grid(symbol, grid)).real
    return -linalg.circulant(c)


@lru_cache(maxsize=16)
def _integrability_time(symbol: LevySymbol) -> float:
    return minimal_integrability_time(symbol)


def heat_kernel(symbol: LevySymbol, t: float, grid: Grid, margin: float = 1e-3) -> Field:
    """Transition density p(t, .) centred at the origin, by Fourier inversion.

    Raises
    ------
    AliasingError
        If exp(-t psi) at the Nyquist frequency exceeds 1e-12.
    ValueError
        If t is below the integrability time of a closed-form symbol.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    meta = {}
    if symbol.has_closed_form:
        tb = _integrability_time(symbol)
        meta["t_b"] = tb
        if tb > 0 and t < tb + margin:
            raise ValueError(f"t = {t} is below the integrability time t_b = {tb:.4g} (+ margin {margin})")
    psi_nyq = float(symbol.radial(grid.nyquist * (math.sqrt(grid.d))))
    if math.exp(-t * psi_nyq) >= ALIAS_TOL:
        raise AliasingError(
            f"exp(-t psi) = {math.exp(-t * psi_nyq):.2e} at the grid's highest frequency; "
            "increase N (finer grid) or t"
        )
    psi = symbol_on_grid(symbol, grid)
    k = np.indices(grid.shape).sum(axis=0)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    out = _ifftn(np.exp(-t * psi) * sign)
    vals = out.real / grid.cell
    imag = float(np.max(np.abs(out.imag))) / grid.cell
    meta["imag_residue"] = imag
    vals = _ringing_guard(vals, "heat kernel")
    return Field(grid, vals, "heat_kernel", t, meta)


class SplitStepper:
    """Strang step ``exp(-dt V/2) exp(-dt psi) exp(-dt V/2)`` on a fixed grid.

    ``mode="kernel"`` (d = 1 only) materialises the free step as a dense
    matrix whose FFT-computed entries below ``KERNEL_CLIP`` times the maximum
    are set to zero, which makes every step non-negative and accurate in
    relative terms.  It needs the free multiplier to be negligible at the
    Nyquist frequency.  ``mode="auto"`` picks it whenever possible.
    """

    def __init__(self, symbol: LevySymbol, pot: Potential, grid: Grid, dt: float, mode: str = "auto"):
        if not dt > 0:
            raise ValueError("time step must be positive")
        if mode not in ("auto", "kernel", "fft"):
            raise ValueError(f"unknown mode {mode!r}")
        self.grid, self.dt = grid, dt
        self.psi = symbol_on_grid(symbol, grid)
        self.V = potential_on_grid(pot, grid)
        ok = self.kernel_ok(symbol, grid, dt)
        if mode == "kernel" and not ok:
            raise AliasingError(
                f"kernel mode needs d = 1, N <= {KERNEL_MAX_N} and exp(-dt psi) < {ALIAS_TOL} at Nyquist"
            )
        self.mode = "kernel" if (mode == "kernel" or (mode == "auto" and ok)) else "fft"
        if np.min(self.V) * dt < -700:
            raise NumericalError("potential too negative for the time step")
        self.half = np.exp(-0.5 * dt * self.V)
        self.mult = np.exp(-dt * self.psi)
        if self.mode == "kernel":
            n = grid.N
            ker = np.fft.ifft(self.mult * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)).real
            ker[ker < KERNEL_CLIP * ker.max()] = 0.0
            ker /= ker.sum()  # the free step stays conservative after clipping
            idx = (np.arange(n)[:, None] - np.arange(n)[None, :] + n // 2) % n
            self.kernel_matrix = self.half[:, None] * ker[idx] * self.half[None, :]
        tb = _integrability_time(symbol) if symbol.has_closed_form else 0.0
        self.below_tb = dt < tb

    @staticmethod
    def kernel_ok(symbol: LevySymbol, grid: Grid, dt: float) -> bool:
        if grid.d != 1 or grid.N > KERNEL_MAX_N:
            return False
        return math.exp(-dt * float(symbol.radial(grid.nyquist))) < ALIAS_TOL

    def step(self, f: np.ndarray) -> np.ndarray:
        if self.mode == "kernel":
            return self.kernel_matrix @ f
        return self.half * _multiply(self.half * f, self.mult)

    def matrix(self, steps: int) -> np.ndarray:
        """Dense matrix of ``steps`` Strang steps (d = 1)."""
        if self.grid.d != 1:
            raise ValueError("dense propagators are limited to d = 1")
        if self.mode == "kernel":
            return np.linalg.matrix_power(self.kernel_matrix, steps)
        c = np.fft.ifft(self.mult).real
        one = self.half[:, None] * linalg.circulant(c) * self.half[None, :]
        return np.linalg.matrix_power(one, steps)

    def run(self, f: np.ndarray, steps: int) -> np.ndarray:
        for _ in range(steps):
            f = self.step(f)
        return f


def propagate_semigroup(
    f: Field, symbol: LevySymbol, pot: Potential, t: float, steps: int, mode: str = "auto"
) -> Field:
    """T_t f = exp(-tH) f by Strang splitting with dt = t/steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not t > 0:
        raise ValueError("t must be positive")
    st = SplitStepper(symbol, pot, f.grid, t / steps, mode)
    out = st.run(np.array(f.values, dtype=float), steps)
    out = _ringing_guard(out, "semigroup") if np.all(f.values >= 0) else out
    meta = {"steps": steps, "dt": st.dt, "mode": st.mode}
    if st.below_tb:
        meta["below_integrability_time"] = True
    return Field(f.grid, out, "semigroup", (f.t or 0.0) + t, meta)


def hamiltonian_apply(values: np.ndarray, psi: np.ndarray, V: np.ndarray) -> np.ndarray:
    return _multiply(values, psi) + V * values


def ground_state(
    symbol: LevySymbol,
    pot: Potential,
    grid: Grid,
    tol: float = 1e-6,
    dt: Optional[float] = None,
    mode: str = "auto",
    check_time: float = 0.25,
    max_time: float = 400.0,
    max_halvings: int = 8,
    start: Optional[np.ndarray] = None,
) -> SpectralResult:
    """Lowest eigenpair of the discretised H by imaginary-time power iteration.

    The iterate is renormalised in discrete L^2 after every Strang step.
    Every ``check_time`` time units the Rayleigh quotient and the residual
    are evaluated; the run stops once successive quotients differ by less
    than ``tol`` and the residual is below ``10 tol``.  If the quotient has
    settled but the residual no longer drops (splitting bias) or the
    quotient oscillates, dt is halved and the iteration continues from the
    current iterate.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    psi = symbol_on_grid(symbol, grid)
    V = potential_on_grid(pot, grid)
    cell = grid.cell
    if dt is None:
        dt = 0.1 / math.sqrt(max(1.0, float(np.max(V))))
    f = np.array(start, dtype=float) if start is not None else 1.0 / (1.0 + np.maximum(V, 0.0))
    f = f.reshape(grid.shape)
    f /= math.sqrt(cell * np.sum(f * f))

    def rayleigh(v):
        hv = hamiltonian_apply(v, psi, V)
        lam = cell * float(np.sum(v * hv))
        res = math.sqrt(cell * float(np.sum((hv - lam * v) ** 2)))
        return lam, res

    iterations = 0
    elapsed = 0.0
    lam_prev = None
    for _level in range(max_halvings + 1):
        st = SplitStepper(symbol, pot, grid, dt, mode if mode != "kernel" or SplitStepper.kernel_ok(symbol, grid, dt) else "fft")
        per_check = max(1, int(round(check_time / dt)))
        lam_prev = None
        res_prev = math.inf
        diffs = []
        halve = False
        while elapsed < max_time:
            for _ in range(per_check):
                g = st.step(f)
                nrm = math.sqrt(cell * float(np.sum(g * g)))
                if not nrm > 0 or not math.isfinite(nrm):
                    raise NumericalError("power iteration lost the iterate (norm 0 or non-finite)")
                f = g / nrm
            iterations += per_check
            elapsed += per_check * dt
            lam, res = rayleigh(f)
            lam_decay = -math.log(nrm) / dt
            if lam_prev is not None:
                diffs.append(lam - lam_prev)
                if abs(lam - lam_prev) < tol:
                    if res < 10 * tol:
                        return _finish(grid, f, lam, res, iterations, dt, st.mode, lam_decay, tol)
                    if res > 0.9 * res_prev:
                        halve = True
                        break
                if len(diffs) >= 4 and all(a * b < 0 for a, b in zip(diffs[-4:-1], diffs[-3:])):
                    halve = True
                    break
            lam_prev, res_prev = lam, res
        if not halve:
            break
        dt /= 2
    raise ConvergenceError(
        f"ground state did not converge (last residual {res:.3e}, dt {dt:.3e}, {iterations} iterations)"
    )


def _finish(grid, f, lam, res, iterations, dt, mode, lam_decay, tol):
    if float(np.sum(f)) < 0:
        f = -f
    f = _ringing_guard(f, "ground state")
    if np.any(f <= 0):
        raise NumericalError("ground state is not strictly positive on the grid")
    f = f / math.sqrt(grid.cell * np.sum(f * f))
    phi = Field(grid, f, "phi0", meta={"lambda0": lam, "tol": tol})
    return SpectralResult(lam, phi, res, iterations, dt, mode, lam_decay)


def dense_oracle(symbol: LevySymbol, pot: Potential, grid: Grid) -> tuple:
    """(lambda0, phi0, lambda1) from a dense symmetric eigensolve of H."""
    if grid.d != 1:
        raise ValueError("dense oracle is limited to d = 1")
    if grid.N > DENSE_MAX_N:
        raise ValueError(f"dense oracle is capped at N = {DENSE_MAX_N}")
    H = -generator_matrix(symbol, grid) + np.diag(potential_on_grid(pot, grid))
    w, v = linalg.eigh(H, subset_by_index=[0, 1])
    phi = v[:, 0]
    if phi.sum() < 0:
        phi = -phi
    phi = phi / math.sqrt(grid.h * np.sum(phi * phi))
    return float(w[0]), Field(grid, phi, "phi0_dense"), float(w[1])


def hamiltonian_matrix(symbol: LevySymbol, pot: Potential, grid: Grid) -> np.ndarray:
    return -generator_matrix(symbol, grid) + np.diag(potential_on_grid(pot, grid))
