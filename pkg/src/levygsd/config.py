"""Experiment configuration files.

A config is a TOML document (``key = value`` lines under ``[section]``
headers, UTF-8).  Recognised sections and keys::

    [model]
    id = "stable"             # catalog identifier
    d = 1
    alpha = 1.0               # any further keys are model parameters

    [potential]
    family = "power-log-loglog"   # or "quadratic", "constant"
    d1 = 2.0
    d2 = 0.0
    d3 = 0.0
    scale = 1.0

    [grid]
    R_box = [8.0, 12.0, 16.0]
    N = 1024                  # optional; default keeps h = 1/32

    [run]
    stages = ["check-model", "groundstate", "gsd-scan"]
    t_list = [0.25, 0.5]
    p_list = [4, "inf"]
    tol = 1e-6
    seed = 1
    n_paths = 100000
    dt = 1e-3
    epsilon = 0.25
    x0 = [0.0]
    workers = 1
    checks = [1, 4, 7]        # verify stage only

    [output]
    dir = "out"
    formats = ["json", "csv"]

Unknown sections or keys are rejected so that typos do not pass silently.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import tomli

from .errors import ConfigError
from .levy_models import CATALOG, LevyModel, make_model
from .potentials import Potential, potential_from_config

STAGES = ("check-model", "classify", "groundstate", "heatkernel", "propagate", "gsd-scan", "mc-fk", "verify")
FORMATS = ("csv", "json")

_SECTIONS = ("model", "potential", "grid", "run", "output")
_RUN_KEYS = {
    "stages", "t_list", "p_list", "tol", "seed", "n_paths", "dt", "epsilon",
    "x0", "workers", "checks", "small_jumps",
}
_GRID_KEYS = {"R_box", "N", "d"}
_OUTPUT_KEYS = {"dir", "formats"}


def _parse_p(v) -> float:
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(f"p value {v!r} is neither a number nor 'inf'")
    p = float(v)
    if not p > 2:
        raise ConfigError(f"p values must exceed 2, got {p}")
    return p


def _floats(name, v) -> tuple:
    if not isinstance(v, list):
        v = [v]
    if not v:
        raise ConfigError(f"{name} must be a non-empty list")
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must contain numbers") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``model_params`` and ``potential`` are stored as sorted key/value tuples
    so that the config is hashable and its canonical form is stable.
    """

    model_id: str = "stable"
    model_params: tuple = ()
    d: int = 1
    potential: tuple = (("d1", 2.0), ("family", "power-log-loglog"))
    R_box: tuple = (8.0,)
    N: Optional[int] = None
    stages: tuple = ()
    t_list: tuple = (0.5,)
    p_list: tuple = (4.0, math.inf)
    tol: float = 1e-6
    seed: Optional[int] = None
    n_paths: int = 100_000
    dt: float = 1e-3
    epsilon: float = 0.25
    small_jumps: str = "gaussian_correction"
    x0: tuple = (0.0,)
    workers: int = 1
    checks: tuple = ()
    out_dir: str = "out"
    formats: tuple = FORMATS
    has_potential: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.model_id not in CATALOG:
            raise ConfigError(f"unknown model id {self.model_id!r}; known ids: {', '.join(CATALOG)}")
        if self.d < 1:
            raise ConfigError("dimension d must be >= 1")
        if not self.R_box or any(not r > 0 for r in self.R_box):
            raise ConfigError("R_box must be a non-empty list of positive numbers")
        if self.N is not None and self.N < 4:
            raise ConfigError("N must be >= 4")
        if not self.t_list or any(t < 0 for t in self.t_list):
            raise ConfigError("t_list must be a non-empty list of non-negative times")
        if not self.p_list:
            raise ConfigError("p_list must be non-empty")
        for s in self.stages:
            if s not in STAGES:
                raise ConfigError(f"unknown stage {s!r}; known stages: {', '.join(STAGES)}")
        if "mc-fk" in self.stages and self.seed is None:
            raise ConfigError("a seed is required when the mc-fk stage is requested")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if len(self.x0) != self.d:
            raise ConfigError(f"x0 must have {self.d} coordinates")
        for f in self.formats:
            if f not in FORMATS:
                raise ConfigError(f"unknown output format {f!r}")
        if not self.formats:
            raise ConfigError("formats must be non-empty")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # fail early on bad model or potential parameters
        self.model()
        if self.has_potential:
            self.build_potential()

    def model(self) -> LevyModel:
        try:
            return make_model(self.model_id, self.d, **dict(self.model_params))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def build_potential(self) -> Potential:
        try:
            return potential_from_config(dict(self.potential), self.d)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def ordered_stages(self) -> list:
        """Requested stages in dependency order."""
        return [s for s in STAGES if s in self.stages]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        return {
            "model": {"id": self.model_id, "d": self.d, **dict(self.model_params)},
            "potential": dict(self.potential) if self.has_potential else None,
            "grid": {"R_box": list(self.R_box), "N": self.N},
            "run": {
                "stages": list(self.stages),
                "t_list": list(self.t_list),
                "p_list": ["inf" if math.isinf(p) else p for p in self.p_list],
                "tol": self.tol,
                "seed": self.seed,
                "n_paths": self.n_paths,
                "dt": self.dt,
                "epsilon": self.epsilon,
                "small_jumps": self.small_jumps,
                "x0": list(self.x0),
                "workers": self.workers,
                "checks": list(self.checks),
            },
            "output": {"dir": self.out_dir, "formats": list(self.formats)},
        }

    def canonical(self) -> dict:
        """Everything that can change results: worker count and output location are dropped."""
        data = self.to_dict()
        data["run"].pop("workers")
        data.pop("output")
        return data

    def sha256(self) -> str:
        from .feynman_kac_mc import dumps_exact

        return hashlib.sha256(dumps_exact(self.canonical()).encode()).hexdigest()


def _check_keys(section: str, got: dict, allowed: set):
    extra = set(got) - allowed
    if extra:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(extra))}")


def config_from_mapping(data: dict) -> ExperimentConfig:
    """Validate a parsed TOML mapping."""
    extra = set(data) - set(_SECTIONS)
    if extra:
        raise ConfigError(f"unknown sections: {', '.join(sorted(extra))}")
    kw = {}
    model = dict(data.get("model", {}))
    if model:
        if "id" not in model:
            raise ConfigError("[model] needs an id")
        kw["model_id"] = str(model.pop("id"))
        kw["d"] = int(model.pop("d", 1))
        for k, v in model.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ConfigError(f"model parameter {k!r} must be numeric")
        kw["model_params"] = tuple(sorted((k, float(v)) for k, v in model.items()))
    if "potential" in data:
        kw["potential"] = tuple(sorted(data["potential"].items()))
    else:
        kw["has_potential"] = False
    grid = dict(data.get("grid", {}))
    _check_keys("grid", grid, _GRID_KEYS)
    if "R_box" in grid:
        kw["R_box"] = _floats("R_box", grid["R_box"])
    if "N" in grid:
        kw["N"] = int(grid["N"])
    if "d" in grid:
        if "d" in kw and int(grid["d"]) != kw["d"]:
            raise ConfigError("[grid] d differs from [model] d")
        kw["d"] = int(grid["d"])
    run = dict(data.get("run", {}))
    _check_keys("run", run, _RUN_KEYS)
    if "stages" in run:
        kw["stages"] = tuple(str(s) for s in run["stages"])
    if "t_list" in run:
        kw["t_list"] = _floats("t_list", run["t_list"])
    if "p_list" in run:
        ps = run["p_list"] if isinstance(run["p_list"], list) else [run["p_list"]]
        kw["p_list"] = tuple(_parse_p(p) for p in ps)
    for key, conv in (("tol", float), ("n_paths", int), ("dt", float), ("epsilon", float), ("workers", int)):
        if key in run:
            kw[key] = conv(run[key])
    if "seed" in run:
        kw["seed"] = int(run["seed"])
    if "small_jumps" in run:
        kw["small_jumps"] = str(run["small_jumps"])
    if "x0" in run:
        kw["x0"] = _floats("x0", run["x0"])
    elif "d" in kw:
        kw["x0"] = (0.0,) * kw["d"]
    if "checks" in run:
        kw["checks"] = tuple(int(c) for c in run["checks"])
    out = dict(data.get("output", {}))
    _check_keys("output", out, _OUTPUT_KEYS)
    if "dir" in out:
        kw["out_dir"] = str(out["dir"])
    if "formats" in out:
        kw["formats"] = tuple(str(f) for f in out["formats"])
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file; all failures raise ConfigError."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc
    try:
        return config_from_mapping(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
