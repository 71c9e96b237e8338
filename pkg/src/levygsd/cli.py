"""Command line runner: ``levygsd <subcommand> [options]``.

Every subcommand reads the same experiment description (see
:mod:`levygsd.config`), writes its artifacts into ``--out`` and finishes by
writing ``manifest.json`` there.  JSON artifacts carry ``config_sha256``
and ``seed`` fields; CSV artifacts carry them in a leading ``#`` comment
line.  Nothing written depends on the wall clock.

CSV column orders:

* ``catalog.csv``: id, sampler, closed_form, tail, params
* ``check_model.csv``: model, t_b, jump_paring, comparability, admissible
* ``classify.csv``: model, d1, d2, d3, v_order, nu_order, tag, gsd_all_p, agsd_all_p
* ``groundstate.csv``: R_box, N, lambda0, residual, iterations, dt, mode
* ``phi0_R<R>.csv``, ``heatkernel_t<t>.csv``, ``propagate_t<t>.csv``: x, value
* ``heatkernel.csv``: t, R_box, N, mass, p_origin
* ``mc_fk.csv``: model, potential, x0, t, mean, stderr, n_paths, dt, epsilon, seed
* ``gsd_scan.csv``: model, potential, t, p, R_box, N, norm, verdict
* ``verify.csv``: criterion, title, passed

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure,
4 acceptance mismatch in ``verify``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import platform
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalError
from .feynman_kac_mc import McConfig, dumps_exact, fk_estimate
from .grid_spectral import Field, ground_state, heat_kernel, make_grid, propagate_semigroup
from .gsd_diagnostics import default_n_rule, gsd_scan
from .levy_models import (
    CATALOG,
    comparability_check,
    jump_paring_check,
    make_model,
    minimal_integrability_time,
)
from .potentials import classify_contractivity, power_log_loglog

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_MISMATCH = 0, 2, 3, 4
COMMANDS = ("catalog", "check-model", "classify", "groundstate", "heatkernel", "propagate", "mc-fk", "gsd-scan", "verify")


def _g6(x) -> str:
    if isinstance(x, float):
        return "%.6g" % x
    return str(x)


def _label(x: float) -> str:
    return "inf" if math.isinf(x) else ("%.6g" % x)


class Runner:
    """Holds the resolved config and the artifacts written so far."""

    def __init__(self, cfg: ExperimentConfig, stream=None):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.stream = stream or sys.stdout
        self.artifacts = {}
        self.stages = []
        self.checks = None
        self.digest = cfg.sha256()

    # -- output helpers ---------------------------------------------------
    def say(self, text: str = ""):
        print(text, file=self.stream)

    def table(self, header, rows):
        cells = [list(map(str, header))] + [[_g6(c) for c in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for r in cells:
            self.say("  ".join(c.rjust(w) for c, w in zip(r, widths)))

    def _write(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def _stamp(self) -> str:
        return f"# config_sha256={self.digest} seed={self.cfg.seed}\n"

    def emit(self, stem: str, payload, header=None, rows=None):
        """Write ``stem.json`` and/or ``stem.csv`` according to the formats."""
        if "json" in self.cfg.formats:
            doc = {"config_sha256": self.digest, "seed": self.cfg.seed, "kind": stem, "data": payload}
            self._write(stem + ".json", dumps_exact(doc) + "\n")
        if "csv" in self.cfg.formats and header is not None:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow(["%.17g" % c if isinstance(c, float) else c for c in r])
            self._write(stem + ".csv", self._stamp() + buf.getvalue())

    def emit_field(self, stem: str, f: Field):
        if "csv" not in self.cfg.formats:
            return
        buf = io.StringIO()
        f.to_csv(buf)
        self._write(stem + ".csv", self._stamp() + buf.getvalue())

    def manifest(self):
        doc = {
            "config_sha256": self.digest,
            "seed": self.cfg.seed,
            "config": self.cfg.canonical(),
            "stages": self.stages,
            "versions": {
                "levygsd": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        if self.checks is not None:
            doc["checks"] = self.checks
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "manifest.json").write_text(dumps_exact(doc) + "\n", encoding="utf-8")

    # -- helpers ----------------------------------------------------------
    def _grid(self, R: float):
        n = self.cfg.N or default_n_rule()(R)
        return make_grid(self.cfg.d, R, n)

    def _potential(self):
        if not self.cfg.has_potential:
            raise ConfigError("this stage needs a [potential] section")
        return self.cfg.build_potential()

    # -- stages -------------------------------------------------------------
    def catalog(self):
        rows = []
        for name in CATALOG:
            m = make_model(name, self.cfg.d)
            tail = m.profile.tail if m.profile else "none"
            params = " ".join(f"{k}={v:g}" for k, v in m.params)
            rows.append([name, m.sampler, m.symbol.kind, tail, params])
        header = ["id", "sampler", "closed_form", "tail", "params"]
        self.table(header, rows)
        self.emit("catalog", [dict(zip(header, r)) for r in rows], header, rows)

    def check_model(self):
        m = self.cfg.model()
        out = {"model": m.describe(), "admissible": None, "jump_paring": None, "comparability": None}
        sym = m.symbol
        out["t_b"] = minimal_integrability_time(sym) if sym.has_closed_form else 0.0
        out["psi"] = {("%g" % x): float(sym.radial(x)) for x in (0.1, 1.0, 10.0, 100.0)}
        if m.profile is not None:
            prof = m.profile
            out["admissible"] = prof.admissible
            out["tail"] = prof.tail
            out["tail_growth_order"] = list(prof.tail_growth_order())
            ok, ratios = jump_paring_check(prof)
            out["jump_paring"] = {"passed": ok, "ratios": [[r, q] for r, q in ratios]}
            ok_c, band = comparability_check(prof)
            out["comparability"] = {"passed": ok_c, "band": list(band)}
        jp = out["jump_paring"]["passed"] if out["jump_paring"] else None
        cp = out["comparability"]["passed"] if out["comparability"] else None
        self.say(f"model {m.name} (d={m.d})")
        self.table(["t_b", "jump_paring", "comparability", "admissible"], [[out["t_b"], jp, cp, out["admissible"]]])
        self.emit(
            "check_model",
            out,
            ["model", "t_b", "jump_paring", "comparability", "admissible"],
            [[m.name, out["t_b"], jp, cp, out["admissible"]]],
        )

    def classify(self, table: bool = False):
        from .acceptance import GOLDEN_GRIDS

        m = self.cfg.model()
        if m.profile is None:
            raise ConfigError(f"model {m.name!r} has no jump part; the classifier needs one")
        prof = m.profile
        desc = f"tail {prof.tail}"
        if prof.gamma is not None:
            desc += f", gamma={prof.gamma:.6g}"
        if prof.c is not None:
            desc += f", c={prof.c:.6g}"
        if prof.beta is not None:
            desc += f", beta={prof.beta:.6g}"
        self.say(f"model {m.name}: {desc}; |log nu| growth order {prof.tail_growth_order()}")
        if table:
            pots = [power_log_loglog(*dl, d=self.cfg.d) for dl in GOLDEN_GRIDS.get(prof.tail, [])]
            if not pots:
                raise ConfigError(f"no condition table for tail family {prof.tail!r}")
        else:
            pots = [self._potential()]
        rows, recs = [], []
        for i, pot in enumerate(pots):
            v = classify_contractivity(pot, m, check_assumptions=(i == 0))
            d1, d2, d3 = (pot.d1, pot.d2, pot.d3) if pot.family == "power_log_loglog" else (math.nan,) * 3
            row = [m.name, d1, d2, d3, str(v.v_order), str(v.nu_order), v.tag, v.gsd_all_p, v.agsd_all_p]
            rows.append(row)
            recs.append({"potential": pot.describe(), **v.to_dict()})
        header = ["model", "d1", "d2", "d3", "v_order", "nu_order", "tag", "gsd_all_p", "agsd_all_p"]
        self.table(header[1:], [r[1:] for r in rows])
        self.emit("classify", {"model": m.describe(), "profile": desc, "rows": recs}, header, rows)

    def groundstate(self):
        m = self.cfg.model()
        pot = self._potential()
        rows, recs = [], []
        for R in self.cfg.R_box:
            grid = self._grid(R)
            spec = ground_state(m.symbol, pot, grid, self.cfg.tol)
            rows.append([R, grid.N, spec.lambda0, spec.residual, spec.iterations, spec.dt, spec.mode])
            recs.append({"R_box": R, "N": grid.N, **spec.to_dict()})
            self.emit_field(f"phi0_R{_label(R)}", spec.phi0)
        header = ["R_box", "N", "lambda0", "residual", "iterations", "dt", "mode"]
        self.table(header, rows)
        self.emit("groundstate", recs, header, rows)

    def heatkernel(self):
        m = self.cfg.model()
        grid = self._grid(self.cfg.R_box[0])
        rows = []
        for t in self.cfg.t_list:
            p = heat_kernel(m.symbol, t, grid)
            rows.append([t, grid.R, grid.N, p.mass(), p.at(np.zeros(grid.d))])
            self.emit_field(f"heatkernel_t{_label(t)}", p)
        header = ["t", "R_box", "N", "mass", "p_origin"]
        self.table(header, rows)
        self.emit("heatkernel", [dict(zip(header, r)) for r in rows], header, rows)

    def propagate(self):
        m = self.cfg.model()
        pot = self._potential()
        grid = self._grid(self.cfg.R_box[0])
        one = Field(grid, np.ones(grid.shape))
        rows = []
        for t in self.cfg.t_list:
            steps = max(1, int(round(t / self.cfg.dt)))
            f = propagate_semigroup(one, m.symbol, pot, t, steps)
            rows.append([t, steps, f.at(np.asarray(self.cfg.x0)), f.meta["mode"]])
            self.emit_field(f"propagate_t{_label(t)}", f)
        header = ["t", "steps", "value_at_x0", "mode"]
        self.table(header, rows)
        self.emit("propagate", [dict(zip(header, r)) for r in rows], header, rows)

    def mc_fk(self):
        c = self.cfg
        if c.seed is None:
            raise ConfigError("mc-fk needs a seed (--seed or [run] seed)")
        m = c.model()
        pot = self._potential()
        mc = McConfig(c.n_paths, c.dt, c.epsilon, c.seed, c.small_jumps, c.workers)
        rows, recs = [], []
        for t in c.t_list:
            est = fk_estimate(m, pot, list(c.x0), t, mc)
            r = est.to_record()
            recs.append(r)
            rows.append([r["model"], r["potential"], " ".join("%.17g" % v for v in c.x0), t, r["mean"],
                         r["stderr"], r["n_paths"], r["dt"], r["epsilon"], r["seed"]])
        header = ["model", "potential", "x0", "t", "mean", "stderr", "n_paths", "dt", "epsilon", "seed"]
        self.table(["t", "mean", "stderr", "n_paths"], [[r[3], r[4], r[5], r[6]] for r in rows])
        self.emit("mc_fk", recs, header, rows)

    def gsd_scan(self):
        m = self.cfg.model()
        pot = self._potential()
        rule = (lambda R: self.cfg.N) if self.cfg.N else None
        rep = gsd_scan(m, pot, self.cfg.t_list, self.cfg.p_list, self.cfg.R_box, rule, self.cfg.tol)
        rows = [[t, _label(p), v] for (t, p), v in rep.verdicts.items()]
        self.table(["t", "p", "verdict"], rows)
        if "json" in self.cfg.formats:
            self.emit("gsd_scan", rep.to_dict())
        if "csv" in self.cfg.formats:
            self._write("gsd_scan.csv", self._stamp() + rep.to_csv())

    def verify(self) -> bool:
        from .acceptance import run_checks

        results = run_checks(list(self.cfg.checks) or None, progress=lambda r: self.say(r.line()))
        self.checks = [r.record() for r in results]
        ok = all(r.passed for r in results)
        rows = [[r.number, r.title, r.passed] for r in results]
        self.emit("verify", {"passed": ok, "checks": self.checks}, ["criterion", "title", "passed"], rows)
        self.say("all acceptance checks passed" if ok else "acceptance mismatch")
        return ok

    def run_stage(self, stage: str, **kw) -> bool:
        self.stages.append(stage)
        fn = getattr(self, stage.replace("-", "_"))
        res = fn(**kw)
        return res is not False


def _common(parser: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    g = parser.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", default=d, help="experiment config (TOML)")
    g.add_argument("--out", metavar="DIR", default=d, help="output directory")
    g.add_argument("--seed", metavar="U64", type=int, default=d, help="random seed")
    g.add_argument("--threads", metavar="N", type=int, default=d, help="Monte Carlo worker threads")
    g.add_argument("--format", choices=("csv", "json"), default=d, help="write only this format")
    g.add_argument("--model", metavar="ID", default=d, help="catalog model id (overrides the config)")
    g.add_argument(
        "--param", metavar="KEY=VALUE", action="append", default=d, help="model parameter (repeatable)"
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levygsd", description="Ground-state domination experiments for Levy-type Schrodinger operators.")
    ap.add_argument("--version", action="version", version=f"levygsd {__version__}")
    _common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "catalog": "list the model catalog",
        "check-model": "integrability time, jump-paring and comparability checks",
        "classify": "analytic GSD/AGSD verdicts",
        "groundstate": "ground state on each box",
        "heatkernel": "free transition density",
        "propagate": "semigroup applied to the constant function",
        "mc-fk": "Feynman-Kac Monte Carlo estimates",
        "gsd-scan": "box-growth scan of intrinsic ratio norms",
        "verify": "run the acceptance suite",
        "run": "execute the stages listed in the config",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text, description=text)
        _common(sp, suppress=True)
        if name == "classify":
            sp.add_argument("--table", action="store_true", help="print the condition table for the model's tail family")
        if name == "verify":
            sp.add_argument("--checks", metavar="N", type=int, nargs="+", help="run only these criteria")
    return ap


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    kw = {}
    if args.model is not None or args.param:
        params = {}
        for item in args.param or []:
            if "=" not in item:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            try:
                params[k.strip()] = float(v)
            except ValueError as exc:
                raise ConfigError(f"--param {k}: {v!r} is not a number") from exc
        mid = args.model if args.model is not None else cfg.model_id
        base = dict(cfg.model_params) if mid == cfg.model_id else {}
        base.update(params)
        kw["model_id"] = mid
        kw["model_params"] = tuple(sorted(base.items()))
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.threads is not None:
        kw["workers"] = args.threads
    if args.out is not None:
        kw["out_dir"] = args.out
    if args.format is not None:
        kw["formats"] = (args.format,)
    if getattr(args, "checks", None):
        kw["checks"] = tuple(args.checks)
    return cfg.with_overrides(**kw)


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        runner = Runner(cfg)
        if args.command == "run":
            if not args.config:
                raise ConfigError("run needs --config")
            stages = cfg.ordered_stages()
            if not stages:
                raise ConfigError("the config lists no stages under [run] stages")
        else:
            stages = [args.command]
        ok = True
        for stage in stages:
            kw = {"table": args.table} if stage == "classify" and args.command == "classify" else {}
            ok = runner.run_stage(stage, **kw) and ok
        runner.manifest()
    except ConfigError as exc:
        print(f"levygsd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"levygsd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"levygsd: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK if ok else EXIT_MISMATCH


if __name__ == "__main__":
    sys.exit(main())
