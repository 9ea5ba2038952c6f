"""Command line entry point: ``run``, ``sweep`` and ``check``.

Settings come from an optional JSON config file (keys as in :class:`RunConfig`);
command line flags override it.  Outputs go under ``--output`` or, failing
that, ``$STLPI2_OUTPUT_ROOT`` (default ``./runs``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import io, pi2
from .checks import FAULTS, SUITES, run_checks
from .controllers import ControllerConfig
from .scenarios import ROBOTS, analytic_optimum, complex_scenario, shortest_path_length, simple_scenario
from .stl.syntax import to_text

log = logging.getLogger("stlpi2")

OUTPUT_ENV = "STLPI2_OUTPUT_ROOT"
PI2_FIELDS = tuple(f.name for f in fields(pi2.Pi2Config))


@dataclass
class RunConfig:
    scenario: str = "simple"
    robot: str = "integrator"
    theta: float = 0.25
    thetas: list = field(default_factory=lambda: [0.25, 0.6, 1.2])
    noise: float = 0.0
    seed: int = 0
    seeds: int = 20
    adapt: bool = True
    combiner: str = "improved"
    beta: Optional[float] = None
    output: Optional[str] = None
    jobs: int = 1
    overrides: dict = field(default_factory=dict)  # Scenario fields, e.g. {"T": 5.0}
    pi2: dict = field(default_factory=dict)  # Pi2Config fields

    def __post_init__(self):
        if self.scenario not in ("simple", "complex"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.robot not in ROBOTS:
            raise ValueError(f"unknown robot {self.robot!r}")
        if self.seeds < 1:
            raise ValueError("seeds must be at least 1")
        if self.combiner not in ("simple", "improved"):
            raise ValueError(f"unknown combiner {self.combiner!r}")
        unknown = set(self.pi2) - set(PI2_FIELDS)
        if unknown:
            raise ValueError(f"unknown PI2 settings {sorted(unknown)}")

    def build_scenario(self, theta: Optional[float] = None):
        kw = dict(self.overrides)
        if self.beta is not None:
            kw["beta"] = self.beta
        if self.scenario == "simple":
            kw.setdefault("controller_cfg", ControllerConfig(combiner=self.combiner))
            return simple_scenario(self.theta if theta is None else theta, self.robot, self.noise, **kw)
        return complex_scenario(self.noise, combiner=self.combiner, **kw)

    def pi2_config(self) -> pi2.Pi2Config:
        return pi2.Pi2Config(**{**self.pi2, "adapt_funnels": self.adapt})

    def output_dir(self) -> Path:
        root = self.output or os.environ.get(OUTPUT_ENV, "runs")
        return Path(root)


def _bool(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--scenario", choices=("simple", "complex"))
    p.add_argument("--robot", choices=ROBOTS)
    p.add_argument("--theta", type=float)
    p.add_argument("--noise", type=float, help="process noise variance (0 disables)")
    p.add_argument("--seed", type=int)
    p.add_argument("--adapt", type=_bool, metavar="on|off")
    p.add_argument("--combiner", choices=("simple", "improved"))
    p.add_argument("--beta", type=float)
    p.add_argument("--output")
    p.add_argument("-N", "--samples", dest="N", type=int)
    p.add_argument("-K", "--iterations", dest="K", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stlpi2", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one seeded learning run")
    _add_run_flags(run)

    sweep = sub.add_parser("sweep", help="theta x seed cross product with percentile summary")
    _add_run_flags(sweep)
    sweep.add_argument("--thetas", type=float, nargs="+")
    sweep.add_argument("--seeds", type=int)
    sweep.add_argument("--jobs", type=int)

    check = sub.add_parser("check", help="randomised property suites")
    check.add_argument("--suite", action="append", choices=SUITES)
    check.add_argument("--cases", type=int, default=200)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--inject-fault", choices=sorted(FAULTS))
    check.add_argument("--report", help="write the JSON report here instead of stdout")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        data = json.loads(Path(args.config).read_text())
    data.setdefault("pi2", {})
    for key in ("scenario", "robot", "theta", "noise", "seed", "adapt", "combiner", "beta", "output",
                "thetas", "seeds", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    for key in ("N", "K"):
        if getattr(args, key, None) is not None:
            data["pi2"][key] = getattr(args, key)
    return RunConfig(**data)


def _config_echo(cfg: RunConfig) -> dict:
    return {k: v for k, v in asdict(cfg).items() if k not in ("output", "jobs")}


def execute(cfg: RunConfig, out: Path, theta: Optional[float] = None, seed: Optional[int] = None) -> dict:
    """One run written to ``out``; returns the summary."""
    seed = cfg.seed if seed is None else seed
    scenario = cfg.build_scenario(theta)
    pcfg = cfg.pi2_config()
    result = pi2.run(scenario, pcfg, seed=seed)
    out.mkdir(parents=True, exist_ok=True)
    io.write_history(out / "history.csv", result.history)
    io.write_trajectory(out / "solution_trajectory.csv", result.solution)
    names = [p.name for p in scenario.predicates]
    io.write_funnels(out / f"funnels_k{len(result.history)}.csv", result.funnels, names, scenario.dt)
    summary = {**result.summary(), "dt": scenario.dt, "formula": to_text(scenario.formula),
               "config": {**_config_echo(cfg), "seed": seed, "theta": theta if theta is not None else cfg.theta}}
    io.write_json(out / "summary.json", summary)
    return summary


def cmd_run(cfg: RunConfig) -> int:
    out = cfg.output_dir()
    summary = execute(cfg, out)
    print(json.dumps({k: summary[k] for k in ("C", "rho", "J", "seed")}))
    return 0


def _sweep_job(job):
    cfg, out, theta, seed = job
    return theta, seed, execute(cfg, out, theta, seed)["J"]


def cmd_sweep(cfg: RunConfig) -> int:
    root = cfg.output_dir()
    jobs = [(cfg, root / f"theta{theta!r}" / f"seed{cfg.seed + s}", theta, cfg.seed + s)
            for theta in cfg.thetas for s in range(cfg.seeds)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    D = shortest_path_length()
    T = cfg.build_scenario().T
    rows = []
    for theta in cfg.thetas:
        J = np.array([r[2] for r in results if r[0] == theta])
        opt = analytic_optimum(theta, D, T)[1] if cfg.scenario == "simple" else float("nan")
        rows.append((theta, len(J), *np.percentile(J, [10, 50, 90]), opt))
    io.write_table(root / "sweep.csv", ("theta", "runs", "p10", "median", "p90", "optimum"), rows)
    for r in rows:
        print("theta=%g median J=%.4f (p10 %.4f, p90 %.4f) optimum %.4f" % (r[0], r[3], r[2], r[4], r[5]))
    return 0


def cmd_check(args: argparse.Namespace) -> int:
    suites = args.suite or SUITES
    report = run_checks(suites, args.cases, args.seed, args.inject_fault)
    text = json.dumps(report, indent=2, default=float)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        print(text)
    if not report["passed"]:
        print("property failures: " + ", ".join(report["failed"]), file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "check":
        return cmd_check(args)
    try:
        cfg = load_config(args)
    except (ValueError, TypeError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return cmd_run(cfg) if args.command == "run" else cmd_sweep(cfg)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
