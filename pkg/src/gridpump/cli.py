"""Command-line front end: run scenarios from config files and write CSV + JSON sidecars."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .analytic import eps_opt_units, optimize_epsilon, preservation_fidelity, readout_biased
from .config import ConfigError, ScenarioConfig, parse_config
from .fitting import FitError
from .hilbert import DegenerateProjection, TruncationError
from .mcwf import StepSizeError, TrajectoryError
from .modular import ProtocolError
from .scenarios import ScenarioResult, Table, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
NUMERICAL_ERRORS = (TruncationError, TrajectoryError, StepSizeError, ProtocolError, DegenerateProjection, FitError, FloatingPointError, np.linalg.LinAlgError)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def add_shot_noise(table: Table, shots: int, seed: int) -> Table:
    """Append a finite-shot estimate of the ``value`` column (binomial on (1 + v) / 2)."""
    if shots <= 0 or "value" not in table.columns:
        return table
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(2**32 - 1,)))
    i = table.columns.index("value")
    out = Table(table.columns + ("shot_value",))
    for row in table.rows:
        p = min(max((1.0 + float(row[i])) / 2.0, 0.0), 1.0)
        out.add(*row, 2.0 * rng.binomial(shots, p) / shots - 1.0)
    return out


def write_result(result: ScenarioResult, cfg: ScenarioConfig, out_dir: Path, wall_clock: float) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in result.tables.items():
        table = add_shot_noise(table, cfg.shots, cfg.seed)
        path = out_dir / f"{name}.csv"
        path.write_text(table_csv(table))
        sidecar = {
            "scenario": result.name,
            "table": name,
            "columns": list(table.columns),
            "config": cfg.to_dict(),
            "seed": cfg.seed,
            "version": __version__,
            "wall_clock_s": wall_clock,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


def _apply_overrides(cfg: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.dim is not None:
        cfg.dim = args.dim
    if args.traj is not None:
        cfg.n_traj = args.traj
    if args.mode is not None:
        cfg.mode = args.mode
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg.validate()


def _run(cfg: ScenarioConfig) -> int:
    t0 = time.perf_counter()
    result = run_scenario(cfg)
    paths = write_result(result, cfg, cfg.output_dir(), time.perf_counter() - t0)
    for p in paths:
        print(p)
    return EXIT_OK


def _analytic(k: int, kappa: float) -> int:
    e_read = optimize_epsilon("readout", kappa, k)
    e_pres = optimize_epsilon("preservation", kappa, 1)
    rows = [
        ("k", str(k)),
        ("kappa", repr(kappa)),
        ("eps_opt_readout", repr(e_read)),
        ("eps_opt_readout_units_2sqrtpi", repr(eps_opt_units(e_read))),
        ("readout_max", repr(readout_biased(k, kappa, e_read))),
        ("readout_unbiased", repr(readout_biased(k, kappa, 0.0))),
        ("eps_opt_preservation", repr(e_pres)),
        ("preservation_fidelity", repr(preservation_fidelity(kappa, e_pres))),
    ]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("quantity", "value"))
    w.writerows(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridpump", description="Finite GKP stabilization simulations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario TOML file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (default: $GRIDPUMP_OUT/<scenario> or runs/<scenario>)")
        p.add_argument("--dim", type=int, help="Fock-space dimension")
        p.add_argument("--traj", type=int, help="number of trajectories")
        p.add_argument("--mode", choices=("exact_branching", "sampled"))
        p.add_argument("--workers", type=int, help="worker processes for trajectory ensembles")

    common(sub.add_parser("run", help="run the scenario named in the config"))
    common(sub.add_parser("sweep", help="run the bias (eps) sweep with the config's settings"))
    common(sub.add_parser("charfn", help="characteristic function of the configured state"))
    pa = sub.add_parser("analytic", help="closed-form optima for readout k at envelope kappa")
    pa.add_argument("k", type=int, choices=(1, 2))
    pa.add_argument("kappa", type=float)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "analytic":
            if not 0.05 <= args.kappa <= 0.8:
                raise ConfigError(f"kappa={args.kappa} outside [0.05, 0.8]")
            return _analytic(args.k, args.kappa)
        cfg = _apply_overrides(parse_config(args.config), args)
        if args.command == "sweep":
            cfg.scenario = "epsilon_sweep"
        elif args.command == "charfn":
            cfg.scenario = "charfn"
        return _run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
