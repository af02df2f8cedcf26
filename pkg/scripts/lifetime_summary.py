"""Run the lifetime scenario for both codes and print fitted lifetimes in ms.

Usage: python scripts/lifetime_summary.py [--traj 100] [--dim 200] [--seed 2024] [--workers 1]
"""
from __future__ import annotations

import argparse

from gridpump.config import ScenarioConfig
from gridpump.scenarios import scenario_lifetimes


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--traj", type=int, default=100)
    parser.add_argument("--dim", type=int, default=200)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)
    print("code,observable,branch,lifetime_ms,lifetime_err_ms,converged")
    for code in ("square", "hexagonal"):
        cfg = ScenarioConfig(scenario="lifetimes", code=code, n_traj=args.traj, dim=args.dim, seed=args.seed, workers=args.workers)
        fits = scenario_lifetimes(cfg.validate()).tables["lifetimes_fits"]
        for row in fits.rows:
            r = dict(zip(fits.columns, row))
            print(f"{code},{r['observable']},{r['branch']},{r['lifetime'] * 1e3:.3f},{r['lifetime_err'] * 1e3:.3f},{r['converged']}", flush=True)


if __name__ == "__main__":
    main()
