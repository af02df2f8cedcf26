"""Run every scenario file in a directory through the command-line front end.

Usage: python scripts/run_configs.py [configs_dir] [--out runs] [--workers N]
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gridpump.cli import main as cli_main


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("configs", nargs="?", default="configs")
    parser.add_argument("--out", default="runs")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--skip", nargs="*", default=[], help="file stems to skip")
    args = parser.parse_args(argv)
    worst = 0
    for path in sorted(Path(args.configs).glob("*.toml")):
        if path.stem in args.skip:
            continue
        print(f"== {path.name}", flush=True)
        code = cli_main(["run", str(path), "--out", str(Path(args.out) / path.stem), "--workers", str(args.workers)])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
