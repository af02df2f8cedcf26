"""Effect of a single repump recoil on the unbiased S_x readout.

Averages the readout over recoil draws applied to the ideal code state and to
the prepared state.  Usage: python scripts/recoil_kick.py [--draws 10000]
"""
from __future__ import annotations

import argparse

import numpy as np

from gridpump.codes import code_state, make_code, run_prep
from gridpump.hilbert import FockConfig, displace
from gridpump.modular import finite_measure, stabilizer_spec
from gridpump.noise import RecoilModel


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--draws", type=int, default=10_000)
    parser.add_argument("--kappa", type=float, default=0.37)
    parser.add_argument("--dim", type=int, default=300)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args(argv)
    code = make_code("square", args.kappa)
    cfg = FockConfig(args.dim)
    spec = stabilizer_spec(code, "X", 0.0)
    model = RecoilModel()
    rng = np.random.default_rng(args.seed)
    states = {"ideal": code_state(code, "-Z", cfg), "prepared": run_prep(code, "-Z", cfg)[1]}
    for name, state in states.items():
        before = finite_measure(state, spec).value
        after = np.mean([finite_measure(displace(state, model(rng)), spec).value for _ in range(args.draws)])
        print(f"{name}: S_x {before:.4f} -> {after:.4f} (drop {before - after:.4f})")


if __name__ == "__main__":
    main()
