"""Four-phase superposition transfers read out by simulated tomography.

    python scripts/run_superposition.py --qst sech --nmax 6
"""

import argparse

import numpy as np

from stapulse.dynamics import Model
from stapulse.protocol import PHASES, run_superposition_protocol


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--qst", choices=["sech", "ideal", "known"], default="sech")
    ap.add_argument("--nmax", type=int, default=6)
    ap.add_argument("--t2", type=float, default=None)
    args = ap.parse_args()

    model = Model() if args.t2 is None else Model().with_t2(args.t2)
    run = run_superposition_protocol(args.nmax, qst=args.qst, model=model)
    for phi in PHASES:
        fs = " ".join(f"{r.overall_fidelity:.4f}" for r in run.by_phase(phi))
        print(f"phi = {np.degrees(phi):5.1f} deg  F(N) = {fs}")
    avg = " ".join(f"{r.overall_fidelity:.4f}" for r in run.averaged)
    print(f"averaged         F(N) = {avg}")
    print(f"per-transfer fidelity {run.estimate}")


if __name__ == "__main__":
    main()
