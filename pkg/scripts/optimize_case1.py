"""Re-optimise the theta = pi/2 transfer from random starts and compare with case 1."""

import argparse

from stapulse.dynamics import Model
from stapulse.invariant import table1_case
from stapulse.optimizer import OptimizerSettings, ScoreSpec, band_fidelity, optimize, random_feasible, score


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[3])
    ap.add_argument("--sa-iterations", type=int, default=150)
    ap.add_argument("--simplex-evals", type=int, default=150)
    args = ap.parse_args()

    model, spec = Model(), ScoreSpec()
    c1 = table1_case(1)
    print(f"case 1: score {score(c1, spec, model):.5f}  band fidelity {band_fidelity(c1, spec, model):.5f}")
    for seed in args.seeds:
        settings = OptimizerSettings(args.sa_iterations, seed=seed, simplex_max_evals=args.simplex_evals)
        res = optimize(random_feasible(seed), spec, settings, model,
                       callback=lambda i, s, b: print(f"  eval {i:4d}  best {b:.5f}") if i % 50 == 0 else None)
        coeffs = " ".join(f"{x:+.4f}" for x in res.best.a)
        print(f"seed {seed}: score {res.best_score:.5f}  band fidelity {band_fidelity(res.best, spec, model):.5f}")
        print(f"  a = {coeffs}")
        if res.warning:
            print(f"  warning: {res.warning}")


if __name__ == "__main__":
    main()
