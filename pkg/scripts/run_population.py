"""Population-transfer experiment over a range of optical T2.

    python scripts/run_population.py --t2 44e-6 66e-6 132e-6 --nmax 6
"""

import argparse

from stapulse.dynamics import Model
from stapulse.protocol import direct_per_transfer, extract_pair_fidelity, run_population_protocol


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--t2", type=float, nargs="+", default=[44e-6, 66e-6, 88e-6, 110e-6, 132e-6])
    ap.add_argument("--nmax", type=int, default=6)
    ap.add_argument("--negative-control", action="store_true")
    args = ap.parse_args()

    base = Model()
    print("T2_us\tF(1..N)\textracted\tdirect")
    for t2 in args.t2:
        recs = run_population_protocol(args.nmax, model=base.with_t2(t2),
                                       negative_control=args.negative_control)
        est = extract_pair_fidelity(recs)
        f = " ".join(f"{r.overall_fidelity:.4f}" for r in recs)
        print(f"{t2 * 1e6:.0f}\t{f}\t{est.value:.4f}+/-{est.uncertainty:.4f}\t"
              f"{direct_per_transfer(recs):.4f}")


if __name__ == "__main__":
    main()
