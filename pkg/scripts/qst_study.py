"""Readout-fidelity symmetry study of the sech tomography pulses.

Prints the summary and a coarse histogram of single and four-state averaged
readout fidelities.
"""

import argparse

import numpy as np

from stapulse.dynamics import Model
from stapulse.tomography import TomographySpec, default_sech_spec, load_tomography, qst_symmetry_study


def histogram(values, lo, hi, bins=12):
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    top = max(counts.max(), 1)
    for c, e in zip(counts, edges):
        print(f"  {e:.3f} {'#' * int(40 * c / top)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--config", help="tomography TOML; default: packaged sech config")
    ap.add_argument("--ideal", action="store_true")
    ap.add_argument("--region", choices=["equator", "one"], default="equator")
    args = ap.parse_args()

    if args.ideal:
        spec = TomographySpec("ideal")
    else:
        spec = load_tomography(open(args.config).read()) if args.config else default_sech_spec()
    study = qst_symmetry_study(args.n, args.seed, spec, Model(), region=args.region)
    for k, v in study.summary().items():
        print(f"{k:20s} {v:.4f}" if isinstance(v, float) else f"{k:20s} {v}")
    lo = float(study.fidelities.min()) - 0.005
    hi = float(study.fidelities.max()) + 0.005
    print("single states")
    histogram(study.fidelities.ravel(), lo, hi)
    print("four-state averages")
    histogram(study.averaged, lo, hi)


if __name__ == "__main__":
    main()
