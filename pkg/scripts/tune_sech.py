"""Tune the sech tomography pulses against the symmetry-study targets.

Searches (duration, peak Rabi frequency, chirp) with Nelder-Mead, keeping
beta * duration fixed, and prints a TOML block for data/sech_qst.toml.

    python scripts/tune_sech.py --start 1.0 0.9 1.0 --evals 40
"""

import argparse

import numpy as np
from scipy.optimize import minimize

from stapulse.dynamics import Model
from stapulse.tomography import SechParams, TomographySpec, calibrate_rotation_phase, qst_symmetry_study

TARGETS = {"unaveraged_min": 0.90, "unaveraged_max": 0.955, "averaged_mean": 0.915}


def params(x, beta_t: float) -> SechParams:
    dur_us, peak_mhz, chirp = x
    dur = dur_us * 1e-6
    return SechParams(peak_rabi=2 * np.pi * peak_mhz * 1e6, beta=beta_t / dur, chirp=chirp, duration=dur)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--start", nargs=3, type=float, default=[1.0, 0.9, 1.0],
                    metavar=("DUR_US", "PEAK_MHZ", "CHIRP"))
    ap.add_argument("--beta-t", type=float, default=6.0, help="beta * duration")
    ap.add_argument("--evals", type=int, default=40)
    ap.add_argument("--states", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    model = Model()

    def loss(x):
        if min(x) <= 0:
            return 1.0
        spec = TomographySpec("sech", params(x, args.beta_t))
        s = qst_symmetry_study(args.states, args.seed, spec, model).summary()
        v = sum((s[k] - t) ** 2 for k, t in TARGETS.items())
        print(np.round(x, 4), {k: round(s[k], 4) for k in TARGETS}, f"{v:.2e}", flush=True)
        return v

    res = minimize(loss, args.start, method="Nelder-Mead",
                   options={"maxfev": args.evals, "xatol": 1e-3, "fatol": 1e-7})
    p = params(res.x, args.beta_t)
    chi = calibrate_rotation_phase(p)
    print("\n[sech]")
    print(f"peak_rabi = {p.peak_rabi!r}")
    print(f"beta = {p.beta!r}")
    print(f"chirp = {p.chirp!r}")
    print(f"duration = {p.duration!r}")
    print(f"rotation_phase = {chi!r}")


if __name__ == "__main__":
    main()
