"""Absorption-spectrum readout: synthesis, Gaussian peak fits, populations.

Each ground -> excited line inside the readout window appears as a Gaussian
whose area is proportional to population times oscillator strength. Traces
are fitted in groups: every group is averaged, each of the five readout
peaks is fitted on a local window, and the group results are averaged.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import curve_fit

from .levels import GROUND_LABELS, INDEX, PEAKS, LevelSystem, transition_table

WINDOW_CENTER = 7.4e6
WINDOW_WIDTH = 18.3e6
GRID_STEP = 10e3
DEFAULT_FWHM = 170e3
DEFAULT_DEPTH = 4.0  # peak alphaL of a unit-population, unit-strength line
GAUSS_AREA = np.sqrt(np.pi / (4 * np.log(2)))  # area / (amplitude * fwhm)


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class Spectrum:
    frequency: np.ndarray  # Hz
    alpha_l: np.ndarray

    def __post_init__(self):
        f = np.array(self.frequency, dtype=float)
        a = np.array(self.alpha_l, dtype=float)
        if f.shape != a.shape or f.ndim != 1:
            raise ValueError("frequency and alpha_l must be 1-D arrays of equal length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "frequency", f)
        object.__setattr__(self, "alpha_l", a)

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write("# freq_Hz\talphaL\n")
        for x, y in zip(self.frequency, self.alpha_l):
            buf.write(f"{float(x)!r}\t{float(y)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Spectrum":
        data = np.loadtxt(io.StringIO(text), comments="#", ndmin=2)
        return cls(data[:, 0], data[:, 1])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: str | Path) -> "Spectrum":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class PeakFit:
    peak: int
    center: float
    fwhm: float
    amplitude: float
    area: float
    area_uncertainty: float

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("fwhm must be positive")


def window_grid(step: float = GRID_STEP) -> np.ndarray:
    lo = WINDOW_CENTER - WINDOW_WIDTH / 2
    n = int(round(WINDOW_WIDTH / step))
    return lo + step * np.arange(n + 1)


def gaussian(x, amplitude, center, fwhm):
    return amplitude * np.exp(-4 * np.log(2) * ((x - center) / fwhm) ** 2)


def _ground_populations(populations) -> dict[str, float]:
    if isinstance(populations, dict):
        pops = {g: float(populations.get(g, 0.0)) for g in GROUND_LABELS}
    else:
        p = np.asarray(populations, dtype=float)
        if p.shape == (6,):
            p = p[:3]
        pops = {g: float(p[INDEX[g]]) for g in GROUND_LABELS}
    if any(v < 0 for v in pops.values()):
        raise ValueError("ground populations must be >= 0")
    return pops


def synthesize_spectrum(
    populations,
    sys: LevelSystem,
    fwhm: float = DEFAULT_FWHM,
    noise: float = 0.0,
    *,
    seed: int | None = None,
    depth: float = DEFAULT_DEPTH,
    grid: np.ndarray | None = None,
) -> Spectrum:
    """Sum of Gaussian lines over the readout window.

    ``populations`` maps ground labels to populations (or is a 6-vector in
    basis order). ``noise`` is the standard deviation of additive Gaussian
    noise as a fraction of the tallest line (0.01 = 1%).
    """
    pops = _ground_populations(populations)
    x = window_grid() if grid is None else np.asarray(grid, dtype=float)
    y = np.zeros_like(x)
    tallest = 0.0
    for tr in transition_table(sys):
        if not x[0] <= tr.frequency_Hz <= x[-1]:
            continue
        amp = depth * pops[tr.ground] * tr.strength
        tallest = max(tallest, amp)
        y += gaussian(x, amp, tr.frequency_Hz, fwhm)
    if noise > 0:
        rng = np.random.default_rng(seed)
        y = y + rng.normal(0.0, noise * (tallest if tallest > 0 else depth), x.size)
    return Spectrum(x, y)


def synthetic_area(population: float, strength: float, depth: float = DEFAULT_DEPTH,
                   fwhm: float = DEFAULT_FWHM) -> float:
    return depth * population * strength * fwhm * GAUSS_AREA


def _fit_one(x, y, peak: int, center: float, fwhm_guess: float) -> PeakFit:
    half = min(2.5 * fwhm_guess, 400e3)
    sel = np.abs(x - center) <= half
    xs, ys = x[sel], y[sel]
    amp0 = max(float(ys.max()), 1e-12)
    p0 = (amp0, center, fwhm_guess)
    lo = (-np.inf, center - fwhm_guess, 0.3 * fwhm_guess)
    hi = (np.inf, center + fwhm_guess, 3.0 * fwhm_guess)
    popt, pcov = curve_fit(gaussian, xs, ys, p0=p0, bounds=(lo, hi), x_scale=(amp0, fwhm_guess, fwhm_guess))
    a, c, w = popt
    area = a * w * GAUSS_AREA
    if np.all(np.isfinite(pcov)):
        jac = np.array([w, 0.0, a]) * GAUSS_AREA
        var = float(jac @ pcov @ jac)
        err = np.sqrt(max(var, 0.0))
    else:
        err = np.inf
    return PeakFit(peak, float(c), float(w), float(a), float(area), float(err))


def fit_peaks(
    traces,
    sys: LevelSystem,
    *,
    n_groups: int = 5,
    fwhm_guess: float = DEFAULT_FWHM,
) -> dict[int, PeakFit]:
    """Fit peaks 1-5 on ``n_groups`` group averages and average the group fits.

    The reported area is the mean of the group areas and its uncertainty the
    mean of the group uncertainties (one-sigma, from the fit covariance).
    """
    traces = list(traces)
    if not traces or len(traces) % n_groups:
        raise ValueError(f"number of traces must be a positive multiple of {n_groups}")
    x = traces[0].frequency
    for t in traces:
        if not np.array_equal(t.frequency, x):
            raise ValueError("all traces must share one frequency grid")
    ys = np.array([t.alpha_l for t in traces]).reshape(n_groups, -1, x.size).mean(axis=1)
    positions = sys.peak_positions()
    per_group: dict[int, list[PeakFit]] = {n: [] for n in positions}
    for gi, y in enumerate(ys):
        for n, centre in sorted(positions.items()):
            try:
                per_group[n].append(_fit_one(x, y, n, centre, fwhm_guess))
            except (RuntimeError, ValueError) as exc:
                raise FitError(f"peak {n} did not converge in group {gi}: {exc}") from exc
    out = {}
    for n, fits in per_group.items():
        out[n] = PeakFit(
            n,
            float(np.mean([f.center for f in fits])),
            float(np.mean([f.fwhm for f in fits])),
            float(np.mean([f.amplitude for f in fits])),
            float(np.mean([f.area for f in fits])),
            float(np.mean([f.area_uncertainty for f in fits])),
        )
    return out


@dataclass(frozen=True)
class PopulationEstimate:
    p0: float
    p0_err: float
    p1: float
    p1_err: float


def populations_from_areas(fits: dict[int, PeakFit], sys: LevelSystem) -> PopulationEstimate:
    """Normalised |0> and |1> populations from peaks 1, 2 (|0>) and 4, 5 (|1>)."""
    peak_line = {n: gl for gl, n in PEAKS.items()}
    missing = [n for n in (1, 2, 4, 5) if n not in fits]
    if missing:
        raise ValueError(f"missing fits for peaks {missing}")
    terms = {}
    for n in (1, 2, 4, 5):
        f = sys.strength(*peak_line[n])
        if not f > 0:
            raise ValueError(f"oscillator strength of peak {n} must be positive")
        terms[n] = (fits[n].area / f, fits[n].area_uncertainty / f)
    pz = 0.5 * (terms[1][0] + terms[2][0])
    po = 0.5 * (terms[4][0] + terms[5][0])
    sz = 0.5 * np.hypot(terms[1][1], terms[2][1])
    so = 0.5 * np.hypot(terms[4][1], terms[5][1])
    total = pz + po
    if total == 0:
        raise ValueError("total population P = P' + P'' is zero")
    p0 = pz / total
    err = np.hypot(po * sz, pz * so) / total**2
    return PopulationEstimate(float(p0), float(err), float(1 - p0), float(err))
