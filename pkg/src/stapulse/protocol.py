"""Consecutive-transfer experiments and per-transfer fidelity extraction.

A run applies N alternating forward/backward transfers to an ensemble
initialised in |1>, reads out the final state and records F(N). Because the
simulation is deterministic, the state after N transfers is the state after
N-1 transfers followed by one more pulse, so a single pass over N = 1..n_max
gives every record.

If consecutive transfers have fidelities f_fwd and f_bwd and the readout of
a given target multiplies F(N) by a constant factor, then
F(N + 2) / F(N) = f_fwd * f_bwd irrespective of that factor.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dynamics import INDEX, DensityState, Model, ensemble_transfer, free_evolution, target_state
from .integrate import IntegrationError
from .invariant import (
    AnsatzCoefficients,
    SampledPulsePair,
    interchange_pulses,
    reverse_pulses,
    synthesize_pulses,
    table1_case,
)
from .tomography import TomographySpec, bloch_of, default_sech_spec, qst_readout, readout_fidelity

PHASES = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)
READOUTS = ("normalized", "direct")
BLOCH_OVERSHOOT = 0.05


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class TransferRecord:
    n: int
    overall_fidelity: float
    populations: np.ndarray = field(repr=False)
    bloch: np.ndarray | None = None
    phase: float | None = None
    direct_fidelity: float | None = None  # member-averaged overlap with the target, no readout

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.bloch is not None and np.linalg.norm(self.bloch) > 1 + BLOCH_OVERSHOOT:
            raise ValueError(f"Bloch vector length {np.linalg.norm(self.bloch):.4f} too large")


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    uncertainty: float
    basis: str  # "pair-ratio" or "phase-averaged-ratio"
    n_range: tuple[int, ...]
    ratios: tuple[float, ...] = ()

    def __post_init__(self):
        if self.uncertainty < 0:
            raise ValueError("uncertainty must be >= 0")

    def __str__(self):
        return f"{self.value:.4f} +/- {self.uncertainty:.4f} ({self.basis}, N={list(self.n_range)})"


# -- population transfers ----------------------------------------------------


def population_pulses(a: AnsatzCoefficients | None = None) -> tuple[SampledPulsePair, SampledPulsePair]:
    """|1> -> |0> pulses and their tone-interchanged |0> -> |1> partner."""
    fwd = synthesize_pulses(a or table1_case(1))
    return fwd, interchange_pulses(fwd)


def _readout_population(states: np.ndarray, weights: np.ndarray, label: str, model: Model, wait: float):
    mean = np.einsum("m,mij->ij", weights, states)
    after = free_evolution(mean, wait, model)
    pops = np.real(np.diag(after))
    p0, p1 = pops[INDEX["zero"]], pops[INDEX["one"]]
    return pops, pops[INDEX[label]] / (p0 + p1)


def run_population_protocol(
    n_max: int,
    pulses: tuple[SampledPulsePair, SampledPulsePair] | None = None,
    model: Model | None = None,
    *,
    readout: str = "normalized",
    wait: float = 1e-3,
    negative_control: bool = False,
) -> list[TransferRecord]:
    """F(N) for N = 1..n_max alternating transfers starting in |1>.

    Odd N is scored against |0>, even N against |1>. ``readout="normalized"``
    lets the ensemble decay for ``wait`` seconds and reads P/(P0 + P1);
    ``"direct"`` uses the population at the end of the last pulse.
    ``negative_control`` repeats the forward pulse instead of alternating.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if readout not in READOUTS:
        raise ValueError(f"readout must be one of {READOUTS}")
    model = model or Model()
    fwd, bwd = pulses or population_pulses()
    if negative_control:
        bwd = fwd
    det, w = model.ensemble.members()
    states = DensityState.level("one").rho
    records = []
    for n in range(1, n_max + 1):
        label = "zero" if n % 2 else "one"
        pulse = fwd if n % 2 else bwd
        try:
            res = ensemble_transfer(
                states, pulse, model, target=target_state(np.pi / 2 if n % 2 else 0.0, 0.0),
                detunings=det, weights=w, spectators=False,
            )
        except IntegrationError as exc:
            raise IntegrationError(f"transfer N={n}: {exc.msg}", exc.t) from exc
        states = res.member_states
        if readout == "normalized":
            pops, f = _readout_population(states, w, label, model, wait)
        else:
            pops = res.populations
            f = pops[INDEX[label]]
        records.append(TransferRecord(n, float(f), pops, direct_fidelity=res.fidelity))
    return records


# -- extraction ---------------------------------------------------------------


def _by_n(records) -> dict[int, float]:
    out: dict[int, list[float]] = {}
    for r in records:
        out.setdefault(r.n, []).append(r.overall_fidelity)
    return {n: float(np.mean(v)) for n, v in out.items()}


def extract_pair_fidelity(
    records, n_range=None, *, basis: str = "pair-ratio"
) -> FidelityEstimate:
    """sqrt(F(N+2)/F(N)) averaged over ``n_range``; records with equal N are averaged.

    Default ``n_range`` is every N <= 4 whose N + 2 is present.
    """
    f = _by_n(records)
    if n_range is None:
        n_range = [n for n in sorted(f) if n <= 4 and n + 2 in f]
    n_range = tuple(int(n) for n in n_range)
    if not n_range:
        raise ExtractionError("need records for some N and N + 2")
    ratios = []
    for n in n_range:
        if n not in f or n + 2 not in f:
            raise ExtractionError(f"missing F({n}) or F({n + 2})")
        if f[n] <= 0:
            raise ExtractionError(f"F({n}) = {f[n]} cannot be divided by")
        ratios.append(f[n + 2] / f[n])
    per = np.sqrt(np.clip(ratios, 0, None))
    return FidelityEstimate(
        float(per.mean()), float(per.std()), basis, n_range, tuple(float(r) for r in ratios)
    )


def direct_per_transfer(records, n_range=None) -> float:
    """Per-transfer fidelity from the numerically known states.

    Mean of F_direct(N)^(1/N) over ``n_range``; the default uses only the
    largest N, i.e. the geometric mean over every transfer in the run.
    """
    d = {r.n: r.direct_fidelity for r in records if r.direct_fidelity is not None}
    n_range = n_range or [max(d)]
    return float(np.mean([d[n] ** (1 / n) for n in n_range]))


# -- superposition transfers -------------------------------------------------


def superposition_pulses(phi: float, theta: float = np.pi / 4):
    """Forward (case 2) and backward (time-reversed case 3) pulses for phase ``phi``."""
    fwd = synthesize_pulses(table1_case(2, theta=theta, phi=phi))
    bwd = reverse_pulses(synthesize_pulses(table1_case(3, theta=theta, phi=phi)))
    return fwd, bwd


def target_bloch(theta: float, phi: float) -> np.ndarray:
    """Bloch vector of sin(theta)|0> + cos(theta) e^{i phi}|1>."""
    return np.array([np.sin(2 * theta) * np.cos(phi), np.sin(2 * theta) * np.sin(phi), -np.cos(2 * theta)])


@dataclass(frozen=True)
class SuperpositionRun:
    records: list[TransferRecord]
    averaged: list[TransferRecord]
    estimate: FidelityEstimate

    def by_phase(self, phi: float) -> list[TransferRecord]:
        return [r for r in self.records if np.isclose(r.phase, phi)]


def _read_bloch(states, weights, model, qst: str, spec: TomographySpec | None, wait: float):
    if qst == "known":
        # no wait: spin dephasing during it would erase the coherence
        return bloch_of(np.einsum("m,mij->ij", weights, states))
    if spec is None:
        spec = default_sech_spec() if qst == "sech" else TomographySpec(pulse_kind=qst)
        spec = replace(spec, wait=wait)
    if spec.n_members is None:
        return qst_readout(states, spec, model)
    return qst_readout(np.einsum("m,mij->ij", weights, states), spec, model)


def _one_phase(phi, n_max, theta, pulses, model, qst, spec, wait):
    fwd, bwd = pulses if pulses is not None else superposition_pulses(phi, theta)
    det, w = model.ensemble.members()
    states = DensityState.level("one").rho
    psi_sup = target_state(theta, phi)
    psi_one = target_state(0.0, 0.0)
    n_sup = target_bloch(theta, phi)
    out = []
    for n in range(1, n_max + 1):
        odd = n % 2 == 1
        res = ensemble_transfer(
            states, fwd if odd else bwd, model, target=psi_sup if odd else psi_one,
            detunings=det, weights=w, spectators=False,
        )
        states = res.member_states
        bloch = _read_bloch(states, w, model, qst, spec, wait)
        f = readout_fidelity(bloch, n_sup if odd else np.array([0.0, 0.0, -1.0]))
        out.append(TransferRecord(n, float(f), res.populations, bloch, phi, res.fidelity))
    return out


def run_superposition_protocol(
    n_max: int,
    phases=PHASES,
    *,
    theta: float = np.pi / 4,
    pulses: dict | None = None,
    qst: str = "sech",
    spec: TomographySpec | None = None,
    model: Model | None = None,
    wait: float = 1e-3,
    threads: int = 1,
) -> SuperpositionRun:
    """Alternate |1> -> |sup(phi)> and back for each phase, reading each N by QST.

    ``qst`` is ``"ideal"``, ``"sech"`` (or pass a full ``spec``) or ``"known"``,
    which skips tomography and reads the normalised Bloch vector directly.
    Odd N is scored against sup(phi), even N against |1>. The phase-averaged
    F(N) feeds the ratio extraction.
    """
    model = model or Model()
    if qst not in ("ideal", "sech", "known"):
        raise ValueError(f"unknown qst mode {qst!r}")
    phases = tuple(float(p) for p in phases)
    pulses = pulses or {}

    def job(phi):
        return _one_phase(phi, n_max, theta, pulses.get(phi), model, qst, spec, wait)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            per_phase = list(pool.map(job, phases))
    else:
        per_phase = [job(p) for p in phases]
    records = [r for recs in per_phase for r in recs]
    averaged = []
    for i in range(n_max):
        rs = [recs[i] for recs in per_phase]
        averaged.append(
            TransferRecord(
                i + 1,
                float(np.mean([r.overall_fidelity for r in rs])),
                np.mean([r.populations for r in rs], axis=0),
                direct_fidelity=float(np.mean([r.direct_fidelity for r in rs])),
            )
        )
    est = extract_pair_fidelity(averaged, basis="phase-averaged-ratio")
    return SuperpositionRun(records, averaged, est)


# -- tabular I/O --------------------------------------------------------------

TABLE_COLUMNS = ("n", "phase", "axis", "F", "bloch_x", "bloch_y", "bloch_z", "direct_F")


def records_to_table(records, axis: str = "XYZ") -> str:
    """Tab-separated table, one row per record; floats written with repr."""
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in records:
        b = r.bloch if r.bloch is not None else (np.nan,) * 3
        w.writerow([
            r.n,
            "" if r.phase is None else repr(float(r.phase)),
            axis,
            repr(float(r.overall_fidelity)),
            *(repr(float(x)) for x in b),
            "" if r.direct_fidelity is None else repr(float(r.direct_fidelity)),
        ])
    return buf.getvalue()


def read_table(source: str | Path) -> list[TransferRecord]:
    text = Path(source).read_text() if isinstance(source, Path) else source
    rows = list(csv.reader(io.StringIO(text), delimiter="\t"))
    if not rows or tuple(rows[0]) != TABLE_COLUMNS:
        raise ValueError("not a protocol table")
    out = []
    for row in rows[1:]:
        bloch = np.array([float(x) for x in row[4:7]])
        out.append(
            TransferRecord(
                int(row[0]),
                float(row[3]),
                np.array([]),
                None if np.isnan(bloch).all() else bloch,
                float(row[1]) if row[1] else None,
                float(row[7]) if row[7] else None,
            )
        )
    return out
