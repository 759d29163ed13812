"""Pure-state and Lindblad propagation under the two-tone field.

The six-level equations are written in the interaction picture of the bare
hyperfine Hamiltonian (frame ``"interaction"``). Each tone couples every
ground -> excited line with strength scaled by sqrt(f_line / f_carrier) and a
phase factor exp(-i Delta t), Delta being the line's offset from the tone plus
the ion's optical detuning. With only the two carrier lines kept and zero
detuning this is exactly the resonant three-level Lambda Hamiltonian.

Ensemble members share one integrator step sequence (batched); a batch of one
is bit-identical to a direct single-ion call.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .integrate import IntegrationError, dopri5
from .invariant import SampledPulsePair, lambda_hamiltonian
from .levels import (
    EXCITED_LABELS,
    GROUND_LABELS,
    INDEX,
    DecoherenceSpec,
    EnsembleSpec,
    LevelSystem,
    default_level_system,
)

TWO_PI = 2 * np.pi
FRAMES = ("interaction",)
N_LEVELS = 6
QUBIT = (INDEX["one"], INDEX["zero"])
EXCITED = slice(3, 6)


class PositivityError(IntegrationError):
    pass


@dataclass(frozen=True)
class PropagationSettings:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-6
    frame: str = "interaction"
    max_step: float = np.inf
    debug: bool = False  # check state invariants at every accepted step

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2]")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}; known: {FRAMES}")


@dataclass(frozen=True)
class Model:
    """Everything a transfer simulation needs besides pulses and states."""

    levels: LevelSystem = field(default_factory=default_level_system)
    decoherence: DecoherenceSpec = field(default_factory=DecoherenceSpec)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    settings: PropagationSettings = field(default_factory=PropagationSettings)
    offresonant: bool = True  # False keeps only the two carrier lines

    def replace(self, **kw) -> "Model":
        return replace(self, **kw)

    def with_t2(self, t2: float) -> "Model":
        return replace(self, decoherence=self.decoherence.replace(t2_optical=t2))

    def key(self) -> str:
        """Stable content key (used for caching derived quantities)."""
        import json

        dec = self.decoherence
        return json.dumps(
            {
                "levels": self.levels.to_dict(),
                "dec": [dec.t1_optical, dec.t2_optical, dec.t2_spin,
                        None if dec.branching is None else np.asarray(dec.branching).tolist()],
                "ens": [self.ensemble.detuning_fwhm, self.ensemble.n_members,
                        self.ensemble.quadrature, list(self.ensemble.spectator_offsets)],
                "settings": [self.settings.rel_tol, self.settings.abs_tol,
                             self.settings.frame, self.settings.max_step],
                "offresonant": self.offresonant,
            },
            sort_keys=True,
        )

    @cached_property
    def couplings(self) -> tuple[np.ndarray, np.ndarray]:
        """Relative strengths S[k, g, e] and line offsets D[k, g, e] (rad/s)."""
        return coupling_tables(self.levels, self.offresonant)

    @cached_property
    def dissipator(self) -> np.ndarray:
        return dissipator_superop(self.levels, self.decoherence)


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=complex)
        if r.shape != (N_LEVELS, N_LEVELS):
            raise ValueError("density matrix must be 6x6")
        r.flags.writeable = False
        object.__setattr__(self, "rho", r)

    def validate(self, herm_tol=1e-9, trace_tol=1e-6, pos_tol=1e-6) -> None:
        check_density(self.rho, herm_tol, trace_tol, pos_tol)

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    @classmethod
    def pure(cls, psi) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def level(cls, label: str) -> "DensityState":
        psi = np.zeros(N_LEVELS, complex)
        psi[INDEX[label]] = 1
        return cls.pure(psi)


@dataclass(frozen=True)
class TransferResult:
    rho_final: DensityState
    fidelity: float
    populations: np.ndarray
    spectator_excitation: float
    member_states: np.ndarray = field(repr=False, compare=False, default=None)
    member_fidelities: np.ndarray = field(repr=False, compare=False, default=None)
    detunings: np.ndarray = field(repr=False, compare=False, default=None)
    weights: np.ndarray = field(repr=False, compare=False, default=None)


def check_density(rho, herm_tol=1e-9, trace_tol=1e-6, pos_tol=1e-6, t=None) -> None:
    rho = np.asarray(rho)
    batch = rho.reshape(-1, N_LEVELS, N_LEVELS)
    herm = np.abs(batch - np.conj(np.swapaxes(batch, -1, -2))).max()
    where = 0.0 if t is None else t
    if herm > herm_tol:
        raise IntegrationError(f"Hermiticity violated by {herm:.3g}", where)
    tr = np.real(np.trace(batch, axis1=-2, axis2=-1))
    if np.abs(tr - 1).max() > trace_tol:
        raise IntegrationError(f"trace drifted to {tr.min():.9f}..{tr.max():.9f}", where)
    lo = np.linalg.eigvalsh(0.5 * (batch + np.conj(np.swapaxes(batch, -1, -2)))).min()
    if lo < -pos_tol:
        raise PositivityError(f"negative eigenvalue {lo:.3g}; integrator tolerance too loose", where)


def target_state(theta: float, phi: float) -> np.ndarray:
    """sin(theta)|0> + cos(theta) e^{i phi}|1> in the six-level basis."""
    psi = np.zeros(N_LEVELS, complex)
    psi[INDEX["zero"]] = np.sin(theta)
    psi[INDEX["one"]] = np.cos(theta) * np.exp(1j * phi)
    return psi


def coupling_tables(sys: LevelSystem, offresonant: bool = True):
    f = sys.oscillator_strengths
    e_idx = EXCITED_LABELS.index(sys.qubit_excited_label)
    carriers = (("one", sys.tone_p_Hz), ("zero", sys.tone_s_Hz))
    strength = np.zeros((2, 3, 3))
    offset = np.zeros((2, 3, 3))
    freq = np.array([[sys.frequency(g, e) for e in EXCITED_LABELS] for g in GROUND_LABELS])
    for k, (g_label, tone) in enumerate(carriers):
        g_idx = GROUND_LABELS.index(g_label)
        f_carrier = f[g_idx, e_idx]
        if f_carrier <= 0:
            raise ValueError(f"carrier line {g_label}->{sys.qubit_excited_label} has zero strength")
        if offresonant:
            strength[k] = np.sqrt(f / f_carrier)
        else:
            strength[k, g_idx, e_idx] = 1.0
        offset[k] = TWO_PI * (freq - tone)
    return strength, offset


def dissipator_superop(sys: LevelSystem, dec: DecoherenceSpec) -> np.ndarray:
    """Row-major vectorised Lindblad dissipator (36 x 36, real)."""
    ops = []
    b = dec.branching_matrix(sys)
    for ei in range(3):
        for gi in range(3):
            if b[ei, gi] > 0:
                L = np.zeros((6, 6))
                L[gi, 3 + ei] = np.sqrt(b[ei, gi] / dec.t1_optical)
                ops.append(L)
    for gi in range(3):
        L = np.zeros((6, 6))
        L[gi, gi] = np.sqrt(1 / dec.t2_spin)
        ops.append(L)
    pure = dec.optical_pure_dephasing
    if pure > 0:
        L = np.zeros((6, 6))
        L[EXCITED, EXCITED] = np.eye(3) * np.sqrt(2 * pure)
        ops.append(L)
    eye = np.eye(6)
    D = np.zeros((36, 36))
    for L in ops:
        LdL = L.T @ L
        D += np.kron(L, L) - 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T))
    return D


def _envelopes(pulses: SampledPulsePair, t: float):
    if t <= 0.0 or t >= pulses.t_f:
        if t == pulses.t_f:
            return pulses.omega_p[-1], pulses.omega_s[-1]
        if t == 0.0:
            return pulses.omega_p[0], pulses.omega_s[0]
        return 0.0, 0.0
    x = t / pulses.dt
    i = min(int(x), pulses.n_samples - 2)
    u = x - i
    p, s = pulses.omega_p, pulses.omega_s
    return (1 - u) * p[i] + u * p[i + 1], (1 - u) * s[i] + u * s[i + 1]


def _coupling_block(t, pulses, strength, offset, detunings) -> np.ndarray:
    """Upper-right (ground x excited) block of H for each member, (M, 3, 3)."""
    op, os_ = _envelopes(pulses, t)
    amp_p = -0.5 * op * np.exp(1j * pulses.phi) * strength[0]
    amp_s = -0.5 * os_ * np.exp(1j * pulses.phi_s) * strength[1]
    shift = np.exp(-1j * TWO_PI * np.asarray(detunings) * t)[:, None, None]
    return shift * (amp_p * np.exp(-1j * offset[0] * t) + amp_s * np.exp(-1j * offset[1] * t))


def hamiltonian_at(
    t: float,
    pulses: SampledPulsePair,
    sys: LevelSystem,
    detuning: float = 0.0,
    frame: str = "interaction",
    *,
    offresonant: bool = True,
) -> np.ndarray:
    """6x6 Hamiltonian (rad/s) seen by an ion with optical detuning (Hz)."""
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}; known: {FRAMES}")
    strength, offset = coupling_tables(sys, offresonant)
    c = _coupling_block(t, pulses, strength, offset, [detuning])[0]
    h = np.zeros((6, 6), complex)
    h[:3, 3:] = c
    h[3:, :3] = c.conj().T
    return h


def three_level_hamiltonian(t, pulses: SampledPulsePair, detuning: float = 0.0) -> np.ndarray:
    """Resonant Lambda Hamiltonian at time t (basis |1>, |e>, |0>)."""
    op, os_ = _envelopes(pulses, t)
    h = lambda_hamiltonian(op, os_, pulses.phi, pulses.phi_s)
    if detuning:
        ph = np.exp(-1j * TWO_PI * detuning * t)
        h[0, 1] *= ph
        h[2, 1] *= ph
        h[1, 0] = np.conj(h[0, 1])
        h[1, 2] = np.conj(h[2, 1])
    return h


def propagate_pure(
    psi0,
    pulses: SampledPulsePair,
    settings: PropagationSettings | None = None,
    *,
    detuning: float = 0.0,
) -> np.ndarray:
    """Closed three-level evolution of psi0 (basis |1>, |e>, |0>) over [0, t_f]."""
    settings = settings or PropagationSettings()
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1) > 1e-9:
        raise ValueError("psi0 must be normalised")

    def rhs(t, psi):
        return -1j * (three_level_hamiltonian(t, pulses, detuning) @ psi)

    psi, _ = dopri5(
        rhs, 0.0, pulses.t_f, psi0,
        rtol=settings.rel_tol, atol=settings.abs_tol, max_step=settings.max_step,
    )
    return psi


def _lindblad_batch(
    rho0: np.ndarray,
    pulses: SampledPulsePair,
    model: Model,
    detunings: np.ndarray,
    *,
    t_eval=None,
    check: bool = True,
):
    """Evolve a batch (M, 6, 6) of members with per-member detunings (Hz).

    ``check=False`` skips the density-matrix checks so that non-physical
    inputs (operator basis elements for channel construction) can be evolved.
    """
    settings = model.settings
    strength, offset = model.couplings
    D = model.dissipator
    m = rho0.shape[0]
    detunings = np.asarray(detunings, dtype=float)
    h = np.zeros((m, 6, 6), complex)

    def rhs(t, rho):
        c = _coupling_block(t, pulses, strength, offset, detunings)
        h[:, :3, 3:] = c
        h[:, 3:, :3] = np.conj(np.swapaxes(c, -1, -2))
        out = -1j * (h @ rho - rho @ h)
        out += (rho.reshape(m, 36) @ D.T).reshape(m, 6, 6)
        return out

    # local errors of order abs_tol accumulate over a few hundred steps
    pos_tol = max(1e-6, 20 * settings.abs_tol)
    on_step = None
    if settings.debug and check:
        def on_step(t, rho):
            check_density(rho, pos_tol=pos_tol, t=t)

    res = dopri5(
        rhs, 0.0, pulses.t_f, rho0,
        rtol=settings.rel_tol, atol=settings.abs_tol, max_step=settings.max_step,
        batched=True, t_eval=t_eval, on_step=on_step,
    )
    rho = res[0]
    if check:
        rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
        check_density(rho, herm_tol=np.inf, pos_tol=pos_tol, t=pulses.t_f)
    return (rho,) + tuple(res[2:]) if t_eval is not None else rho


def _as_batch(rho0, m):
    r = rho0.rho if isinstance(rho0, DensityState) else np.asarray(rho0, complex)
    if r.ndim == 2:
        r = np.broadcast_to(r, (m, 6, 6))
    if r.shape != (m, 6, 6):
        raise ValueError(f"expected {m} member states, got shape {r.shape}")
    return np.array(r, dtype=complex)


def propagate_lindblad(
    rho0,
    pulses: SampledPulsePair,
    sys: LevelSystem,
    dec: DecoherenceSpec,
    detuning: float = 0.0,
    settings: PropagationSettings | None = None,
    *,
    offresonant: bool = True,
) -> DensityState:
    """Six-level master-equation evolution of one ion over the pulse."""
    model = Model(sys, dec, EnsembleSpec(n_members=1), settings or PropagationSettings(), offresonant)
    rho = _lindblad_batch(_as_batch(rho0, 1), pulses, model, np.array([detuning]))
    return DensityState(rho[0])


def free_evolution(rho, duration: float, model: Model) -> np.ndarray:
    """Field-free decay for ``duration`` seconds; accepts (..., 6, 6)."""
    if duration <= 0:
        return np.array(rho)
    prop = expm(model.dissipator * duration)
    r = np.asarray(rho, dtype=complex)
    flat = r.reshape(-1, 36) @ prop.T
    return flat.reshape(r.shape)


def member_fidelities(rho: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("i,...ij,j->...", psi.conj(), rho, psi))


def ensemble_transfer(
    rho0,
    pulses: SampledPulsePair,
    model: Model,
    *,
    target: np.ndarray | None = None,
    detunings=None,
    weights=None,
    spectators: bool = True,
    spectator_state: str = "mixed",
) -> TransferResult:
    """Weighted ensemble average over the detuning quadrature.

    ``rho0`` is one 6x6 state for all members or a (M, 6, 6) stack from a
    previous transfer. Spectator ions (one per configured offset) start in
    ``spectator_state`` and contribute their summed excited-population gain.
    """
    if detunings is None:
        detunings, weights = model.ensemble.members()
    detunings = np.asarray(detunings, dtype=float)
    weights = np.full(detunings.size, 1 / detunings.size) if weights is None else np.asarray(weights)
    batch = _as_batch(rho0, detunings.size)
    try:
        final = _lindblad_batch(batch, pulses, model, detunings)
    except IntegrationError as exc:
        raise type(exc)(
            f"ensemble member(s) with detunings {detunings.min():.4g}..{detunings.max():.4g} Hz: {exc.msg}",
            exc.t,
        ) from exc
    mean = np.einsum("m,mij->ij", weights, final)
    fid = member_fidelities(final, target) if target is not None else np.full(detunings.size, np.nan)
    spect = 0.0
    offsets = model.ensemble.spectator_offsets
    if spectators and offsets:
        spect = spectator_excitation(pulses, model, offsets, spectator_state)
    return TransferResult(
        rho_final=DensityState(mean),
        fidelity=float(weights @ fid) if target is not None else float("nan"),
        populations=np.real(np.diag(mean)).copy(),
        spectator_excitation=spect,
        member_states=final,
        member_fidelities=fid,
        detunings=detunings,
        weights=weights,
    )


def spectator_state_matrix(kind: str) -> np.ndarray:
    rho = np.zeros((6, 6), complex)
    if kind == "mixed":
        rho[INDEX["one"], INDEX["one"]] = rho[INDEX["zero"], INDEX["zero"]] = 0.5
    elif kind in INDEX and kind in GROUND_LABELS:
        rho[INDEX[kind], INDEX[kind]] = 1.0
    else:
        raise ValueError(f"unknown spectator state {kind!r}")
    return rho


def spectator_excitation(pulses, model: Model, offsets, state: str = "mixed") -> float:
    """Summed excited-population gain of ground-state ions at ``offsets`` (Hz)."""
    offsets = np.asarray(offsets, dtype=float)
    rho0 = spectator_state_matrix(state)
    final = _lindblad_batch(_as_batch(rho0, offsets.size), pulses, model, offsets)
    gain = np.real(np.trace(final[:, EXCITED, EXCITED], axis1=-2, axis2=-1))
    return float(gain.sum())


def trajectory(rho0, pulses, model: Model, detuning: float = 0.0, n_points: int = 201):
    """(t, populations[6], |rho_01|) sampled uniformly over the pulse."""
    t = np.linspace(0, pulses.t_f, n_points)
    _, rhos = _lindblad_batch(_as_batch(rho0, 1), pulses, model, np.array([detuning]), t_eval=t)
    rhos = rhos[:, 0]
    pops = np.real(np.diagonal(rhos, axis1=-2, axis2=-1))
    coh = np.abs(rhos[:, INDEX["zero"], INDEX["one"]])
    return t, pops, coh
