"""Simulated qubit state tomography.

A Bloch component is read as the normalised population difference
(P0 - P1) / (P0 + P1) after an axis-specific rotation and a field-free wait.
In ``ideal`` mode the rotation is an exact pi/2 qubit rotation. In ``sech``
mode it is a pair of two-colour complex hyperbolic secant pulses on the
bright state of the two qubit transitions, simulated on the full six-level
model, so off-resonant hyperfine lines make the readout state dependent.

Everything after state preparation is linear in rho, so each member's
readout is stored as a linear functional on vec(rho) and reused.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import INDEX, Model, _lindblad_batch, free_evolution
from .integrate import dopri5
from .invariant import SampledPulsePair
from .levels import ConfigError

AXES = ("X", "Y", "Z")

# Azimuth of the bright-state rotation axis per measured component; with a
# bright-state phase of +pi/2 these map X and Y onto Z.
_AXIS_AZIMUTH = {"X": np.pi / 2, "Y": np.pi}


@dataclass(frozen=True)
class SechParams:
    """Two-colour complex sech rotation: two pulses of ``duration`` each.

    Envelope Omega0 sech(beta tau)^(1 + i mu) per tone, tau measured from each
    pulse centre; the second pulse carries the extra phase ``rotation_phase``.
    """

    peak_rabi: float = 2 * np.pi * 250e3  # rad/s, per tone
    beta: float = 2.0e6  # 1/s
    chirp: float = 0.8  # mu, dimensionless
    duration: float = 4e-6  # s, per pulse
    center_detuning: float = 0.0  # Hz, tone offset from the qubit carriers
    rotation_phase: float | None = None  # rad; None = calibrate
    n_samples: int = 2048

    def __post_init__(self):
        for name in ("peak_rabi", "beta", "duration"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"sech {name} must be positive")
        if self.chirp < 0:
            raise ConfigError("sech chirp must be nonnegative")


@dataclass(frozen=True)
class TomographySpec:
    pulse_kind: str = "ideal"  # "ideal" | "sech"
    sech: SechParams | None = None
    axes: tuple[str, ...] = AXES
    wait: float = 1e-3  # s of field-free decay before readout
    n_members: int | None = None  # QST ensemble size; None = model's

    def __post_init__(self):
        if self.pulse_kind not in ("ideal", "sech"):
            raise ConfigError(f"unknown pulse kind {self.pulse_kind!r}")
        if self.pulse_kind == "sech" and self.sech is None:
            object.__setattr__(self, "sech", SechParams())
        if tuple(sorted(self.axes)) != AXES:
            raise ConfigError(f"axes must be a permutation of {AXES}")
        if self.wait < 0:
            raise ConfigError("wait must be >= 0")


def load_tomography(config: str | Path | dict) -> TomographySpec:
    if isinstance(config, dict):
        doc = config
    else:
        text = Path(config).read_text() if isinstance(config, Path) else config
        doc = tomllib.loads(text)
    doc = dict(doc)
    doc.pop("format", None)
    doc.pop("notes", None)
    sech = doc.pop("sech", None)
    unknown = set(doc) - {"pulse_kind", "axes", "wait", "n_members"}
    if unknown:
        raise ConfigError(f"unknown tomography keys {sorted(unknown)}")
    if sech is not None:
        sech = SechParams(**sech)
    if "axes" in doc:
        doc["axes"] = tuple(doc["axes"])
    return TomographySpec(sech=sech, **doc)


def default_sech_spec() -> TomographySpec:
    """The tuned sech configuration shipped with the package."""
    text = resources.files("stapulse").joinpath("data/sech_qst.toml").read_text()
    return load_tomography(text)


# -- ideal rotations -------------------------------------------------------


def _qubit_rotation(axis: str) -> np.ndarray:
    """6x6 unitary: exact pi/2 qubit rotation taking component ``axis`` to Z."""
    u = np.eye(6, dtype=complex)
    if axis == "Z":
        return u
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    if axis == "X":  # rotation about y by -pi/2
        r = np.array([[c, s], [-s, c]], dtype=complex)
    else:  # rotation about x by +pi/2
        r = np.array([[c, -1j * s], [-1j * s, c]])
    idx = [INDEX["zero"], INDEX["one"]]
    u[np.ix_(idx, idx)] = r
    return u


# -- sech rotations ----------------------------------------------------------


def sech_sequence(params: SechParams, axis: str, rotation_phase: float) -> SampledPulsePair:
    """Two back-to-back two-colour sech pulses rotating about ``axis``'s partner."""
    total = 2 * params.duration
    n = params.n_samples
    t = np.linspace(0.0, total, n)
    half = params.duration / 2
    env = np.zeros(n, dtype=complex)
    for k, centre in enumerate((half, params.duration + half)):
        tau = t - centre
        inside = np.abs(tau) <= half + 1e-15 * total
        bt = params.beta * tau[inside]
        amp = params.peak_rabi / np.cosh(bt) * np.exp(-1j * params.chirp * np.log(np.cosh(bt)))
        if k == 1:
            amp = amp * np.exp(1j * rotation_phase)
        env[inside] = amp
    env *= np.exp(2j * np.pi * params.center_detuning * t)
    kappa = _AXIS_AZIMUTH[axis]
    return SampledPulsePair(
        dt=total / (n - 1),
        omega_p=env,
        omega_s=env.copy(),
        phi=kappa / 2,
        phi_s=-kappa / 2,
        t_f=total,
        meta={"kind": "sech", "axis": axis},
    )


def _bright_phase(params: SechParams, rotation_phase: float) -> float:
    """Phase acquired by the bright state relative to the dark state.

    Closed, resonant three-level evolution; bright state for the X sequence.
    """
    from .dynamics import three_level_hamiltonian

    seq = sech_sequence(params, "X", rotation_phase)
    kappa = _AXIS_AZIMUTH["X"]
    # basis (|1>, |e>, |0>)
    bright = np.array([np.exp(1j * kappa / 2), 0, np.exp(-1j * kappa / 2)]) / np.sqrt(2)
    dark = np.array([np.exp(1j * kappa / 2), 0, -np.exp(-1j * kappa / 2)]) / np.sqrt(2)
    psi0 = np.stack([bright, dark], axis=0)

    def rhs(t, psi):
        return -1j * psi @ three_level_hamiltonian(t, seq).T

    psi, _ = dopri5(rhs, 0.0, seq.t_f, psi0, rtol=1e-9, atol=1e-10, batched=True)
    return float(np.angle(np.vdot(bright, psi[0]) / np.vdot(dark, psi[1])))


def calibrate_rotation_phase(params: SechParams, target: float = np.pi / 2) -> float:
    """Second-pulse phase giving a bright-state phase of ``target``."""
    a0 = _bright_phase(params, 0.0)
    a1 = _bright_phase(params, 0.5)
    slope = np.sign(np.angle(np.exp(1j * (a1 - a0))))
    chi = slope * (target - a0)
    for _ in range(3):
        err = np.angle(np.exp(1j * (target - _bright_phase(params, chi))))
        chi += slope * err
        if abs(err) < 1e-9:
            break
    return float(np.mod(chi, 2 * np.pi))


def resolved_rotation_phase(params: SechParams) -> float:
    if params.rotation_phase is not None:
        return params.rotation_phase
    return _calibrated(params)


@lru_cache(maxsize=32)
def _calibrated(params: SechParams) -> float:
    return calibrate_rotation_phase(params)


# -- readout channel --------------------------------------------------------


_BASIS = np.eye(36, dtype=complex).reshape(36, 6, 6)


def _readout_vectors(after: np.ndarray) -> np.ndarray:
    """(P0, P1) functionals from evolved basis images, shape (..., 2, 36)."""
    p0 = after[..., INDEX["zero"], INDEX["zero"]]
    p1 = after[..., INDEX["one"], INDEX["one"]]
    return np.stack([p0, p1], axis=-2)


@dataclass(frozen=True)
class ReadoutChannel:
    """Per-member linear maps vec(rho) -> (P0, P1) for each axis."""

    axes: tuple[str, ...]
    detunings: np.ndarray
    weights: np.ndarray
    maps: np.ndarray = field(repr=False)  # (M, n_axes, 2, 36), complex

    def populations(self, rho_members: np.ndarray) -> np.ndarray:
        """Ensemble (P0, P1) per axis for member states (M, 6, 6) -> (n_axes, 2)."""
        vec = np.asarray(rho_members).reshape(len(self.weights), 36)
        per = np.real(np.einsum("makj,mj->mak", self.maps, vec))
        return np.einsum("m,mak->ak", self.weights, per)

    def mean_map(self) -> np.ndarray:
        return np.einsum("m,makj->akj", self.weights, self.maps)

    def bloch(self, rho_members: np.ndarray) -> np.ndarray:
        return _bloch_from_pops(self.populations(rho_members), self.axes)


def _bloch_from_pops(pops: np.ndarray, axes) -> np.ndarray:
    comp = (pops[..., 0] - pops[..., 1]) / (pops[..., 0] + pops[..., 1])
    order = [axes.index(a) for a in AXES]
    return comp[..., order]


_CHANNELS: dict = {}


def readout_channel(spec: TomographySpec, model: Model) -> ReadoutChannel:
    key = (spec, model.key())
    if key not in _CHANNELS:
        if len(_CHANNELS) > 16:
            _CHANNELS.clear()
        _CHANNELS[key] = _build_channel(spec, model)
    return _CHANNELS[key]


def _build_channel(spec: TomographySpec, model: Model) -> ReadoutChannel:
    if spec.n_members is None:
        det, w = model.ensemble.members()
    else:
        det, w = model.ensemble.__class__(
            model.ensemble.detuning_fwhm, spec.n_members, model.ensemble.quadrature
        ).members()
    m = det.size
    maps = np.empty((m, len(spec.axes), 2, 36), dtype=complex)
    for ai, axis in enumerate(spec.axes):
        if spec.pulse_kind == "ideal" or axis == "Z":
            u = _qubit_rotation(axis) if spec.pulse_kind == "ideal" else np.eye(6)
            after = u @ _BASIS @ u.conj().T
            after = free_evolution(after, spec.wait, model)
            maps[:, ai] = _readout_vectors(after)
            continue
        seq = sech_sequence(spec.sech, axis, resolved_rotation_phase(spec.sech))
        batch = np.broadcast_to(_BASIS, (m, 36, 6, 6)).reshape(m * 36, 6, 6).copy()
        dets = np.repeat(det, 36)
        after = _lindblad_batch(batch, seq, model, dets, check=False)
        after = free_evolution(after, spec.wait, model).reshape(m, 36, 6, 6)
        maps[:, ai] = _readout_vectors(after)
    return ReadoutChannel(tuple(spec.axes), det, w, maps)


def qst_readout(rho, spec: TomographySpec, model: Model) -> np.ndarray:
    """Bloch vector (X, Y, Z) read from a state.

    ``rho`` is either a single 6x6 state (taken to be the same for every QST
    ensemble member) or a (M, 6, 6) stack matching the channel's members.
    """
    from .dynamics import DensityState

    if isinstance(rho, DensityState):
        rho = rho.rho
    rho = np.asarray(rho, dtype=complex)
    chan = readout_channel(spec, model)
    if rho.ndim == 2:
        pops = np.real(np.einsum("akj,j->ak", chan.mean_map(), rho.reshape(36)))
        return _bloch_from_pops(pops, chan.axes)
    return chan.bloch(rho)


def bloch_of(rho: np.ndarray) -> np.ndarray:
    """Normalised qubit Bloch vector read directly from a density matrix."""
    r10 = rho[..., INDEX["one"], INDEX["zero"]]
    p0 = np.real(rho[..., INDEX["zero"], INDEX["zero"]])
    p1 = np.real(rho[..., INDEX["one"], INDEX["one"]])
    n = p0 + p1
    return np.stack([2 * np.real(r10) / n, 2 * np.imag(r10) / n, (p0 - p1) / n], axis=-1)


def readout_fidelity(bloch, target_bloch) -> np.ndarray:
    """(1 + r.n) / 2; exceeds 1 when the reconstructed vector is too long."""
    return 0.5 * (1 + np.sum(np.asarray(bloch) * np.asarray(target_bloch), axis=-1))


def qubit_state(bloch_unit) -> np.ndarray:
    """Pure six-level state with the given (unit) qubit Bloch vector."""
    x, y, z = bloch_unit
    theta_b = np.arctan2(np.hypot(x, y), z)
    phi_b = np.arctan2(y, x)
    psi = np.zeros(6, complex)
    psi[INDEX["zero"]] = np.cos(theta_b / 2)
    psi[INDEX["one"]] = np.sin(theta_b / 2) * np.exp(1j * phi_b)
    return psi


@dataclass(frozen=True)
class SymmetryStudy:
    states: np.ndarray  # (n, 4, 3) target Bloch vectors
    fidelities: np.ndarray  # (n, 4)
    averaged: np.ndarray  # (n,)

    def summary(self) -> dict:
        f, a = self.fidelities, self.averaged
        return {
            "n_states": int(f.shape[0]),
            "unaveraged_min": float(f.min()),
            "unaveraged_max": float(f.max()),
            "unaveraged_spread": float(f.max() - f.min()),
            "averaged_min": float(a.min()),
            "averaged_max": float(a.max()),
            "averaged_spread": float(a.max() - a.min()),
            "averaged_mean": float(a.mean()),
        }


def random_states(n: int, seed: int, region: str = "equator") -> np.ndarray:
    """Random unit Bloch vectors; ``equator`` keeps |Z| <= 0.2, ``one`` is near |1>."""
    rng = np.random.default_rng(seed)
    if region == "equator":
        z = rng.uniform(-0.2, 0.2, n)
    elif region == "one":
        z = rng.uniform(-1.0, -0.96, n)
    else:
        raise ValueError(f"unknown region {region!r}")
    az = rng.uniform(0, 2 * np.pi, n)
    r = np.sqrt(1 - z**2)
    return np.stack([r * np.cos(az), r * np.sin(az), z], axis=-1)


def rotate_quarter_turns(bloch: np.ndarray) -> np.ndarray:
    """(n, 3) -> (n, 4, 3): each state rotated 0, 90, 180, 270 deg about Z."""
    out = []
    for k in range(4):
        c, s = np.cos(k * np.pi / 2), np.sin(k * np.pi / 2)
        x, y, z = bloch[:, 0], bloch[:, 1], bloch[:, 2]
        out.append(np.stack([c * x - s * y, s * x + c * y, z], axis=-1))
    return np.stack(out, axis=1)


def qst_symmetry_study(
    n_states: int, seed: int, spec: TomographySpec, model: Model, *, region: str = "equator"
) -> SymmetryStudy:
    """Readout fidelity of random states and of their four-fold rotations."""
    states = rotate_quarter_turns(random_states(n_states, seed, region))
    chan = readout_channel(spec, model)
    mean_map = chan.mean_map()  # (axes, 2, 36)
    flat = states.reshape(-1, 3)
    psis = np.array([qubit_state(b) for b in flat])
    rhos = np.einsum("ni,nj->nij", psis, psis.conj()).reshape(-1, 36)
    pops = np.real(np.einsum("akj,nj->nak", mean_map, rhos))
    bloch = _bloch_from_pops(pops, chan.axes)
    fid = readout_fidelity(bloch, flat).reshape(n_states, 4)
    return SymmetryStudy(states, fid, fid.mean(axis=1))


def spec_to_dict(spec: TomographySpec) -> dict:
    d = asdict(spec)
    d["axes"] = list(spec.axes)
    return d
