"""Six-level ion model: hyperfine layout, decoherence and ensemble sampling.

Basis order used everywhere in the package::

    0: aux   1: |1>   2: |0>   3: e1   4: e2   5: e3

Energies are stored in Hz. A transition frequency is the excited energy
minus the ground energy, so the default Pr:YSO layout puts |0>->e1 at 0 MHz.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import numpy as np
try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib
from scipy.special import ndtri, roots_hermite

GROUND_LABELS = ("aux", "one", "zero")
EXCITED_LABELS = ("e1", "e2", "e3")
LEVEL_LABELS = GROUND_LABELS + EXCITED_LABELS
KET = {"aux": "aux", "one": "|1>", "zero": "|0>", "e1": "e1", "e2": "e2", "e3": "e3"}

# Index of each label in the 6x6 basis.
INDEX = {label: i for i, label in enumerate(LEVEL_LABELS)}

# The five lines inside the transparent window, numbered as in the readout
# spectrum: three from |0>, two from |1>.
PEAKS = {
    ("zero", "e1"): 1,
    ("zero", "e2"): 2,
    ("zero", "e3"): 3,
    ("one", "e1"): 4,
    ("one", "e2"): 5,
}

AUX_DEFAULT_OFFSET = 17.3e6
"""Distance of aux from |1> (Hz), on the far side from |0>. Pr:YSO site 1."""

FORMAT_TAG = "stapulse-levels/1"
FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


class ConfigError(ValueError):
    """Raised for malformed or physically invalid configuration."""


@dataclass(frozen=True)
class LevelSystem:
    ground_energies: np.ndarray  # (aux, one, zero), Hz
    excited_energies: np.ndarray  # (e1, e2, e3), Hz
    oscillator_strengths: np.ndarray  # f[g][e], rows in GROUND_LABELS order
    qubit_excited_label: str = "e2"
    carrier_p_Hz: float = 0.0
    carrier_s_Hz: float = 0.0
    name: str = ""
    defaults_applied: tuple[str, ...] = ()

    def __post_init__(self):
        g = np.array(self.ground_energies, dtype=float)
        e = np.array(self.excited_energies, dtype=float)
        f = np.array(self.oscillator_strengths, dtype=float)
        if g.shape != (3,) or e.shape != (3,):
            raise ConfigError("need exactly three ground and three excited energies")
        if f.shape != (3, 3):
            raise ConfigError("oscillator_strengths must be 3x3")
        if np.any(f < 0):
            bad = [(GROUND_LABELS[i], EXCITED_LABELS[j]) for i, j in zip(*np.nonzero(f < 0))]
            raise ConfigError(f"negative oscillator strength for {bad}")
        rows = f.sum(axis=1)
        for label, total in zip(GROUND_LABELS, rows):
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(
                    f"oscillator strengths out of {label} sum to {total!r}, expected 1"
                )
        if self.qubit_excited_label not in EXCITED_LABELS:
            raise ConfigError(f"qubit_excited_label must be one of {EXCITED_LABELS}")
        for arr in (g, e, f):
            arr.flags.writeable = False
        object.__setattr__(self, "ground_energies", g)
        object.__setattr__(self, "excited_energies", e)
        object.__setattr__(self, "oscillator_strengths", f)

    def energy(self, label: str) -> float:
        if label in GROUND_LABELS:
            return float(self.ground_energies[GROUND_LABELS.index(label)])
        return float(self.excited_energies[EXCITED_LABELS.index(label)])

    def frequency(self, ground: str, excited: str) -> float:
        """Transition frequency in Hz on the package's zero convention."""
        return self.energy(excited) - self.energy(ground)

    def strength(self, ground: str, excited: str) -> float:
        return float(
            self.oscillator_strengths[GROUND_LABELS.index(ground), EXCITED_LABELS.index(excited)]
        )

    @property
    def tone_p_Hz(self) -> float:
        """Optical frequency of the p tone (carrier on |1> <-> |e>)."""
        return self.frequency("one", self.qubit_excited_label) + self.carrier_p_Hz

    @property
    def tone_s_Hz(self) -> float:
        """Optical frequency of the s tone (carrier on |0> <-> |e>)."""
        return self.frequency("zero", self.qubit_excited_label) + self.carrier_s_Hz

    def peak_positions(self) -> dict[int, float]:
        return {n: self.frequency(g, e) for (g, e), n in PEAKS.items()}

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": FORMAT_TAG,
            "name": self.name,
            "ground": dict(zip(GROUND_LABELS, map(float, self.ground_energies))),
            "excited": dict(zip(EXCITED_LABELS, map(float, self.excited_energies))),
            "oscillator_strengths": {
                g: [float(x) for x in row]
                for g, row in zip(GROUND_LABELS, self.oscillator_strengths)
            },
            "carriers": {
                "qubit_excited": self.qubit_excited_label,
                "p_offset_Hz": self.carrier_p_Hz,
                "s_offset_Hz": self.carrier_s_Hz,
            },
            "defaults_applied": list(self.defaults_applied),
        }


@dataclass(frozen=True)
class Transition:
    ground: str
    excited: str
    frequency_Hz: float
    strength: float
    peak: int | None  # 1..5 for the lines used in readout, else None


def transition_table(sys: LevelSystem) -> list[Transition]:
    """All nine ground->excited lines, ground-major in GROUND_LABELS order."""
    out = []
    for g in GROUND_LABELS:
        for e in EXCITED_LABELS:
            out.append(
                Transition(g, e, sys.frequency(g, e), sys.strength(g, e), PEAKS.get((g, e)))
            )
    return out


@dataclass(frozen=True)
class DecoherenceSpec:
    """Relaxation times in seconds.

    ``branching`` is either None (derived from the oscillator strengths, see
    :meth:`branching_matrix`), a 3-vector shared by all excited levels, or a
    3x3 matrix ``b[e][g]`` with rows summing to one.
    """

    t1_optical: float = 164e-6
    t2_optical: float = 132e-6
    t2_spin: float = 500e-6
    branching: Any = None

    def __post_init__(self):
        for name in ("t1_optical", "t2_optical", "t2_spin"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.t2_optical > 2 * self.t1_optical:
            raise ConfigError("t2_optical cannot exceed 2*t1_optical")
        if self.optical_pure_dephasing < 0:
            raise ConfigError("t2_optical too long to accommodate T1 and spin dephasing")
        if self.branching is not None:
            b = np.asarray(self.branching, dtype=float)
            if b.shape not in ((3,), (3, 3)):
                raise ConfigError("branching must be a 3-vector or 3x3 matrix")
            if np.any(b < 0) or np.any(np.abs(b.sum(axis=-1) - 1.0) > 1e-12):
                raise ConfigError("branching ratios must be nonnegative and sum to 1")
            b = np.broadcast_to(b, (3, 3)).copy()
            b.flags.writeable = False
            object.__setattr__(self, "branching", b)

    @property
    def optical_pure_dephasing(self) -> float:
        """Extra dephasing rate (1/s) so optical coherences decay at 1/T2.

        Population decay contributes 1/(2 T1) and the ground-level dephasing
        operators contribute 1/(2 T2_spin) to each optical coherence.
        """
        return 1 / self.t2_optical - 1 / (2 * self.t1_optical) - 1 / (2 * self.t2_spin)

    def branching_matrix(self, sys: LevelSystem) -> np.ndarray:
        """b[e][g]: fraction of decay from excited e into ground g."""
        if self.branching is not None:
            return np.array(self.branching)
        f = sys.oscillator_strengths.T  # rows: excited
        return f / f.sum(axis=1, keepdims=True)

    def replace(self, **kw) -> "DecoherenceSpec":
        d = dict(
            t1_optical=self.t1_optical,
            t2_optical=self.t2_optical,
            t2_spin=self.t2_spin,
            branching=None if self.branching is None else np.array(self.branching),
        )
        d.update(kw)
        return DecoherenceSpec(**d)


@dataclass(frozen=True)
class EnsembleSpec:
    detuning_fwhm: float = 170e3
    n_members: int = 41
    quadrature: str = "quantile"
    spectator_offsets: tuple[float, ...] = (-2.0e6,)

    def __post_init__(self):
        if self.n_members < 1:
            raise ConfigError("n_members must be >= 1")
        if not self.detuning_fwhm > 0:
            raise ConfigError("detuning_fwhm must be positive")
        if self.quadrature not in ("quantile", "hermite"):
            raise ConfigError(f"unknown quadrature {self.quadrature!r}")
        object.__setattr__(self, "spectator_offsets", tuple(float(x) for x in self.spectator_offsets))

    @property
    def sigma(self) -> float:
        return self.detuning_fwhm * FWHM_TO_SIGMA

    def members(self) -> tuple[np.ndarray, np.ndarray]:
        """Detunings (Hz) and weights of the Gaussian quadrature."""
        n = self.n_members
        if n == 1:
            return np.zeros(1), np.ones(1)
        if self.quadrature == "quantile":
            x = ndtri((np.arange(n) + 0.5) / n) * self.sigma
            x = 0.5 * (x - x[::-1])  # exact antisymmetry
            w = np.full(n, 1.0 / n)
        else:
            nodes, wts = roots_hermite(n)
            x = np.sqrt(2.0) * self.sigma * nodes
            w = wts / wts.sum()
        return x, w

    def band_members(self, halfwidth: float, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Equal-weight quantiles of the Gaussian truncated to +-halfwidth."""
        if n == 1:
            return np.zeros(1), np.ones(1)
        from scipy.stats import norm

        c = norm.cdf(halfwidth / self.sigma)
        u = (1 - c) + (2 * c - 1) * (np.arange(n) + 0.5) / n
        x = ndtri(u) * self.sigma
        x = 0.5 * (x - x[::-1])
        return x, np.full(n, 1.0 / n)

    def single(self) -> "EnsembleSpec":
        return EnsembleSpec(self.detuning_fwhm, 1, self.quadrature, self.spectator_offsets)


_LEVEL_SECTIONS = {"ground", "excited", "oscillator_strengths", "carriers"}
_OTHER_SECTIONS = {"decoherence", "ensemble"}
_TOP_KEYS = {"format", "name"}


def _check_keys(table: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _parse(config: str | Path | Mapping) -> dict:
    if isinstance(config, Mapping):
        return dict(config)
    text = Path(config).read_text() if isinstance(config, Path) else config
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse level config: {exc}") from exc


def load_level_system(config: str | Path | Mapping) -> LevelSystem:
    """Build a validated :class:`LevelSystem` from a TOML document.

    ``config`` may be TOML text, a path, or an already parsed mapping.
    Omitting ``ground.aux`` places aux 17.3 MHz beyond |1>; the applied
    default is recorded in ``defaults_applied``.
    """
    doc = _parse(config)
    _check_keys(doc, _LEVEL_SECTIONS | _OTHER_SECTIONS | _TOP_KEYS, "document")
    if "format" in doc and doc["format"] != FORMAT_TAG:
        raise ConfigError(f"unsupported format {doc['format']!r}")
    for section in ("ground", "excited", "oscillator_strengths"):
        if section not in doc:
            raise ConfigError(f"missing required table [{section}]")

    defaults = []
    ground = doc["ground"]
    _check_keys(ground, set(GROUND_LABELS), "[ground]")
    for label in ("zero", "one"):
        if label not in ground:
            raise ConfigError(f"missing ground.{label}")
    g_one, g_zero = float(ground["one"]), float(ground["zero"])
    if "aux" in ground:
        g_aux = float(ground["aux"])
    else:
        side = np.sign(g_one - g_zero) or -1.0
        g_aux = g_one + side * AUX_DEFAULT_OFFSET
        defaults.append(f"ground.aux = {g_aux!r} Hz")

    excited = doc["excited"]
    _check_keys(excited, set(EXCITED_LABELS), "[excited]")
    missing = [k for k in EXCITED_LABELS if k not in excited]
    if missing:
        raise ConfigError(f"missing excited energies {missing}")

    osc = doc["oscillator_strengths"]
    _check_keys(osc, set(GROUND_LABELS), "[oscillator_strengths]")
    missing = [k for k in GROUND_LABELS if k not in osc]
    if missing:
        raise ConfigError(f"missing oscillator strength rows {missing}")
    f = np.array([osc[g] for g in GROUND_LABELS], dtype=float)

    carriers = doc.get("carriers", {})
    _check_keys(carriers, {"qubit_excited", "p_offset_Hz", "s_offset_Hz"}, "[carriers]")
    if "qubit_excited" not in carriers:
        defaults.append("carriers.qubit_excited = 'e2'")

    return LevelSystem(
        ground_energies=np.array([g_aux, g_one, g_zero]),
        excited_energies=np.array([float(excited[k]) for k in EXCITED_LABELS]),
        oscillator_strengths=f,
        qubit_excited_label=carriers.get("qubit_excited", "e2"),
        carrier_p_Hz=float(carriers.get("p_offset_Hz", 0.0)),
        carrier_s_Hz=float(carriers.get("s_offset_Hz", 0.0)),
        name=str(doc.get("name", "")),
        defaults_applied=tuple(defaults),
    )


def load_decoherence(config: str | Path | Mapping) -> DecoherenceSpec:
    table = _parse(config).get("decoherence", {})
    _check_keys(table, {"t1_optical", "t2_optical", "t2_spin", "branching"}, "[decoherence]")
    return DecoherenceSpec(**table)


def load_ensemble(config: str | Path | Mapping) -> EnsembleSpec:
    table = _parse(config).get("ensemble", {})
    _check_keys(
        table, {"detuning_fwhm", "n_members", "quadrature", "spectator_offsets"}, "[ensemble]"
    )
    return EnsembleSpec(**table)


def default_config_text() -> str:
    return resources.files("stapulse").joinpath("data/pr_yso.toml").read_text()


def default_level_system() -> LevelSystem:
    return load_level_system(default_config_text())
