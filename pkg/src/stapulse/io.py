"""Pulse files and run manifests.

Pulse file (text, ``stapulse-pulse/1``)::

    # stapulse-pulse/1
    # theta = 1.5707963267948966
    # phi = 0.0
    # phi_s = 0.0
    # t_f = 4e-06
    # dt = 3.9100684261974585e-09
    # a_1 = ...            (a_1..a_8, only when coefficients are known)
    # reversed = false
    # interchanged = false
    time_s  omega_p_rad_s  omega_s_rad_s
    0.0     0.0            0.0
    ...

Floats are written with ``repr`` so a write/read cycle is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .invariant import AnsatzCoefficients, SampledPulsePair

PULSE_FORMAT = "stapulse-pulse/1"
MANIFEST_FORMAT = "stapulse-manifest/1"
_COLUMNS = ("time_s", "omega_p_rad_s", "omega_s_rad_s")
_BOOL = {"true": True, "false": False}


class FormatError(ValueError):
    pass


def pulses_to_text(p: SampledPulsePair, coeffs: AnsatzCoefficients | None = None) -> str:
    if np.iscomplexobj(p.omega_p) or np.iscomplexobj(p.omega_s):
        raise ValueError("pulse files hold real envelopes only")
    theta = coeffs.theta if coeffs is not None else p.meta.get("theta", float("nan"))
    lines = [f"# {PULSE_FORMAT}"]
    header = {"theta": float(theta), "phi": p.phi, "phi_s": p.phi_s, "t_f": p.t_f, "dt": p.dt}
    a = coeffs.a if coeffs is not None else p.meta.get("a")
    if a is not None:
        header.update({f"a_{i + 1}": float(v) for i, v in enumerate(a)})
    for k, v in header.items():
        lines.append(f"# {k} = {float(v)!r}")
    for k in ("reversed", "interchanged"):
        lines.append(f"# {k} = {'true' if p.meta.get(k) else 'false'}")
    lines.append("\t".join(_COLUMNS))
    for t, op, os_ in zip(p.times, p.omega_p, p.omega_s):
        lines.append(f"{float(t)!r}\t{float(op)!r}\t{float(os_)!r}")
    return "\n".join(lines) + "\n"


def pulses_from_text(text: str) -> tuple[SampledPulsePair, AnsatzCoefficients | None]:
    rows = text.splitlines()
    if not rows or rows[0].strip() != f"# {PULSE_FORMAT}":
        raise FormatError(f"missing '# {PULSE_FORMAT}' header")
    header: dict[str, str] = {}
    i = 1
    while i < len(rows) and rows[i].startswith("#"):
        key, sep, val = rows[i][1:].partition("=")
        if not sep:
            raise FormatError(f"bad header line {i + 1}: {rows[i]!r}")
        header[key.strip()] = val.strip()
        i += 1
    if i >= len(rows) or tuple(rows[i].split()) != _COLUMNS:
        raise FormatError(f"expected column line {' '.join(_COLUMNS)}")
    try:
        data = np.array([[float(x) for x in r.split()] for r in rows[i + 1:] if r.strip()])
        meta = {k: float(header[k]) for k in ("theta", "phi", "phi_s", "t_f", "dt")}
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed pulse file: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != 3:
        raise FormatError("pulse table must have three columns")
    flags = {k: _BOOL.get(header.get(k, "false"), False) for k in ("reversed", "interchanged")}
    a = None
    if all(f"a_{n}" in header for n in range(1, 9)):
        a = tuple(float(header[f"a_{n}"]) for n in range(1, 9))
    pair = SampledPulsePair(
        dt=meta["dt"],
        omega_p=data[:, 1],
        omega_s=data[:, 2],
        phi=meta["phi"],
        t_f=meta["t_f"],
        phi_s=meta["phi_s"],
        meta={"theta": meta["theta"], "a": a, **flags},
    )
    coeffs = None
    if a is not None and np.isfinite(meta["theta"]):
        coeffs = AnsatzCoefficients(a, meta["t_f"], meta["theta"], meta["phi"])
    return pair, coeffs


def write_pulses(path: str | Path, p: SampledPulsePair, coeffs: AnsatzCoefficients | None = None) -> None:
    Path(path).write_text(pulses_to_text(p, coeffs))


def read_pulses(path: str | Path) -> tuple[SampledPulsePair, AnsatzCoefficients | None]:
    return pulses_from_text(Path(path).read_text())


# -- manifests --------------------------------------------------------------


def sha256_of(data: bytes | str | Path) -> str:
    if isinstance(data, Path):
        data = data.read_bytes()
    elif isinstance(data, str):
        data = data.encode()
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    command: str
    seed: int | None = None
    config_digests: dict[str, str] = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)  # path -> sha256
    tool_version: str = __version__
    wall_time_s: float = 0.0
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add_config(self, name: str, content: bytes | str | Path) -> None:
        self.config_digests[name] = sha256_of(content)

    def add_output(self, path: str | Path) -> None:
        self.outputs[str(path)] = sha256_of(Path(path))

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "command": self.command,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "config_digests": self.config_digests,
            "settings": self.settings,
            "outputs": self.outputs,
            "wall_time_s": self.wall_time_s,
        }

    def write(self, path: str | Path) -> None:
        self.wall_time_s = round(time.perf_counter() - self._t0, 3)
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def read_manifest(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MANIFEST_FORMAT:
        raise FormatError("not a run manifest")
    return doc
