"""Invariant-based inverse engineering of the two-tone Lambda pulses.

The auxiliary angles are

    gamma(t) = pi t / t_f + sum_n a_n sin(n pi t / t_f)
    beta(t)  = (pi - theta) / 2 * (1 - cos gamma(t))

and the Rabi envelopes follow from requiring that the zero-eigenvalue
eigenvector of the invariant solves the Schrodinger equation. Everything here
uses hbar = 1, so Hamiltonians and the invariant are in rad/s.

Three-level vectors are ordered (|1>, |e>, |0>).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TABLE1 = {
    1: (-0.9911, -0.5120, 0.4216, 0.1530, 0.0056, -0.0350, -0.0431, -0.0472),
    2: (-1.0368, -0.4374, 0.2435, -0.0359, -0.0008, 0.0284, 0.0443, -0.0190),
    3: (-0.9672, -0.3908, 0.1210, 0.1057, -0.0242, -0.0625, 0.1036, -0.0333),
}
"""Reference a_1..a_8 for the three standard transfers (t_f = 4 us)."""

TABLE1_ANGLES = {1: (np.pi / 2, 0.0), 2: (np.pi / 4, 0.0), 3: (np.pi / 4, 0.0)}

DEFAULT_TF = 4e-6
DEFAULT_SAMPLES = 1024
MIN_INTERVALS = 64
CONSTRAINT_TOL = 1e-3

_N = np.arange(1, 9)


class ConstraintError(ValueError):
    """Coefficients do not give zero-amplitude pulse endpoints."""


@dataclass(frozen=True)
class AnsatzCoefficients:
    a: tuple[float, ...]
    t_f: float = DEFAULT_TF
    theta: float = np.pi / 2
    phi: float = 0.0

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if len(a) != 8:
            raise ValueError("expected eight coefficients a_1..a_8")
        object.__setattr__(self, "a", a)
        if not self.t_f > 0:
            raise ValueError("t_f must be positive")
        if not 0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")
        object.__setattr__(self, "phi", float(self.phi) % (2 * np.pi))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.a)

    def constraint_residuals(self) -> tuple[float, float]:
        """Residuals of the odd and even endpoint conditions.

        a_1 + 3a_3 + 5a_5 + 7a_7 = 0 and a_2 + 2a_4 + 3a_6 + 4a_8 = -1/2
        together make d(gamma)/dt vanish at both ends.
        """
        a = self.a
        odd = a[0] + 3 * a[2] + 5 * a[4] + 7 * a[6]
        even = a[1] + 2 * a[3] + 3 * a[5] + 4 * a[7] + 0.5
        return odd, even

    def satisfies_constraints(self, tol: float = CONSTRAINT_TOL) -> bool:
        return all(abs(r) <= tol for r in self.constraint_residuals())

    def check_constraints(self, tol: float = CONSTRAINT_TOL) -> None:
        odd, even = self.constraint_residuals()
        if abs(odd) > tol:
            raise ConstraintError(
                f"a_1 + 3a_3 + 5a_5 + 7a_7 = {odd:.6g}, must be 0 (tolerance {tol})"
            )
        if abs(even) > tol:
            raise ConstraintError(
                f"a_2 + 2a_4 + 3a_6 + 4a_8 = {even - 0.5:.6g}, must be -0.5 (tolerance {tol})"
            )

    def projected(self) -> "AnsatzCoefficients":
        """Re-solve a_7 and a_8 so both endpoint conditions hold exactly."""
        return from_free(self.a[:6], t_f=self.t_f, theta=self.theta, phi=self.phi)

    @property
    def free(self) -> np.ndarray:
        return np.array(self.a[:6])

    def with_angles(self, theta: float | None = None, phi: float | None = None):
        return replace(
            self,
            theta=self.theta if theta is None else theta,
            phi=self.phi if phi is None else phi,
        )


def solve_eliminated(free) -> tuple[float, float]:
    a1, a2, a3, a4, a5, a6 = map(float, free)
    a7 = -(a1 + 3 * a3 + 5 * a5) / 7
    a8 = (-0.5 - a2 - 2 * a4 - 3 * a6) / 4
    return a7, a8


def from_free(free, t_f=DEFAULT_TF, theta=np.pi / 2, phi=0.0) -> AnsatzCoefficients:
    """Coefficients from the six free values a_1..a_6."""
    free = [float(x) for x in free]
    if len(free) != 6:
        raise ValueError("expected six free coefficients")
    return AnsatzCoefficients(tuple(free) + solve_eliminated(free), t_f, theta, phi)


def table1_case(case: int, *, theta=None, phi=None, project: bool = True) -> AnsatzCoefficients:
    """Reference coefficients for case 1, 2 or 3.

    The printed four-digit values meet the endpoint conditions only to about
    2e-4; ``project=True`` re-solves a_7, a_8 so synthesised endpoints are
    exactly zero.
    """
    th, ph = TABLE1_ANGLES[case]
    c = AnsatzCoefficients(
        TABLE1[case],
        DEFAULT_TF,
        th if theta is None else theta,
        ph if phi is None else phi,
    )
    return c.projected() if project else c


def _check_time(a: AnsatzCoefficients, t):
    t = np.asarray(t, dtype=float)
    slack = 1e-12 * a.t_f
    if np.any(t < -slack) or np.any(t > a.t_f + slack):
        raise ValueError(f"time outside [0, t_f = {a.t_f}]")
    return np.clip(t, 0.0, a.t_f)


def _phase(a, t):
    return np.multiply.outer(np.asarray(t), _N) * (np.pi / a.t_f)


def gamma(a: AnsatzCoefficients, t):
    t = _check_time(a, t)
    return np.pi * t / a.t_f + np.sin(_phase(a, t)) @ a.array


def gamma_dot(a: AnsatzCoefficients, t):
    t = _check_time(a, t)
    return (np.pi / a.t_f) * (1.0 + np.cos(_phase(a, t)) @ (_N * a.array))


def beta(a: AnsatzCoefficients, t):
    return 0.5 * (np.pi - a.theta) * (1.0 - np.cos(gamma(a, t)))


def beta_dot(a: AnsatzCoefficients, t):
    return 0.5 * (np.pi - a.theta) * np.sin(gamma(a, t)) * gamma_dot(a, t)


def rabi(a: AnsatzCoefficients, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (Omega_p, Omega_s) in rad/s."""
    g, gd = gamma(a, t), gamma_dot(a, t)
    b = 0.5 * (np.pi - a.theta) * (1.0 - np.cos(g))
    k = np.pi - a.theta
    omega_p = -gd * (k * np.cos(g) * np.sin(b) + 2 * np.cos(b))
    omega_s = -gd * (k * np.cos(g) * np.cos(b) - 2 * np.sin(b))
    return omega_p, omega_s


@dataclass(frozen=True)
class SampledPulsePair:
    """Signed envelopes on a uniform grid.

    Envelopes are real for shortcut pulses; complex arrays (chirped
    tomography pulses) are accepted and carry their own phase.

    ``phi`` is the constant phase on the p tone (|1> <-> |e>) and ``phi_s``
    the phase on the s tone (|0> <-> |e>); the latter is only nonzero after
    :func:`interchange_pulses`.
    """

    dt: float
    omega_p: np.ndarray
    omega_s: np.ndarray
    phi: float = 0.0
    t_f: float = DEFAULT_TF
    phi_s: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        kind = complex if np.iscomplexobj(self.omega_p) or np.iscomplexobj(self.omega_s) else float
        p = np.array(self.omega_p, dtype=kind)
        s = np.array(self.omega_s, dtype=kind)
        if p.shape != s.shape or p.ndim != 1 or p.size < 2:
            raise ValueError("omega_p and omega_s must be 1-D arrays of equal length")
        if abs((p.size - 1) * self.dt - self.t_f) > 1e-12 * max(self.t_f, 1e-30) + 1e-18:
            raise ValueError("t_f must equal (len - 1) * dt")
        p.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "omega_p", p)
        object.__setattr__(self, "omega_s", s)

    @property
    def n_samples(self) -> int:
        return self.omega_p.size

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_samples) * self.dt
        t[-1] = self.t_f
        return t

    @property
    def peak(self) -> float:
        return float(max(np.abs(self.omega_p).max(), np.abs(self.omega_s).max()))

    def endpoint_zero(self, rel: float = 1e-6) -> bool:
        ends = np.abs([self.omega_p[0], self.omega_p[-1], self.omega_s[0], self.omega_s[-1]])
        return bool(np.all(ends <= rel * max(self.peak, 1e-300)))

    def at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Linearly interpolated envelopes; zero outside [0, t_f]."""
        x = self.times
        return (
            np.interp(t, x, self.omega_p, left=0.0, right=0.0),
            np.interp(t, x, self.omega_s, left=0.0, right=0.0),
        )

    def scaled(self, p: float = 1.0, s: float = 1.0) -> "SampledPulsePair":
        return replace(self, omega_p=self.omega_p * p, omega_s=self.omega_s * s)

    def equals(self, other: "SampledPulsePair") -> bool:
        return (
            self.dt == other.dt
            and self.t_f == other.t_f
            and self.phi == other.phi
            and self.phi_s == other.phi_s
            and np.array_equal(self.omega_p, other.omega_p)
            and np.array_equal(self.omega_s, other.omega_s)
        )


def synthesize_pulses(
    a: AnsatzCoefficients, dt: float | None = None, *, n_samples: int = DEFAULT_SAMPLES
) -> SampledPulsePair:
    """Sample the closed-form envelopes on a uniform grid.

    Either ``dt`` (which must divide t_f) or ``n_samples`` fixes the grid. The
    grid must resolve the eighth harmonic with at least eight points per
    period, i.e. at least 64 intervals.
    """
    if dt is not None:
        n = int(round(a.t_f / dt))
        if n < 1 or abs(n * dt - a.t_f) > 1e-9 * a.t_f:
            raise ValueError(f"dt = {dt} does not divide t_f = {a.t_f}")
    else:
        n = n_samples - 1
    if n < MIN_INTERVALS:
        raise ValueError(
            f"grid too coarse: {n} intervals, need >= {MIN_INTERVALS} (dt <= t_f/64)"
        )
    t = np.arange(n + 1) * (a.t_f / n)
    t[-1] = a.t_f
    omega_p, omega_s = rabi(a, t)
    pair = SampledPulsePair(
        dt=a.t_f / n,
        omega_p=omega_p,
        omega_s=omega_s,
        phi=a.phi,
        t_f=a.t_f,
        meta={"theta": a.theta, "a": a.a},
    )
    pair.meta["endpoint_zero"] = pair.endpoint_zero()
    return pair


def square_pulses(
    omega_p: float, omega_s: float, t_f: float = DEFAULT_TF, *, n_samples: int = DEFAULT_SAMPLES
) -> SampledPulsePair:
    """Constant two-tone envelopes switched on for the full [0, t_f]."""
    n = n_samples - 1
    return SampledPulsePair(
        dt=t_f / n,
        omega_p=np.full(n + 1, float(omega_p)),
        omega_s=np.full(n + 1, float(omega_s)),
        t_f=t_f,
        meta={"square": True},
    )


def square_reference(p: SampledPulsePair, *, pi_area: bool = False) -> SampledPulsePair:
    """Square pulses matching ``p`` in duration and per-tone peak |Omega|.

    With ``pi_area`` each tone instead has pulse area pi over the same duration.
    """
    if pi_area:
        return square_pulses(np.pi / p.t_f, np.pi / p.t_f, p.t_f, n_samples=p.n_samples)
    return square_pulses(
        np.abs(p.omega_p).max(), np.abs(p.omega_s).max(), p.t_f, n_samples=p.n_samples
    )


def reverse_pulses(p: SampledPulsePair) -> SampledPulsePair:
    """Omega'(t) = -Omega(t_f - t): retraces the forward transfer backwards."""
    meta = dict(p.meta)
    meta["reversed"] = not meta.get("reversed", False)
    return replace(p, omega_p=-p.omega_p[::-1], omega_s=-p.omega_s[::-1], meta=meta)


def interchange_pulses(p: SampledPulsePair) -> SampledPulsePair:
    """Swap envelopes and phases of the two tones (|0> -> |1> from |1> -> |0>)."""
    meta = dict(p.meta)
    meta["interchanged"] = not meta.get("interchanged", False)
    return replace(
        p, omega_p=p.omega_s, omega_s=p.omega_p, phi=p.phi_s, phi_s=p.phi, meta=meta
    )


def lambda_hamiltonian(omega_p, omega_s, phi: float = 0.0, phi_s: float = 0.0) -> np.ndarray:
    """Resonant three-level RWA Hamiltonian (rad/s), basis (|1>, |e>, |0>).

    Broadcasts over leading dimensions of the envelope arrays.
    """
    omega_p = np.asarray(omega_p)
    omega_s = np.asarray(omega_s)
    h = np.zeros(np.broadcast_shapes(omega_p.shape, omega_s.shape) + (3, 3), dtype=complex)
    # ground -> excited elements carry the complex envelope, as in the
    # six-level model; the excited -> ground ones are their conjugates
    h[..., 0, 1] = -0.5 * omega_p * np.exp(1j * phi)
    h[..., 2, 1] = -0.5 * omega_s * np.exp(1j * phi_s)
    h[..., 1, 0] = np.conj(h[..., 0, 1])
    h[..., 1, 2] = np.conj(h[..., 2, 1])
    return h


def eigenstate_phi0(a: AnsatzCoefficients, t) -> np.ndarray:
    """Zero-eigenvalue eigenvector of the invariant (also a dynamical solution)."""
    g, b = gamma(a, t), beta(a, t)
    return np.stack(
        [
            np.cos(g) * np.cos(b) * np.exp(1j * a.phi),
            -1j * np.sin(g),
            -np.cos(g) * np.sin(b) + 0j,
        ],
        axis=-1,
    )


def _eigenstate_pm(g, b, phi, sign):
    e = np.exp(1j * phi)
    return np.stack(
        [
            (np.sin(b) - sign * 1j * np.sin(g) * np.cos(b)) * e,
            sign * np.cos(g) + 0j,
            np.cos(b) + sign * 1j * np.sin(g) * np.sin(b),
        ],
        axis=-1,
    ) / np.sqrt(2)


def _eigenstate_pm_dot(g, b, gd, bd, phi, sign):
    e = np.exp(1j * phi)
    dg = np.stack(
        [
            -sign * 1j * np.cos(g) * np.cos(b) * e,
            -sign * np.sin(g) + 0j,
            sign * 1j * np.cos(g) * np.sin(b),
        ],
        axis=-1,
    )
    db = np.stack(
        [
            (np.cos(b) + sign * 1j * np.sin(g) * np.sin(b)) * e,
            np.zeros_like(g) + 0j,
            -np.sin(b) + sign * 1j * np.sin(g) * np.cos(b),
        ],
        axis=-1,
    )
    return (dg * gd[..., None] + db * bd[..., None]) / np.sqrt(2)


def eigenstate(a: AnsatzCoefficients, t, n: int) -> np.ndarray:
    """Invariant eigenvector with eigenvalue n * Omega_0 / 2, n in {0, +1, -1}."""
    if n == 0:
        return eigenstate_phi0(a, t)
    if n not in (1, -1):
        raise ValueError("eigenstate index must be 0, +1 or -1")
    return _eigenstate_pm(gamma(a, t), beta(a, t), a.phi, n)


@dataclass(frozen=True)
class InvariantSpec:
    coefficients: AnsatzCoefficients
    omega0: float = 1.0

    def __post_init__(self):
        if self.omega0 == 0:
            raise ValueError("omega0 must be nonzero")

    def gamma_fn(self, t):
        return gamma(self.coefficients, t)

    def beta_fn(self, t):
        return beta(self.coefficients, t)


def _invariant_from_angles(g, b, phi, omega0):
    e = np.exp(1j * phi)
    m = np.zeros(np.shape(g) + (3, 3), dtype=complex)
    m[..., 0, 1] = np.cos(g) * np.sin(b) * e
    m[..., 0, 2] = -1j * np.sin(g) * e
    m[..., 1, 2] = np.cos(g) * np.cos(b)
    m = m + np.conj(np.swapaxes(m, -1, -2))
    return 0.5 * omega0 * m


def _invariant_dot(g, b, gd, bd, phi, omega0):
    e = np.exp(1j * phi)
    gd, bd = np.asarray(gd), np.asarray(bd)
    m = np.zeros(np.shape(g) + (3, 3), dtype=complex)
    m[..., 0, 1] = (-np.sin(g) * np.sin(b) * gd + np.cos(g) * np.cos(b) * bd) * e
    m[..., 0, 2] = -1j * np.cos(g) * gd * e
    m[..., 1, 2] = -np.sin(g) * np.cos(b) * gd - np.cos(g) * np.sin(b) * bd
    m = m + np.conj(np.swapaxes(m, -1, -2))
    return 0.5 * omega0 * m


def invariant_matrix(spec: InvariantSpec, t) -> np.ndarray:
    """The invariant I(t) in rad/s; eigenvalues 0 and +-omega0/2."""
    a = spec.coefficients
    return _invariant_from_angles(gamma(a, t), beta(a, t), a.phi, spec.omega0)


def verify_invariant_condition(
    a: AnsatzCoefficients,
    grid=None,
    *,
    omega0: float = 1.0,
    pulses: SampledPulsePair | None = None,
) -> float:
    """Max normalised residual of dI/dt + (1/i)[I, H] over the grid.

    H is built from ``pulses`` (sampled at its own grid) when given, else from
    freshly synthesised pulses on ``grid`` (default: 1024 points).
    """
    if pulses is not None:
        t = pulses.times
        omega_p, omega_s = pulses.omega_p, pulses.omega_s
        phi, phi_s = pulses.phi, pulses.phi_s
    else:
        t = np.linspace(0, a.t_f, DEFAULT_SAMPLES) if grid is None else np.asarray(grid, float)
        omega_p, omega_s = rabi(a, t)
        phi, phi_s = a.phi, 0.0
    g, gd = gamma(a, t), gamma_dot(a, t)
    b = 0.5 * (np.pi - a.theta) * (1 - np.cos(g))
    bd = 0.5 * (np.pi - a.theta) * np.sin(g) * gd
    inv = _invariant_from_angles(g, b, a.phi, omega0)
    dinv = _invariant_dot(g, b, gd, bd, a.phi, omega0)
    h = lambda_hamiltonian(omega_p, omega_s, phi, phi_s)
    resid = dinv - 1j * (inv @ h - h @ inv)
    norms = np.linalg.norm(resid, axis=(-2, -1))
    return float(norms.max() / (abs(omega0) / a.t_f))


def lr_phase(a: AnsatzCoefficients, n: int, grid=None, *, method: str = "simpson") -> float:
    """Lewis-Riesenfeld phase of eigenstate n accumulated over ``grid``.

    The integrand <phi_n| i d/dt - H |phi_n> uses analytic derivatives of the
    eigenvectors and the closed-form Rabi envelopes. For n = 0 it vanishes
    identically.
    """
    from scipy.integrate import simpson, trapezoid

    t = np.linspace(0, a.t_f, DEFAULT_SAMPLES) if grid is None else np.asarray(grid, float)
    if t.size < 2:
        return 0.0
    g, gd = gamma(a, t), gamma_dot(a, t)
    b = 0.5 * (np.pi - a.theta) * (1 - np.cos(g))
    bd = 0.5 * (np.pi - a.theta) * np.sin(g) * gd
    if n == 0:
        e = np.exp(1j * a.phi)
        v = np.stack([np.cos(g) * np.cos(b) * e, -1j * np.sin(g), -np.cos(g) * np.sin(b) + 0j], -1)
        vd = np.stack(
            [
                (-np.sin(g) * np.cos(b) * gd - np.cos(g) * np.sin(b) * bd) * e,
                -1j * np.cos(g) * gd,
                np.sin(g) * np.sin(b) * gd - np.cos(g) * np.cos(b) * bd + 0j,
            ],
            -1,
        )
    elif n in (1, -1):
        v = _eigenstate_pm(g, b, a.phi, n)
        vd = _eigenstate_pm_dot(g, b, gd, bd, a.phi, n)
    else:
        raise ValueError("eigenstate index must be 0, +1 or -1")
    omega_p, omega_s = rabi(a, t)
    h = lambda_hamiltonian(omega_p, omega_s, a.phi)
    hv = np.einsum("...ij,...j->...i", h, v)
    integrand = np.real(np.sum(np.conj(v) * (1j * vd - hv), axis=-1))
    if method == "simpson":
        return float(simpson(integrand, x=t))
    if method == "trapezoid":
        return float(trapezoid(integrand, x=t))
    raise ValueError(f"unknown quadrature {method!r}")
