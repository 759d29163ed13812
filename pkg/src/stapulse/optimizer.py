"""Search of the free ansatz coefficients a_1..a_6.

The score of a candidate is the band-averaged squared Frobenius distance
between the simulated and target qubit-block density matrices plus a linear
penalty on excitation of spectator ions. a_7 and a_8 are always solved from
the endpoint conditions, so every candidate gives zero-amplitude endpoints.

Search: seeded simulated annealing with Gaussian proposals, then a bounded
Nelder-Mead refinement started from the annealing optimum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import QUBIT, Model, _lindblad_batch, member_fidelities, spectator_excitation, target_state
from .integrate import IntegrationError
from .invariant import AnsatzCoefficients, from_free, synthesize_pulses

N_FREE = 6


class OptimizationError(RuntimeError):
    pass


class BoundaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ScoreSpec:
    band_halfwidth: float = 500e3  # Hz
    band_samples: int = 9
    spectator_weight: float = 1.0
    target: np.ndarray | None = field(default=None, repr=False)  # 6x6 projector; None = from theta, phi

    def __post_init__(self):
        if not self.band_halfwidth > 0:
            raise ValueError("band_halfwidth must be positive")
        if self.band_samples < 1:
            raise ValueError("band_samples must be >= 1")
        if self.spectator_weight < 0:
            raise ValueError("spectator_weight must be >= 0")
        if self.target is not None:
            t = np.asarray(self.target, dtype=complex)
            if t.shape != (6, 6) or not np.allclose(t, t.conj().T, atol=1e-12) \
                    or not np.allclose(t @ t, t, atol=1e-9) or abs(np.trace(t).real - 1) > 1e-9:
                raise ValueError("target must be a 6x6 pure-state projector")
            object.__setattr__(self, "target", t)

    def target_for(self, a: AnsatzCoefficients) -> np.ndarray:
        if self.target is not None:
            return self.target
        psi = target_state(a.theta, a.phi)
        return np.outer(psi, psi.conj())


@dataclass(frozen=True)
class OptimizerSettings:
    sa_iterations: int = 150
    sa_initial_temperature: float = 0.02
    sa_cooling: float = 0.97  # geometric factor per iteration
    step_scale: float = 0.05
    simplex_tol: float = 1e-4
    simplex_max_evals: int = 150
    seed: int = 0
    bounds: tuple[tuple[float, float], ...] = ((-1.5, 1.5),) * N_FREE

    def __post_init__(self):
        if self.sa_iterations < 0 or self.simplex_max_evals < 0:
            raise ValueError("iteration budgets must be >= 0")
        if not (self.sa_initial_temperature > 0 and 0 < self.sa_cooling <= 1
                and self.step_scale > 0 and self.simplex_tol > 0):
            raise ValueError("annealing and simplex settings must be positive")
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(b) != N_FREE or any(not lo < hi for lo, hi in b):
            raise ValueError("bounds must be six nonempty (lo, hi) intervals")
        object.__setattr__(self, "bounds", b)


@dataclass
class OptimizationResult:
    best: AnsatzCoefficients
    best_score: float
    history: list[float]  # best-so-far after every evaluation (monotone)
    scores: list[float]  # raw score of every evaluation
    n_evals: int
    warning: str | None = None


def band_detunings(spec: ScoreSpec, model: Model):
    return model.ensemble.band_members(spec.band_halfwidth, spec.band_samples)


def score(a: AnsatzCoefficients, spec: ScoreSpec | None = None, model: Model | None = None) -> float:
    """Band-averaged ||rho_q - target_q||_F^2 + spectator_weight * spectator gain."""
    spec = spec or ScoreSpec()
    model = model or Model()
    pulses = synthesize_pulses(a)
    det, w = band_detunings(spec, model)
    rho0 = np.zeros((det.size, 6, 6), complex)
    rho0[:, QUBIT[0], QUBIT[0]] = 1.0
    final = _lindblad_batch(rho0, pulses, model, det)
    q = list(QUBIT)
    tgt = spec.target_for(a)[np.ix_(q, q)]
    diff = final[:, q][:, :, q] - tgt
    dist = np.sum(np.abs(diff) ** 2, axis=(1, 2))
    total = float(w @ dist)
    offsets = model.ensemble.spectator_offsets
    if spec.spectator_weight and offsets:
        total += spec.spectator_weight * spectator_excitation(pulses, model, offsets)
    return total


def band_fidelity(a: AnsatzCoefficients, spec: ScoreSpec | None = None, model: Model | None = None) -> float:
    """Band-averaged fidelity with the target state, starting from |1>."""
    spec = spec or ScoreSpec()
    model = model or Model()
    det, w = band_detunings(spec, model)
    rho0 = np.zeros((det.size, 6, 6), complex)
    rho0[:, QUBIT[0], QUBIT[0]] = 1.0
    final = _lindblad_batch(rho0, synthesize_pulses(a), model, det)
    vals, vecs = np.linalg.eigh(spec.target_for(a))
    psi = vecs[:, np.argmax(vals)]
    return float(w @ member_fidelities(final, psi))


def fidelity_equivalent(s: float) -> float:
    """Infidelity matching a score for a pure target: ||rho - P||^2 ~ 2 (1 - F)."""
    return s / 2


def optimize(
    initial: AnsatzCoefficients,
    spec: ScoreSpec | None = None,
    settings: OptimizerSettings | None = None,
    model: Model | None = None,
    *,
    callback=None,
) -> OptimizationResult:
    """Anneal then refine the free coefficients; deterministic for a given seed."""
    spec = spec or ScoreSpec()
    settings = settings or OptimizerSettings()
    model = model or Model()
    rng = np.random.default_rng(settings.seed)
    lo = np.array([b[0] for b in settings.bounds])
    hi = np.array([b[1] for b in settings.bounds])
    scores: list[float] = []
    history: list[float] = []
    best = {"x": None, "s": math.inf}

    def evaluate(x) -> float:
        x = np.clip(np.asarray(x, dtype=float), lo, hi)
        a = from_free(x, initial.t_f, initial.theta, initial.phi)
        try:
            s = score(a, spec, model)
        except IntegrationError:
            s = math.inf
        scores.append(s)
        if s < best["s"]:
            best["x"], best["s"] = x.copy(), s
        history.append(best["s"])
        if callback is not None:
            callback(len(scores), s, best["s"])
        return s

    x = np.clip(initial.free, lo, hi)
    s = evaluate(x)
    temp = settings.sa_initial_temperature
    for _ in range(settings.sa_iterations):
        scale = settings.step_scale * math.sqrt(temp / settings.sa_initial_temperature)
        cand = np.clip(x + rng.normal(0.0, scale, N_FREE), lo, hi)
        sc = evaluate(cand)
        u = rng.random()
        if sc <= s or (math.isfinite(sc) and u < math.exp(-(sc - s) / temp)):
            x, s = cand, sc
        temp *= settings.sa_cooling

    if settings.simplex_max_evals > 0 and best["x"] is not None:
        start = best["x"]
        simplex = [start] + [
            np.clip(start + settings.step_scale * np.eye(N_FREE)[i], lo, hi)
            if start[i] + settings.step_scale <= hi[i]
            else np.clip(start - settings.step_scale * np.eye(N_FREE)[i], lo, hi)
            for i in range(N_FREE)
        ]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            minimize(
                evaluate, start, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                options={"maxfev": settings.simplex_max_evals, "xatol": settings.simplex_tol,
                         "fatol": settings.simplex_tol * 1e-2, "initial_simplex": np.array(simplex)},
            )

    if best["x"] is None or not math.isfinite(best["s"]):
        raise OptimizationError(f"no feasible evaluation in {len(scores)} attempts")
    msg = None
    on_edge = np.isclose(best["x"], lo, atol=1e-9) | np.isclose(best["x"], hi, atol=1e-9)
    if on_edge.any():
        names = ", ".join(f"a_{i + 1}" for i in np.nonzero(on_edge)[0])
        msg = f"best point lies on the bound box ({names}); optimum may lie outside"
        warnings.warn(msg, BoundaryWarning, stacklevel=2)
    return OptimizationResult(
        from_free(best["x"], initial.t_f, initial.theta, initial.phi),
        best["s"], history, scores, len(scores), msg,
    )


def random_feasible(seed: int, spread: float = 0.5, **angles) -> AnsatzCoefficients:
    """Uniform random free coefficients in [-spread, spread]; a_7, a_8 solved."""
    rng = np.random.default_rng(seed)
    return from_free(rng.uniform(-spread, spread, N_FREE), **angles)
