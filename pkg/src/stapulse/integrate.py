"""Dormand-Prince 5(4) integrator with PI step-size control.

Works on arrays of any shape; the leading axis may be a batch of independent
systems that share one step size. The error norm is the RMS over each batch
member, maximised over members, so a batch of one reproduces the unbatched
step sequence exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Butcher tableau (Dormand & Prince 1980).
C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
E = B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, t: float):
        super().__init__(f"{msg} at t = {t:.6e} s")
        self.msg = msg
        self.t = t


@dataclass
class SolverStats:
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0


def _norm(err: np.ndarray, batched: bool) -> float:
    e2 = np.abs(err) ** 2
    if batched:
        return float(np.sqrt(e2.reshape(e2.shape[0], -1).mean(axis=1)).max())
    return float(np.sqrt(e2.mean()))


def dopri5(
    f,
    t0: float,
    t1: float,
    y0: np.ndarray,
    *,
    rtol: float = 1e-6,
    atol: float = 1e-6,
    max_step: float = np.inf,
    first_step: float | None = None,
    batched: bool = False,
    t_eval=None,
    on_step=None,
):
    """Integrate dy/dt = f(t, y) from t0 to t1.

    Returns ``(y1, stats)`` or, when ``t_eval`` is given, ``(y1, stats, ys)``
    with ``ys`` sampled by cubic Hermite interpolation between accepted steps.
    ``on_step(t, y)`` is called after every accepted step.
    """
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    t = float(t0)
    span = float(t1) - t
    stats = SolverStats()
    if span == 0:
        return (y, stats) if t_eval is None else (y, stats, np.array([y] * len(t_eval)))
    direction = np.sign(span)
    k1 = f(t, y)
    stats.evaluations += 1

    if first_step is None:
        scale = atol + rtol * np.abs(y)
        d0 = _norm(y / scale, batched)
        d1 = _norm(k1 / scale, batched)
        h = 1e-6 * abs(span) if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h = min(h, abs(span), max_step)
    else:
        h = min(first_step, abs(span), max_step)

    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        out = np.empty((len(t_eval),) + y.shape, dtype=y.dtype)
        next_eval = 0
        while next_eval < len(t_eval) and t_eval[next_eval] <= t:
            out[next_eval] = y
            next_eval += 1

    err_old = 1e-4
    h_min = 16 * np.finfo(float).eps * max(abs(t0), abs(t1))
    k = [None] * 7
    while (t1 - t) * direction > 0:
        if h < h_min:
            raise IntegrationError("step size underflow", t)
        step = direction * min(h, abs(t1 - t))
        last = abs(t1 - t) <= h
        k[0] = k1
        for i in range(1, 7):
            yi = y + step * sum(a * kj for a, kj in zip(A[i], k[:i]) if a != 0)
            k[i] = f(t + C[i] * step, yi)
        stats.evaluations += 6
        y_new = yi  # seventh stage point equals the 5th-order solution (FSAL)
        err_vec = step * sum(e * kj for e, kj in zip(E, k) if e != 0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(invalid="ignore", over="ignore"):
            err = _norm(err_vec / scale, batched)
        if not np.isfinite(err):
            raise IntegrationError("non-finite error estimate", t)
        if err <= 1.0:
            t_new = t1 if last else t + step
            if t_eval is not None:
                while next_eval < len(t_eval) and (t_eval[next_eval] - t_new) * direction <= 0:
                    s = (t_eval[next_eval] - t) / step
                    h00 = 2 * s**3 - 3 * s**2 + 1
                    h10 = s**3 - 2 * s**2 + s
                    h01 = -2 * s**3 + 3 * s**2
                    h11 = s**3 - s**2
                    out[next_eval] = h00 * y + h10 * step * k1 + h01 * y_new + h11 * step * k[6]
                    next_eval += 1
            t, y, k1 = t_new, y_new, k[6]
            stats.accepted += 1
            if on_step is not None:
                on_step(t, y)
            fac = SAFETY * max(err, 1e-10) ** -ALPHA * err_old**BETA
            h = abs(step) * min(FAC_MAX, max(FAC_MIN, fac))
            err_old = max(err, 1e-4)
        else:
            stats.rejected += 1
            h = abs(step) * max(FAC_MIN, SAFETY * err**-ALPHA)
        h = min(h, max_step)
    if t_eval is not None:
        return y, stats, out
    return y, stats
