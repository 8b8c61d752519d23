"""Double-exponential exposure-per-Mbps estimator and its least-squares fit.

    C(t) = f1 * exp(e1 * t) + f2 * exp(e2 * t)

The fit is a damped Gauss-Newton (Levenberg-Marquardt) iteration started from
several deterministic initial guesses. Components are reported fast-first
(larger |e| is component 1) so the swap symmetry of the model is broken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError, FitFailed, InsufficientDataError


@dataclass(frozen=True)
class FitParams:
    f1: float  # V/m per Mbps
    e1: float  # 1/Mbps
    f2: float
    e2: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.f1, self.e1, self.f2, self.e2)):
            raise DomainError("fit parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.f1, self.e1, self.f2, self.e2], dtype=float)

    def normalized(self) -> FitParams:
        if abs(self.e2) > abs(self.e1):
            return FitParams(self.f2, self.e2, self.f1, self.e1)
        return self


# campaign values reported for the reference smartphone
REFERENCE_PARAMS = FitParams(f1=1.146, e1=-0.2595, f2=0.1304, e2=-0.0325)


@dataclass(frozen=True)
class FitResult:
    params: FitParams
    residual_norm: float
    iterations: int
    converged: bool


def estimate_cost(t_ul: float, params: FitParams = REFERENCE_PARAMS) -> float:
    """Estimated exposure per Mbps (V/m/Mbps) at uplink throughput `t_ul`."""
    if t_ul < 0:
        raise DomainError("throughput must be >= 0")
    return params.f1 * math.exp(params.e1 * t_ul) + params.f2 * math.exp(params.e2 * t_ul)


def estimate_exposure(t_ul: float, params: FitParams = REFERENCE_PARAMS) -> float:
    """Estimated total field (V/m) at throughput `t_ul`."""
    return estimate_cost(t_ul, params) * t_ul


def _model(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    return p[0] * np.exp(p[1] * t) + p[2] * np.exp(p[3] * t)


def _jacobian(p: np.ndarray, t: np.ndarray) -> np.ndarray:
    x1, x2 = np.exp(p[1] * t), np.exp(p[3] * t)
    return np.column_stack([x1, p[0] * t * x1, x2, p[2] * t * x2])


def _lm(p0: np.ndarray, t: np.ndarray, y: np.ndarray, w: np.ndarray, max_iter: int,
        tol: float) -> tuple[np.ndarray, float, int, bool]:
    p = p0.astype(float).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        r = (_model(p, t) - y) / w
    cost = float(r @ r)
    if not math.isfinite(cost):
        return p, math.inf, 0, False
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = _jacobian(p, t) / w[:, None]
        A = J.T @ J
        g = J.T @ r
        if np.max(np.abs(g)) <= tol * tol * max(cost, 1e-300):
            return p, cost, it, True
        diag = np.maximum(np.diag(A), 1e-300)
        improved = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = p + step
            with np.errstate(over="ignore", invalid="ignore"):
                r_new = (_model(cand, t) - y) / w
                new_cost = float(r_new @ r_new)
            if math.isfinite(new_cost) and new_cost <= cost:
                small_step = np.all(np.abs(step) <= tol * (np.abs(p) + tol))
                small_gain = cost - new_cost <= tol * cost
                p, r, cost = cand, r_new, new_cost
                lam = max(lam / 10.0, 1e-12)
                improved = True
                if small_step or small_gain or cost == 0.0:
                    return p, cost, it, True
                break
            lam *= 10.0
        if not improved:
            # no descent direction left at any damping: a stationary point
            return p, cost, it, True
    return p, cost, max_iter, False


def _loglinear(t: np.ndarray, y: np.ndarray) -> tuple[float, float] | None:
    mask = y > 0
    if mask.sum() < 2 or np.ptp(t[mask]) == 0:
        return None
    b, a = np.polyfit(t[mask], np.log(y[mask]), 1)
    return float(math.exp(a)), float(b)


def _linear_amplitudes(e1: float, e2: float, t: np.ndarray, y: np.ndarray) -> np.ndarray:
    X = np.column_stack([np.exp(e1 * t), np.exp(e2 * t)])
    (f1, f2), *_ = np.linalg.lstsq(X, y, rcond=None)
    return np.array([f1, e1, f2, e2])


def _initial_guesses(t: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    order = np.argsort(t)
    t, y = t[order], y[order]
    half = len(t) // 2
    guesses = []
    slow = _loglinear(t[half:], y[half:])
    if slow is not None:
        f2, e2 = slow
        fast = _loglinear(t[:half], y[:half] - f2 * np.exp(e2 * t[:half]))
        if fast is not None and fast[1] != e2:
            f1, e1 = fast
        else:
            e1 = 10.0 * e2 if e2 != 0 else -1.0
            f1 = float(y[0] - f2 * math.exp(e2 * t[0]))
        guesses.append(np.array([f1, e1, f2, e2]))
        for k in (0.5, 2.0, 4.0):
            guesses.append(_linear_amplitudes(e1 * k, e2, t, y))
    span = max(float(np.ptp(t)), 1e-9)
    for fast_rate, slow_rate in ((10.0, 1.0), (30.0, 3.0), (3.0, 0.3), (100.0, 10.0)):
        guesses.append(_linear_amplitudes(-fast_rate / span, -slow_rate / span, t, y))
    return guesses


def fit_double_exponential(
    points: Sequence[tuple[float, float]],
    *,
    weighting: str = "relative",
    max_iter: int = 2000,
    tol: float = 1e-15,
) -> FitResult:
    """Least-squares fit of the double-exponential model to (Mbps, V/m/Mbps) points.

    With ``weighting="relative"`` residuals are divided by |y|, which suits
    the multiplicative scatter of exposure-per-Mbps data spanning decades;
    ``"absolute"`` gives ordinary unweighted least squares.
    `residual_norm` is reported in the weighted metric.
    """
    if len(points) < 4:
        raise InsufficientDataError(f"need at least 4 points, got {len(points)}")
    t = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    if len(np.unique(t)) != len(t):
        raise DomainError("abscissae must be distinct")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise DomainError("points must be finite")
    if weighting == "relative":
        if np.any(y == 0):
            raise DomainError("relative weighting needs non-zero ordinates")
        w = np.abs(y)
    elif weighting == "absolute":
        w = np.ones_like(y)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")

    best: tuple[np.ndarray, float, int, bool] | None = None
    for guess in _initial_guesses(t, y):
        if not np.all(np.isfinite(guess)):
            continue
        p, cost, iters, ok = _lm(guess, t, y, w, max_iter, tol)
        if not np.all(np.isfinite(p)):
            continue
        if best is None or (ok and not best[3]) or (ok == best[3] and cost < best[1]):
            best = (p, cost, iters, ok)
    if best is None:
        raise FitFailed("no starting point produced a finite fit")
    p, cost, iters, ok = best
    params = FitParams(*map(float, p)).normalized()
    result = FitResult(params, math.sqrt(cost), iters, ok)
    if not ok:
        raise FitFailed(f"no convergence within {max_iter} iterations", best=result)
    return result
