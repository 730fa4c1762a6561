"""Per-class token budgets via reparameterized Bayesian optimization.

The budget split (t_tbl, t_col, t_hint) under a total limit T is searched in
the box (p, p_tbl, p_col): p is the fraction of T that is allocated at all,
p_tbl the fraction of that going to table documents, p_col the fraction of the
remainder going to column documents. Every box point maps to a feasible
allocation, so the optimizer never wastes evaluations on infeasible splits.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

P_MIN = 0.01  # numerical floor; zero-context evaluations would dominate the GP


class OutOfBoundsError(ValueError):
    pass


class ObjectiveFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class ReparamPoint:
    p: float
    p_tbl: float
    p_col: float

    def __post_init__(self):
        if not (P_MIN <= self.p <= 1.0):
            raise OutOfBoundsError(f"p={self.p} outside [{P_MIN}, 1]")
        if not (0.0 <= self.p_tbl <= 1.0):
            raise OutOfBoundsError(f"p_tbl={self.p_tbl} outside [0, 1]")
        if not (0.0 <= self.p_col <= 1.0):
            raise OutOfBoundsError(f"p_col={self.p_col} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.p, self.p_tbl, self.p_col], dtype=np.float64)


@dataclass(frozen=True)
class ContextAllocation:
    t_tbl: int
    t_col: int
    t_hint: int
    T: int

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if min(self.t_tbl, self.t_col, self.t_hint) < 0:
            raise ValueError("token budgets must be nonnegative")
        if self.t_tbl + self.t_col + self.t_hint > self.T:
            raise ValueError("token budgets exceed the total limit")

    def total(self) -> int:
        return self.t_tbl + self.t_col + self.t_hint

    def to_json(self) -> dict:
        return {"t_tbl": self.t_tbl, "t_col": self.t_col, "t_hint": self.t_hint, "T": self.T}


@dataclass
class AllocationObjective:
    """Higher-is-better score in [0, 1] for a candidate allocation."""

    fn: Callable[[ContextAllocation], float]
    kind: str = "custom"  # "llm_accuracy" | "retrieval_f_surrogate" | "custom"

    def __call__(self, allocation: ContextAllocation) -> float:
        return self.fn(allocation)


def _floor_distribute(reals: Sequence[float]) -> list[int]:
    """Integerize keeping the sum at floor(sum(reals)); never rounds the sum up."""
    total = int(math.floor(sum(reals) + 1e-9))
    floors = [int(math.floor(x + 1e-9)) for x in reals]
    extras = total - sum(floors)
    order = sorted(
        range(len(reals)), key=lambda i: (-((reals[i] + 1e-9) % 1.0), i)
    )
    out = list(floors)
    for i in order[:max(0, extras)]:
        out[i] += 1
    return out


def reparam_to_tokens(
    point: ReparamPoint, T: int, max_total: Optional[int] = None
) -> ContextAllocation:
    """Map a box point to integer budgets; rounding never exceeds the limit."""
    if T <= 0:
        raise OutOfBoundsError("T must be positive")
    shares = (
        point.p * point.p_tbl,
        point.p * (1.0 - point.p_tbl) * point.p_col,
        point.p * (1.0 - point.p_tbl) * (1.0 - point.p_col),
    )
    reals = [T * s for s in shares]
    if max_total is not None and sum(reals) > max_total:
        scale = max_total / sum(reals)  # down-scale candidates to the cap
        reals = [x * scale for x in reals]
    t_tbl, t_col, t_hint = _floor_distribute(reals)
    return ContextAllocation(t_tbl=t_tbl, t_col=t_col, t_hint=t_hint, T=T)


# ---------------------------------------------------------------------------
# Gaussian process surrogate (Matern 5/2, fixed-heuristic hyperparameters)
# ---------------------------------------------------------------------------

_SQRT5 = math.sqrt(5.0)


def _matern52(dist: np.ndarray) -> np.ndarray:
    return (1.0 + _SQRT5 * dist + 5.0 / 3.0 * dist**2) * np.exp(-_SQRT5 * dist)


class _GaussianProcess:
    """Zero-mean GP on standardized targets. The lengthscale scale is picked
    from a small grid by marginal likelihood with the closed-form ML amplitude,
    so predictive variance collapses once the surface is interpolated."""

    _SCALE_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)

    def __init__(self, bounds: np.ndarray):
        self.bounds = bounds

    def _base_lengthscales(self, X: np.ndarray) -> np.ndarray:
        lengthscales = []
        for j in range(X.shape[1]):
            diffs = np.abs(X[:, j, None] - X[None, :, j])
            nonzero = diffs[diffs > 1e-12]
            if nonzero.size:
                lengthscales.append(float(np.median(nonzero)))
            else:
                lengthscales.append(float(self.bounds[j, 1] - self.bounds[j, 0]) / 2 or 1.0)
        return np.asarray(lengthscales)

    @staticmethod
    def _chol(K: np.ndarray) -> np.ndarray:
        jitter = 1e-10
        while True:
            try:
                return np.linalg.cholesky(K + jitter * np.eye(len(K)))
            except np.linalg.LinAlgError:
                jitter *= 10.0
                if jitter > 1.0:
                    raise

    def fit(self, X: np.ndarray, y: np.ndarray) -> None:
        self.X = X
        self.y_mean = float(y.mean())
        self.y_std = float(y.std()) or 1.0
        y_n = (y - self.y_mean) / self.y_std
        n = len(X)
        base = self._base_lengthscales(X)

        best = None
        for scale in self._SCALE_GRID:
            lengthscales = base * scale
            diff = (X[:, None, :] - X[None, :, :]) / lengthscales
            K = _matern52(np.sqrt(np.maximum((diff**2).sum(axis=2), 0.0)))
            L = self._chol(K)
            alpha = np.linalg.solve(L.T, np.linalg.solve(L, y_n))
            amp = max(float(y_n @ alpha) / n, 1e-12)
            log_ml = -0.5 * n * math.log(amp) - float(np.log(np.diag(L)).sum())
            if best is None or log_ml > best[0]:
                best = (log_ml, lengthscales, L, alpha, amp)
        _log_ml, self.lengthscales, self.L, self.alpha, self.amplitude = best

    def _scaled_dist(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        diff = (A[:, None, :] - B[None, :, :]) / self.lengthscales
        return np.sqrt(np.maximum((diff**2).sum(axis=2), 0.0))

    def predict(self, Xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Ks = _matern52(self._scaled_dist(Xs, self.X))
        mean = Ks @ self.alpha
        v = np.linalg.solve(self.L, Ks.T)
        var = self.amplitude * np.maximum(1.0 - (v**2).sum(axis=0), 0.0)
        return (
            mean * self.y_std + self.y_mean,
            np.sqrt(np.maximum(var, 1e-16)) * self.y_std,
        )


def _norm_cdf(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.vectorize(math.erf)(z / math.sqrt(2.0)))


def _norm_pdf(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)


def expected_improvement(mean: np.ndarray, std: np.ndarray, best: float) -> np.ndarray:
    imp = mean - best
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, imp / std, 0.0)
    ei = imp * _norm_cdf(z) + std * _norm_pdf(z)
    return np.where(std > 0, ei, np.maximum(imp, 0.0))


def latin_hypercube(n: int, bounds: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    dims = bounds.shape[0]
    samples = np.empty((n, dims))
    for j in range(dims):
        edges = (np.arange(n) + rng.random(n)) / n
        rng.shuffle(edges)
        samples[:, j] = bounds[j, 0] + edges * (bounds[j, 1] - bounds[j, 0])
    return samples


@dataclass
class BoResult:
    point: ReparamPoint
    allocation: ContextAllocation
    score: float
    trace: list[dict] = field(default_factory=list)

    def evaluations(self) -> int:
        return len(self.trace)


def bayes_optimize(
    objective: AllocationObjective | Callable[[ContextAllocation], float],
    T: int,
    budget: int = 25,
    seed: int = 0,
    p_min: float = P_MIN,
    max_total: Optional[int] = None,
) -> BoResult:
    """LHS init, GP + expected improvement, random-multistart acquisition.

    Exactly `budget` objective evaluations; deterministic under a fixed seed;
    an evaluation that raises scores 0 with a diagnostic.
    """
    if budget < 5:
        raise ValueError("budget must be at least 5")
    fn = objective if callable(objective) else objective.fn
    rng = np.random.default_rng(seed)
    bounds = np.array([[p_min, 1.0], [0.0, 1.0], [0.0, 1.0]])

    X: list[np.ndarray] = []
    y: list[float] = []
    trace: list[dict] = []

    def evaluate(x: np.ndarray) -> None:
        point = ReparamPoint(p=float(x[0]), p_tbl=float(x[1]), p_col=float(x[2]))
        allocation = reparam_to_tokens(point, T, max_total=max_total)
        try:
            score = float(fn(allocation))
        except Exception as exc:
            logger.warning("objective failed at %s: %s; scoring 0", point, exc)
            score = 0.0
        X.append(x)
        y.append(score)
        trace.append(
            {
                "p": point.p, "p_tbl": point.p_tbl, "p_col": point.p_col,
                "t_tbl": allocation.t_tbl, "t_col": allocation.t_col,
                "t_hint": allocation.t_hint, "score": score,
            }
        )

    n_init = math.ceil(budget / 4)
    for x in latin_hypercube(n_init, bounds, rng):
        evaluate(x)

    gp = _GaussianProcess(bounds)
    while len(y) < budget:
        Xa = np.vstack(X)
        ya = np.asarray(y)
        gp.fit(Xa, ya)
        best_val = float(ya.max())
        best_x = Xa[int(ya.argmax())]

        uniform = rng.uniform(bounds[:, 0], bounds[:, 1], size=(1024, 3))
        locals_ = [
            np.clip(
                best_x + rng.normal(0.0, scale, size=(n, 3)), bounds[:, 0], bounds[:, 1]
            )
            for scale, n in ((0.1, 512), (0.02, 512), (0.005, 256))
        ]
        candidates = np.vstack([uniform, *locals_])
        mean, std = gp.predict(candidates)
        ei = expected_improvement(mean, std, best_val)
        evaluate(candidates[int(ei.argmax())])

    best_idx = int(np.asarray(y).argmax())
    best_point = ReparamPoint(
        p=float(X[best_idx][0]), p_tbl=float(X[best_idx][1]), p_col=float(X[best_idx][2])
    )
    return BoResult(
        point=best_point,
        allocation=reparam_to_tokens(best_point, T, max_total=max_total),
        score=float(y[best_idx]),
        trace=trace,
    )
