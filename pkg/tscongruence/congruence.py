"""
Congruence distance as a constrained nonlinear minimization.

    d^C(S, T) = min over orthogonal M and vectors v of  Σ_i d(s_i, M·t_i + v)

The optimizer only ever returns a feasible isometry, so its value d^O is an
upper bound on d^C. Two methods are available:

- "expmap" (default): M = M0 · exp(A) with A skew-symmetric, which keeps M
  exactly orthogonal and leaves k(k−1)/2 free rotation parameters. Both
  determinant branches of every start are searched with Nelder-Mead over
  (A, v), and each round ends by solving the translation exactly with a
  Weiszfeld geometric median.
- "auglag": the k² equality constraints M·Mᵀ = I handled by an augmented
  Lagrangian with a derivative-free inner solver, started from M = I, v = 0.
  Kept to reproduce the behaviour of that formulation in higher dimensions.

congruence_oracle_2d is an independent brute-force check for k <= 2.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import expm
from scipy.optimize import minimize

try:
    from .core import (
        Isometry,
        TimeSeries,
        check_same_shape,
        orthogonality_residual,
        random_orthogonal,
    )
except ImportError:
    from core import (  # type: ignore[no-redef]
        Isometry,
        TimeSeries,
        check_same_shape,
        orthogonality_residual,
        random_orthogonal,
    )

logger = logging.getLogger(__name__)

METHODS = ("expmap", "auglag")

_DEFAULT_OPTIMIZER: dict[str, Any] = {
    "max_iterations": 2000,
    "objective_tolerance": 1e-10,
    "constraint_tolerance": 1e-9,
    "multistart_count": 8,
    "seed": 0,
    "method": "expmap",
    "weiszfeld_tolerance": 1e-12,
    "weiszfeld_max_iter": 500,
    "penalty_init": 10.0,
    "penalty_growth": 10.0,
    "max_outer_iterations": 12,
}

# Nelder-Mead restart rounds per branch and their initial simplex sizes
_SIMPLEX_STEPS = (0.3, 0.03, 0.003, 3e-4)

# Oracle batches are split so one batch holds at most this many residual floats
_ORACLE_CHUNK_ELEMENTS = 1 << 20


@dataclass
class OptimizerConfig:
    """Tunables of congruence_upper."""

    max_iterations: int = 2000
    objective_tolerance: float = 1e-10
    constraint_tolerance: float = 1e-9
    multistart_count: int = 8
    seed: int = 0
    method: str = "expmap"
    weiszfeld_tolerance: float = 1e-12
    weiszfeld_max_iter: int = 500
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    max_outer_iterations: int = 12

    def __post_init__(self) -> None:
        for name in ("max_iterations", "multistart_count", "weiszfeld_max_iter", "max_outer_iterations"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("objective_tolerance", "constraint_tolerance", "weiszfeld_tolerance", "penalty_init"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.penalty_growth <= 1:
            raise ValueError(f"penalty_growth must be > 1, got {self.penalty_growth}")
        if self.method not in METHODS:
            raise ValueError(f"Unknown optimizer method {self.method!r}; expected one of {METHODS}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> OptimizerConfig:
        """Create a config from a mapping, applying defaults for missing keys."""
        unknown = sorted(set(data) - set(_DEFAULT_OPTIMIZER))
        if unknown:
            logger.warning("Ignoring unknown optimizer settings: %s", ", ".join(unknown))
        merged = {**_DEFAULT_OPTIMIZER, **{key: data[key] for key in data if key in _DEFAULT_OPTIMIZER}}
        return cls(
            max_iterations=int(merged["max_iterations"]),
            objective_tolerance=float(merged["objective_tolerance"]),
            constraint_tolerance=float(merged["constraint_tolerance"]),
            multistart_count=int(merged["multistart_count"]),
            seed=int(merged["seed"]),
            method=str(merged["method"]),
            weiszfeld_tolerance=float(merged["weiszfeld_tolerance"]),
            weiszfeld_max_iter=int(merged["weiszfeld_max_iter"]),
            penalty_init=float(merged["penalty_init"]),
            penalty_growth=float(merged["penalty_growth"]),
            max_outer_iterations=int(merged["max_outer_iterations"]),
        )

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class OptimizerResult:
    """Upper bound d^O with the isometry achieving it."""

    value: float
    isometry: Isometry
    iterations_used: int
    converged: bool
    orthogonality_residual: float
    method: str = "expmap"
    starts_evaluated: int = 0
    best_start: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "isometry": self.isometry.to_dict(),
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "orthogonality_residual": self.orthogonality_residual,
            "method": self.method,
            "starts_evaluated": self.starts_evaluated,
            "best_start": self.best_start,
        }


# --- Objective --------------------------------------------------------------


def _sum_norms(residuals: NDArray[np.float64]) -> float:
    return float(np.linalg.norm(residuals, axis=-1).sum())


def objective(s: TimeSeries, t: TimeSeries, g: Isometry) -> float:
    """f(M, v) = Σ_i d(s_i, M·t_i + v)."""
    check_same_shape(s, t)
    if g.k != s.k:
        raise ValueError(f"Isometry dimension {g.k} != series dimension {s.k}")
    return _sum_norms(s.points - g.apply(t.points))


# --- Geometric median ---------------------------------------------------------


def _snap_to_data(points: NDArray[np.float64], estimate: NDArray[np.float64]) -> NDArray[np.float64]:
    """Replace an estimate by its nearest data point wherever that is no worse.

    Weiszfeld approaches a median that sits on a data point only slowly; the
    data point itself is then the exact answer.
    """
    dist = np.linalg.norm(points - estimate[:, None, :], axis=2)
    nearest = points[np.arange(points.shape[0]), dist.argmin(axis=1)]
    cost_estimate = dist.sum(axis=1)
    cost_nearest = np.linalg.norm(points - nearest[:, None, :], axis=2).sum(axis=1)
    return np.where((cost_nearest <= cost_estimate)[:, None], nearest, estimate)


def _weiszfeld_batch(points: NDArray[np.float64], tolerance: float, max_iter: int) -> NDArray[np.float64]:
    """Geometric medians of a (batch, m, k) stack of point sets.

    Weiszfeld iteration with the Vardi–Zhang step at coincident points: when
    the iterate sits on η data points and the pull of the others has norm
    r <= η, the iterate is optimal and stays put.
    """
    batch, m, _ = points.shape
    if m == 1:
        return np.array(points[:, 0, :], dtype=np.float64)
    scale = max(1.0, float(np.abs(points).max()))
    coincident_eps = 1e-14 * scale
    estimate = points.mean(axis=1)
    active = np.ones(batch, dtype=bool)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        p = points[idx]
        current = estimate[idx]
        diff = p - current[:, None, :]
        dist = np.linalg.norm(diff, axis=2)
        coincident = dist <= coincident_eps
        weights = np.where(coincident, 0.0, 1.0 / np.where(coincident, 1.0, dist))
        weight_sum = weights.sum(axis=1)
        has_weight = weight_sum > 0
        target = np.einsum("bm,bmk->bk", weights, p) / np.where(has_weight, weight_sum, 1.0)[:, None]
        pull = np.linalg.norm(np.einsum("bm,bmk->bk", weights, diff), axis=1)
        eta = coincident.sum(axis=1)
        gamma = np.where(eta > 0, np.minimum(1.0, eta / np.maximum(pull, 1e-300)), 0.0)
        updated = (1.0 - gamma)[:, None] * target + gamma[:, None] * current
        updated = np.where(has_weight[:, None], updated, current)
        step = np.linalg.norm(updated - current, axis=1)
        estimate[idx] = updated
        active[idx[step <= tolerance * scale]] = False

    return _snap_to_data(points, estimate)


def weiszfeld_median(points: ArrayLike, tolerance: float = 1e-12, max_iter: int = 500) -> NDArray[np.float64]:
    """Point minimizing Σ_i ||p_i − v||, the optimal translation for a fixed M."""
    array = np.asarray(points, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2 or array.shape[0] == 0:
        raise ValueError("weiszfeld_median needs at least one point")
    return _weiszfeld_batch(array[None, :, :], tolerance, max_iter)[0]


# --- Initialization -----------------------------------------------------------


def _nearest_orthogonal(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
    """Orthogonal polar factor U·Vᵀ of a square matrix."""
    u, _, vt = np.linalg.svd(matrix)
    return np.asarray(u @ vt, dtype=np.float64)


def kabsch_init(s: TimeSeries, t: TimeSeries) -> Isometry:
    """Closed-form minimizer of Σ ||s_i − (M·t_i + v)||² (orthogonal Procrustes).

    Both determinant branches are scored and the better one kept. A constant
    series leaves M undetermined; M = I is returned then.
    """
    check_same_shape(s, t)
    k = s.k
    s_mean = s.points.mean(axis=0)
    if np.ptp(t.points, axis=0).max() == 0.0:
        return Isometry(np.eye(k), s_mean - t.points[0])

    t_mean = t.points.mean(axis=0)
    s_centered = s.points - s_mean
    t_centered = t.points - t_mean
    covariance = t_centered.T @ s_centered
    if np.linalg.norm(covariance) <= 1e-300:
        rotation = np.eye(k)
    else:
        # full SVD completes the basis for rank-deficient covariances
        u, _, vt = np.linalg.svd(covariance)
        flip = np.eye(k)
        flip[-1, -1] = -1.0
        candidates = [vt.T @ u.T, vt.T @ flip @ u.T]
        squared = [float(((s_centered - t_centered @ m.T) ** 2).sum()) for m in candidates]
        rotation = _nearest_orthogonal(candidates[int(np.argmin(squared))])
    return Isometry(rotation, s_mean - rotation @ t_mean)


# --- Exactly orthogonal parameterization --------------------------------------


def _skew(theta: NDArray[np.float64], k: int) -> NDArray[np.float64]:
    a = np.zeros((k, k))
    a[np.triu_indices(k, 1)] = theta
    return a - a.T


def _skew_exp(theta: NDArray[np.float64], k: int) -> NDArray[np.float64]:
    """exp of the skew-symmetric matrix with upper triangle theta."""
    if k == 2:
        c, s = math.cos(theta[0]), math.sin(theta[0])
        return np.array([[c, s], [-s, c]])
    a = _skew(theta, k)
    if k == 3:
        angle = float(np.sqrt(theta @ theta))
        if angle < 1e-12:
            return np.eye(3) + a + 0.5 * (a @ a)
        return np.eye(3) + (math.sin(angle) / angle) * a + ((1.0 - math.cos(angle)) / angle**2) * (a @ a)
    return np.asarray(expm(a), dtype=np.float64)


def _sub_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _starts(s: TimeSeries, t: TimeSeries, cfg: OptimizerConfig) -> list[tuple[str, NDArray[np.float64]]]:
    k = s.k
    starts: list[tuple[str, NDArray[np.float64]]] = [("identity", np.eye(k))]
    if cfg.multistart_count >= 2:
        starts.append(("kabsch", np.array(kabsch_init(s, t).rotation)))
    for index in range(2, cfg.multistart_count):
        starts.append((f"random-{index}", random_orthogonal(k, _sub_seed(cfg.seed, index))))
    return starts


def _local_search(
    s_pts: NDArray[np.float64],
    t_pts: NDArray[np.float64],
    m0: NDArray[np.float64],
    cfg: OptimizerConfig,
    scale: float,
) -> tuple[float, NDArray[np.float64], NDArray[np.float64], int, bool]:
    """Nelder-Mead over (rotation parameters, v) in the branch of m0."""
    k = m0.shape[0]
    p = k * (k - 1) // 2

    def rotation(x: NDArray[np.float64]) -> NDArray[np.float64]:
        return np.asarray(m0 @ _skew_exp(x[:p], k), dtype=np.float64)

    def f(x: NDArray[np.float64]) -> float:
        return _sum_norms(s_pts - t_pts @ rotation(x).T - x[p:])

    def with_exact_translation(x: NDArray[np.float64]) -> NDArray[np.float64]:
        v = weiszfeld_median(s_pts - t_pts @ rotation(x).T, cfg.weiszfeld_tolerance, cfg.weiszfeld_max_iter)
        return np.concatenate([x[:p], v])

    x = with_exact_translation(np.zeros(p + k))
    best = f(x)
    iterations = 0
    success = False
    for step in _SIMPLEX_STEPS:
        simplex = np.tile(x, (p + k + 1, 1))
        for d in range(p + k):
            simplex[d + 1, d] += step if d < p else step * scale
        res = minimize(
            f,
            x,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": 1e-10 * max(1.0, scale),
                "fatol": cfg.objective_tolerance,
                "maxiter": cfg.max_iterations,
                "adaptive": p + k > 3,
            },
        )
        iterations += int(res.nit)
        success = bool(res.success)
        candidate = with_exact_translation(np.asarray(res.x))
        value = f(candidate)
        if float(res.fun) < value:
            candidate, value = np.asarray(res.x), float(res.fun)
        improvement = best - value
        if value < best:
            x, best = candidate, value
        if improvement <= cfg.objective_tolerance * max(1.0, best):
            break
    return best, rotation(x), x[p:], iterations, success


def _branches(m0: NDArray[np.float64]) -> list[tuple[str, NDArray[np.float64]]]:
    flip = np.eye(m0.shape[0])
    flip[0, 0] = -1.0
    return [("", m0), ("/mirrored", m0 @ flip)]


def _upper_one_dimensional(s: TimeSeries, t: TimeSeries, cfg: OptimizerConfig) -> OptimizerResult:
    """k = 1: M is +1 or −1 and the optimal v is a median, so no search is needed."""
    best: tuple[float, Isometry] | None = None
    for sign in (1.0, -1.0):
        m = np.array([[sign]])
        v = weiszfeld_median(s.points - sign * t.points, cfg.weiszfeld_tolerance, cfg.weiszfeld_max_iter)
        g = Isometry(m, v)
        value = objective(s, t, g)
        if best is None or value < best[0]:
            best = (value, g)
    assert best is not None
    value, g = best
    return OptimizerResult(
        value=value,
        isometry=g,
        iterations_used=0,
        converged=True,
        orthogonality_residual=orthogonality_residual(g.rotation),
        method="expmap",
        starts_evaluated=2,
        best_start="identity" if g.rotation[0, 0] > 0 else "identity/mirrored",
    )


def _upper_expmap(s: TimeSeries, t: TimeSeries, cfg: OptimizerConfig) -> OptimizerResult:
    if s.k == 1:
        return _upper_one_dimensional(s, t, cfg)
    s_pts, t_pts = s.points, t.points
    scale = float(np.linalg.norm(s_pts - s_pts.mean(axis=0), axis=1).mean())
    scale = scale if scale > 0 else 1.0

    best: tuple[float, NDArray[np.float64], NDArray[np.float64], str, bool] | None = None
    iterations = 0
    evaluated = 0
    for name, m0 in _starts(s, t, cfg):
        for suffix, branch in _branches(m0):
            value, m, v, used, success = _local_search(s_pts, t_pts, branch, cfg, scale)
            iterations += used
            evaluated += 1
            logger.debug("Start %s%s: value=%.12g after %d iterations", name, suffix, value, used)
            if best is None or value < best[0]:
                best = (value, m, v, name + suffix, success)

    assert best is not None
    _, m, v, label, success = best
    rotation = m if orthogonality_residual(m) <= 1e-12 else _nearest_orthogonal(m)
    g = Isometry(rotation, v)
    residual = orthogonality_residual(rotation)
    return OptimizerResult(
        value=objective(s, t, g),
        isometry=g,
        iterations_used=iterations,
        converged=success and residual <= cfg.constraint_tolerance,
        orthogonality_residual=residual,
        method="expmap",
        starts_evaluated=evaluated,
        best_start=label,
    )


def _upper_auglag(s: TimeSeries, t: TimeSeries, cfg: OptimizerConfig) -> OptimizerResult:
    """Augmented Lagrangian over the raw entries of M, started at M = I, v = 0."""
    k = s.k
    s_pts, t_pts = s.points, t.points
    identity = np.eye(k)

    def f(x: NDArray[np.float64]) -> float:
        return _sum_norms(s_pts - t_pts @ x[: k * k].reshape(k, k).T - x[k * k :])

    def constraints(x: NDArray[np.float64]) -> NDArray[np.float64]:
        m = x[: k * k].reshape(k, k)
        return np.asarray((m @ m.T - identity).ravel(), dtype=np.float64)

    x = np.concatenate([identity.ravel(), np.zeros(k)])
    multipliers = np.zeros(k * k)
    penalty = cfg.penalty_init
    previous = math.inf
    iterations = 0
    feasible = False
    for outer in range(cfg.max_outer_iterations):
        lam, mu = multipliers.copy(), penalty

        def lagrangian(z: NDArray[np.float64], lam: NDArray[np.float64] = lam, mu: float = mu) -> float:
            c = constraints(z)
            return f(z) + float(lam @ c) + 0.5 * mu * float(c @ c)

        res = minimize(
            lagrangian,
            x,
            method="Powell",
            options={"maxfev": cfg.max_iterations * 10, "xtol": 1e-10, "ftol": cfg.objective_tolerance},
        )
        x = np.asarray(res.x)
        iterations += int(res.nit)
        c = constraints(x)
        violation = float(np.linalg.norm(c))
        logger.debug("auglag outer %d: f=%.9g violation=%.3e penalty=%.3g", outer, f(x), violation, penalty)
        if violation <= cfg.constraint_tolerance:
            feasible = True
            break
        multipliers = multipliers + penalty * c
        if violation > 0.25 * previous:
            penalty *= cfg.penalty_growth
        previous = violation

    raw = x[: k * k].reshape(k, k)
    residual = orthogonality_residual(raw)
    rotation = _nearest_orthogonal(raw)
    v = weiszfeld_median(s_pts - t_pts @ rotation.T, cfg.weiszfeld_tolerance, cfg.weiszfeld_max_iter)
    g = Isometry(rotation, v)
    return OptimizerResult(
        value=objective(s, t, g),
        isometry=g,
        iterations_used=iterations,
        converged=feasible and residual <= cfg.constraint_tolerance,
        orthogonality_residual=residual,
        method="auglag",
        starts_evaluated=1,
        best_start="identity",
    )


def congruence_upper(s: TimeSeries, t: TimeSeries, cfg: OptimizerConfig | None = None) -> OptimizerResult:
    """Minimize f(M, v) over isometries; the value is an upper bound on d^C.

    Non-convergence is reported through OptimizerResult.converged, never raised.
    """
    check_same_shape(s, t)
    cfg = cfg or OptimizerConfig()
    if cfg.method == "auglag":
        result = _upper_auglag(s, t, cfg)
    else:
        result = _upper_expmap(s, t, cfg)
    logger.debug(
        "congruence_upper: n=%d k=%d value=%.12g converged=%s best_start=%s",
        s.n,
        s.k,
        result.value,
        result.converged,
        result.best_start,
    )
    return result


# --- Brute-force oracle ------------------------------------------------------


def _oracle_matrices(k: int, angle_steps: int) -> NDArray[np.float64]:
    if k == 1:
        return np.array([[[1.0]], [[-1.0]]])
    angles = 2.0 * np.pi * np.arange(angle_steps) / angle_steps
    c, s = np.cos(angles), np.sin(angles)
    rotations = np.stack([np.stack([c, -s], axis=1), np.stack([s, c], axis=1)], axis=1)
    reflections = rotations @ np.diag([1.0, -1.0])
    return np.concatenate([rotations, reflections])


def oracle_grid_slack(t: TimeSeries, angle_steps: int) -> float:
    """Bound (2π/angle_steps)·Σ ||t_i − t̄|| on the oracle's excess over d^C."""
    spread = float(np.linalg.norm(t.points - t.points.mean(axis=0), axis=1).sum())
    return 2.0 * np.pi / angle_steps * spread


def congruence_oracle_2d(
    s: TimeSeries,
    t: TimeSeries,
    angle_steps: int = 3600,
    *,
    tolerance: float = 1e-12,
    max_iter: int = 500,
) -> float:
    """Minimum of f over a uniform angle grid, both reflection branches, exact v.

    For k = 1 only M = +1 and M = −1 exist. Raises ValueError for k > 2.
    """
    check_same_shape(s, t)
    if s.k > 2:
        raise ValueError(f"congruence_oracle_2d supports k <= 2, got k={s.k}")
    if angle_steps < 1:
        raise ValueError(f"angle_steps must be >= 1, got {angle_steps}")

    matrices = _oracle_matrices(s.k, angle_steps)
    chunk = max(1, _ORACLE_CHUNK_ELEMENTS // (s.n * s.k))
    best = math.inf
    for start in range(0, matrices.shape[0], chunk):
        block = matrices[start : start + chunk]
        residual_points = s.points[None, :, :] - np.einsum("bij,nj->bni", block, t.points)
        medians = _weiszfeld_batch(residual_points, tolerance, max_iter)
        costs = np.linalg.norm(residual_points - medians[:, None, :], axis=2).sum(axis=1)
        best = min(best, float(costs.min()))
    return best
