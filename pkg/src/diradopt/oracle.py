"""Brute-force reference computations.

These deliberately avoid the solver code paths in the rest of the package:
CES and CET are re-evaluated from their textbook formulas, maximisation is
exhaustive enumeration over the frontier, and derivatives are finite
differences. Only the :class:`~diradopt.model_core.WorkerJob` type is shared.
Grid search is limited to N <= 3.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model_core import WorkerJob

MAX_DIMENSION = 3


@dataclass(frozen=True)
class GridSpec:
    """Angular grid over the positive orthant of the unit sphere.

    ``resolution`` intervals per angular dimension on the first pass; each of
    the ``refinements`` passes re-grids a window of +-2 cells around the
    incumbent at the same resolution.
    """

    resolution: int = 1000
    dimension: int = 2
    refinements: int = 0

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if not 1 <= self.dimension <= MAX_DIMENSION:
            raise ValueError(f"grid oracle supports 1 <= N <= {MAX_DIMENSION}, got {self.dimension}")


@dataclass(frozen=True)
class GridResult:
    x: np.ndarray
    value: float
    angle_step: float  # final angular spacing; location error is O(angle_step)


def ces(x, theta, sigma):
    x = np.asarray(x, dtype=float)
    r = (sigma - 1.0) / sigma
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        total = np.sum(theta ** (1.0 / sigma) * x**r, axis=-1)
        return total ** (1.0 / r)


def cet(x, s, gamma):
    x = np.asarray(x, dtype=float)
    q = (gamma + 1.0) / gamma
    return np.sum(s ** (-1.0 / gamma) * x**q, axis=-1) ** (1.0 / q)


def _directions(angles):
    a = angles
    if a.shape[-1] == 0:
        return np.ones(a.shape[:-1] + (1,))
    if a.shape[-1] == 1:
        return np.stack([np.cos(a[..., 0]), np.sin(a[..., 0])], axis=-1)
    return np.stack(
        [np.cos(a[..., 0]), np.sin(a[..., 0]) * np.cos(a[..., 1]), np.sin(a[..., 0]) * np.sin(a[..., 1])],
        axis=-1,
    )


def _angle_grid(lo, hi, res):
    axes = [np.linspace(l, h, res + 1) for l, h in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def grid_maximize(
    objective: Callable[[np.ndarray], np.ndarray],
    w: WorkerJob,
    budget: Optional[float] = None,
    grid: Optional[GridSpec] = None,
) -> GridResult:
    """Best frontier bundle ``(budget/g(u)) u`` over a grid of directions ``u``.

    ``objective`` takes an ``(M, N)`` array of bundles and returns ``M`` values.
    """
    n = w.n
    if n > MAX_DIMENSION:
        raise ValueError(f"grid oracle supports N <= {MAX_DIMENSION}, got N={n}")
    grid = grid or GridSpec(dimension=n)
    B = w.budget if budget is None else float(budget)
    half_pi = math.pi / 2
    k = n - 1

    def frontier(angles):
        u = _directions(angles)
        return (B / cet(u, w.s, w.gamma))[:, None] * u

    if k == 0:
        x = frontier(np.zeros((1, 0)))
        return GridResult(x[0], float(objective(x)[0]), 0.0)

    lo, hi = np.zeros(k), np.full(k, half_pi)
    step = half_pi / grid.resolution
    best_x, best_val, best_ang = None, -np.inf, None
    for level in range(grid.refinements + 1):
        angles = _angle_grid(lo, hi, grid.resolution)
        X = frontier(angles)
        vals = np.asarray(objective(X), dtype=float)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        j = int(np.argmax(vals))
        if vals[j] >= best_val:
            best_x, best_val, best_ang = X[j], float(vals[j]), angles[j]
        step = float(np.max(hi - lo)) / grid.resolution
        lo = np.maximum(best_ang - 2 * step, 0.0)
        hi = np.minimum(best_ang + 2 * step, half_pi)
    return GridResult(best_x, best_val, step)


def grid_autarky(w: WorkerJob, grid: Optional[GridSpec] = None) -> GridResult:
    return grid_maximize(lambda X: ces(X, w.theta, w.sigma), w, grid=grid)


def grid_unit_revenue(p, w: WorkerJob, grid: Optional[GridSpec] = None) -> float:
    """``max p.x`` over the unit-budget frontier, by enumeration."""
    p = np.asarray(p, dtype=float)
    return grid_maximize(lambda X: X @ p, w, budget=1.0, grid=grid).value


def grid_intensity(w: WorkerJob, t, chi: float, lam_resolution: int = 400,
                   grid: Optional[GridSpec] = None, refinements: int = 6):
    """Brute-force optimal technology intensity.

    Enumerates ``lambda`` on a grid and, for each value, every frontier
    direction of the remaining ``(1 - lambda) B`` budget. The lambda window
    is then narrowed around the incumbent and the search repeated.
    Returns ``(lambda, output)``.
    """
    t = np.asarray(t, dtype=float)
    B = w.budget
    y = B * chi * t
    grid = grid or GridSpec(resolution=200, dimension=w.n, refinements=4)
    lo, hi = 0.0, 1.0
    best = (0.0, -np.inf)
    for _ in range(refinements + 1):
        lams = np.linspace(lo, hi, lam_resolution + 1)
        vals = []
        for lam in lams:
            if lam >= 1.0:
                vals.append(float(ces(y, w.theta, w.sigma)))
                continue
            res = grid_maximize(lambda X: ces(X + lam * y, w.theta, w.sigma), w, budget=(1 - lam) * B, grid=grid)
            vals.append(res.value)
        vals = np.asarray(vals)
        j = int(np.argmax(vals))
        if vals[j] >= best[1]:
            best = (float(lams[j]), float(vals[j]))
        step = (hi - lo) / lam_resolution
        lo, hi = max(best[0] - 2 * step, 0.0), min(best[0] + 2 * step, 1.0)
    return best


def sample_hull_output(w: WorkerJob, points, samples: int = 10_000, seed: int = 0) -> float:
    """Largest CES output among random convex combinations of frontier and given points.

    ``points`` are extra bundles (e.g. technology points ``B chi_k t_k``).
    Each sample mixes one random frontier bundle with all extra points using
    Dirichlet weights.
    """
    rng = np.random.default_rng(seed)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    u = np.abs(rng.standard_normal((samples, w.n)))
    human = (w.budget / cet(u, w.s, w.gamma))[:, None] * u
    weights = rng.dirichlet(np.ones(1 + len(points)) * 0.5, size=samples)
    Z = weights[:, :1] * human + weights[:, 1:] @ points
    return float(np.nanmax(ces(Z, w.theta, w.sigma)))


def golden_section(f: Callable[[float], float], lo: float = 0.0, hi: float = 1.0, tol: float = 1e-10) -> float:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]`` to bracket width ``tol``."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    mid = (a + b) / 2
    # monotone objectives: the maximum sits exactly on an endpoint
    best = max([(f(mid), 1, mid), (f(lo), 0, lo), (f(hi), 0, hi)])
    return best[2]


def finite_diff_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)
    return grad
