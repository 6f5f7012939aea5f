"""Several directional technologies: the convex hull PPS and inductive adoption."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, root

from .adoption import Technology, corner_prices, exceeds
from .autarky import solve_autarky
from .model_core import (
    ConvergenceError,
    WorkerJob,
    _log_ces,
    ces_output,
    concave_maximize,
    normalize,
    revenue_maximizer,
    unit_revenue,
)

FW_TOL = 1e-8
MERGE_TOL = 1e-10
ACTIVE_TOL = 1e-6
POLISH_RESIDUAL = 1e-8
COARSE_GAP = 1e-3


@dataclass(frozen=True)
class MultiTechSolution:
    lambdas: np.ndarray
    x_H: np.ndarray
    z_star: np.ndarray
    output: float
    p_star: np.ndarray
    rho_K_at_p_star: float
    gap: float
    iterations: int


def k_unit_revenue(p, w: WorkerJob, techs: Sequence[Technology]) -> float:
    """Support function of the K-technology PPS per unit budget.

    ``max(rho(p), max_k chi_k p.t_k)``; with no technologies this is ``rho(p)``.
    """
    p = np.asarray(p, dtype=float)
    best = float(unit_revenue(p, w))
    for tech in techs:
        best = max(best, tech.chi * float(p @ tech.t))
    return best


def _line_search(z, d, eta_max, w):
    """Exact maximiser of ``log F(z + eta d)`` on ``[0, eta_max]`` (concave in eta)."""

    def slope(eta):
        _, g = _log_ces(z + eta * d, w)
        return float(np.dot(np.where(np.isfinite(g), g, 1e300), d))

    if slope(eta_max) >= 0:
        return eta_max
    if slope(0.0) <= 0:
        return 0.0
    return brentq(slope, 0.0, eta_max, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


class _Hull:
    """Convex weights over human atoms and technology points, plus the iterate."""

    def __init__(self, w: WorkerJob, Y: np.ndarray):
        self.w, self.Y = w, Y
        self.human: Dict[tuple, list] = {}  # key -> [point, weight]
        self.tech_w = np.zeros(len(Y))

    def reset(self, x_H, mu, lam):
        self.human = {}
        self.tech_w = np.array(lam, dtype=float)
        if mu > 0:
            self.add_human(x_H / mu, mu)

    def add_human(self, a, weight):
        key = tuple(np.round(a / (self.w.budget * MERGE_TOL)).astype(np.int64))
        if key in self.human:
            self.human[key][1] += weight
        else:
            self.human[key] = [a, weight]

    def x_H(self):
        return sum((wt * pt for pt, wt in self.human.values()), np.zeros(self.w.n))

    def z(self):
        return self.x_H() + self.tech_w @ self.Y

    def gap(self, z):
        """Duality gap of ``log F`` at ``z`` and the Frank-Wolfe vertex."""
        _, G = _log_ces(z, self.w)
        G = np.where(np.isfinite(G), G, 1e300)
        a = revenue_maximizer(normalize(G), self.w)
        v, v_key = a, None
        if len(self.Y):
            vals = self.Y @ G
            k = int(np.argmax(vals))
            if vals[k] > float(G @ a):
                v, v_key = self.Y[k], k
        return float(G @ (v - z)), G, v, v_key

    def run(self, tol, max_iter):
        """Away-step iterations until the gap drops below ``tol``; returns ``(gap, iterations)``."""
        w, Y = self.w, self.Y
        z = self.z()
        for it in range(max_iter + 1):
            gap, G, v, v_key = self.gap(z)
            if gap < tol or it == max_iter:
                return gap, it

            # away atom: the active atom worst aligned with the gradient
            away_val, away = np.inf, None
            for key, (pt, wt) in self.human.items():
                if wt > 0 and float(G @ pt) < away_val:
                    away_val, away = float(G @ pt), ("h", key)
            for k in np.flatnonzero(self.tech_w > 0):
                if float(G @ Y[k]) < away_val:
                    away_val, away = float(G @ Y[k]), ("t", int(k))

            if away is None or gap >= float(G @ z) - away_val:
                eta = _line_search(z, v - z, 1.0, w)
                for entry in self.human.values():
                    entry[1] *= 1.0 - eta
                self.tech_w *= 1.0 - eta
                if v_key is None:
                    self.add_human(v, eta)
                else:
                    self.tech_w[v_key] += eta
                z = (1.0 - eta) * z + eta * v
            else:
                kind, key = away
                alpha = self.human[key][1] if kind == "h" else self.tech_w[key]
                u = self.human[key][0] if kind == "h" else Y[key]
                eta_max = alpha / (1.0 - alpha) if alpha < 1.0 else 1e12
                eta = _line_search(z, z - u, eta_max, w)
                for entry in self.human.values():
                    entry[1] *= 1.0 + eta
                self.tech_w *= 1.0 + eta
                if kind == "h":
                    self.human[key][1] -= eta
                else:
                    self.tech_w[key] -= eta
                z = (1.0 + eta) * z - eta * u
                if eta >= eta_max * (1 - 1e-12):  # drop step
                    if kind == "h":
                        self.human[key][1] = 0.0
                    else:
                        self.tech_w[key] = 0.0
            self.human = {k: e for k, e in self.human.items() if e[1] > 0}
        raise AssertionError("unreachable")


def solve_multi(
    w: WorkerJob,
    techs: Sequence[Technology],
    tol: float = FW_TOL,
    max_iter: int = 20_000,
) -> MultiTechSolution:
    """Maximise output over the convex hull of the worker's PPS and the technology points.

    Away-step Frank-Wolfe. The linear oracle at ``z`` is the better of the
    CET revenue maximiser at prices ``grad F(z)`` and the best technology
    point (lowest index on ties). Step sizes come from an exact line search.
    Convex weights are tracked per atom, human atoms being merged when their
    coordinates agree to 1e-10, and yield the supervision shares ``lambdas``
    and the human bundle ``x_H``.

    Near an optimum on a face joining a technology point to the curved
    frontier, plain iterations converge sublinearly. They are therefore run
    only to a coarse gap, after which the weights on the active set are
    solved for directly (see :func:`_polish`). The result is accepted once
    the duality gap ``grad F(z).(v - z)`` is below ``tol * F(z)``; otherwise
    iterations resume from the polished point.
    """
    techs = list(techs)
    B = w.budget
    K = len(techs)
    Y = np.array([tech.point(B) for tech in techs]).reshape(K, w.n)

    aut = solve_autarky(w)
    hull = _Hull(w, Y)
    hull.add_human(aut.x_A, 1.0)
    total = 0
    coarse = max(tol, COARSE_GAP)
    while True:
        budget = max_iter - total
        gap, it = hull.run(coarse, budget)
        total += it
        if K:
            x_H = hull.x_H()
            polished = _polish(w, Y, hull.tech_w.clip(0.0), x_H)
            if polished is not None:
                lam, x_H = polished
                mu = 1.0 - lam.sum()
                hull.reset(x_H, mu, lam)
            gap = hull.gap(hull.z())[0]
        if gap < tol:
            break
        if total >= max_iter:
            raise ConvergenceError(
                f"Frank-Wolfe gap {gap:.3g} above tolerance after {total} iterations", gap=gap, iterations=total
            )
        coarse = max(tol, coarse * 1e-1)

    lam = hull.tech_w.clip(0.0)
    x_H = hull.x_H()
    z = x_H + lam @ Y if K else x_H
    F, grad = ces_output(z, w)
    p_star = normalize(np.where(np.isfinite(grad), grad, 1e300))
    return MultiTechSolution(
        lambdas=lam,
        x_H=x_H,
        z_star=z,
        output=float(F),
        p_star=p_star,
        rho_K_at_p_star=k_unit_revenue(p_star, w, techs),
        gap=gap,
        iterations=total,
    )


def _polish(w: WorkerJob, Y: np.ndarray, lam: np.ndarray, x_H: np.ndarray):
    """Sharpen the Frank-Wolfe weights on their active set.

    The gap certifies the output, but the weights converge much more slowly
    than the output does, because a mixture of several human atoms is
    interior to the PPS. Given the active technologies, the optimal weights
    solve ``grad F(z).(y_k - x_H/mu) = 0`` with ``mu = 1 - sum(lambda)`` and
    ``x_H`` the best human bundle at budget ``mu B`` (envelope conditions).
    If the human share is nil the conditions compare technology points with
    each other instead. Returns None when the polished point is not an
    improvement or leaves the simplex.
    """
    B = w.budget
    mu0 = 1.0 - lam.sum()
    active = np.flatnonzero(lam > ACTIVE_TOL)
    if active.size == 0:
        return None
    F0 = float(ces_output(x_H + lam @ Y, w)[0])
    human_active = mu0 > ACTIVE_TOL
    warm = {"x": x_H / mu0 if human_active else None}

    def assemble(free):
        lam_a = np.zeros_like(lam)
        if human_active:
            lam_a[active] = free
        else:
            lam_a[active[1:]] = free
            lam_a[active[0]] = 1.0 - free.sum()
        return lam_a

    def human_bundle(lam_a):
        mu = 1.0 - lam_a.sum()
        if mu <= 0:
            return np.zeros(w.n)
        res = concave_maximize(w, mu * B, shift=lam_a @ Y, x0=warm["x"])
        warm["x"] = res.x / mu
        return res.x

    def conditions(free):
        lam_a = assemble(free)
        if np.any(lam_a < 0) or lam_a.sum() > 1:
            return np.full(free.size, 1e6)
        xh = human_bundle(lam_a) if human_active else np.zeros(w.n)
        _, G = _log_ces(xh + lam_a @ Y, w)
        if human_active:
            return np.array([G @ (Y[k] - xh / (1.0 - lam_a.sum())) for k in active])
        return np.array([G @ (Y[k] - Y[active[0]]) for k in active[1:]])

    start = lam[active] if human_active else lam[active[1:]]
    if start.size == 0:
        return None
    try:
        sol = root(conditions, start, method="hybr", options={"xtol": 1e-13})
    except (ConvergenceError, FloatingPointError):
        return None
    # hybr reports "not making good progress" once it reaches the inner
    # solver's noise floor, so judge by the residual instead of the flag
    if not np.all(np.abs(sol.fun) < POLISH_RESIDUAL):
        return None
    lam_a = assemble(sol.x)
    if np.any(lam_a < 0) or lam_a.sum() > 1:
        return None
    xh = human_bundle(lam_a) if human_active else np.zeros(w.n)
    if float(ces_output(xh + lam_a @ Y, w)[0]) < F0 * (1 - 1e-12):
        return None
    return lam_a, xh


class EntryDecision(NamedTuple):
    adopt: bool
    threshold: float
    prior_threshold: float  # same prices, one fewer technology in the hull
    p_star: np.ndarray
    rising_bar: bool


def entry_next(
    w: WorkerJob,
    adopted: Sequence[Technology],
    candidate: Technology,
    solution: Optional[MultiTechSolution] = None,
) -> EntryDecision:
    """Whether ``candidate`` is worth adding to the technologies in ``adopted``.

    Evaluated at the shadow prices of the current optimum: adopt iff
    ``chi > rho_K(p*) / p*.t``. The threshold is also recomputed with the last
    technology removed from the hull, at the same prices, which can only be
    lower (the rising bar).
    """
    adopted = list(adopted)
    if adopted:
        sol = solution or solve_multi(w, adopted)
        p = sol.p_star
    else:
        p = solve_autarky(w).p_A
    pt = float(p @ candidate.t)
    rho_K = k_unit_revenue(p, w, adopted)
    rho_prev = k_unit_revenue(p, w, adopted[:-1])
    if pt <= 0:
        return EntryDecision(False, np.inf, np.inf, p, True)
    threshold, prior = rho_K / pt, rho_prev / pt
    adopt = exceeds(candidate.chi * pt, rho_K)
    return EntryDecision(adopt, threshold, prior, p, threshold >= prior)


def all_in_next(w: WorkerJob, adopted: Sequence[Technology], candidate: Technology) -> bool:
    """Sufficient condition for devoting the whole budget to ``candidate``.

    At ``p100 = grad F(t)/|grad F(t)|`` the candidate's point must beat every
    human bundle and every earlier technology point. Always False when some
    component of the candidate direction is zero.
    """
    p100 = corner_prices(candidate.t, w)
    if p100 is None:
        return False
    value = candidate.chi * float(p100 @ candidate.t)
    if not exceeds(value, float(unit_revenue(p100, w))):
        return False
    return all(exceeds(value, tech.chi * float(p100 @ tech.t)) for tech in adopted)
