"""Closed-form pre-technology allocation under CES requirements and CET skills."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model_core import WorkerJob, ces_output, logsumexp, normalize, unit_revenue

# Near-zero theta/s ratios are floored before the 1/(gamma+sigma) power,
# which can reach 500 at the bottom of the parameter range.
RATIO_FLOOR = 1e-12
PRICE_COSINE_TOL = 1e-8


@dataclass(frozen=True)
class AutarkySolution:
    x_A: np.ndarray
    p_A: np.ndarray
    phi: float
    output: float
    rho_A: float
    shares: np.ndarray


def _log_share_weights(w: WorkerJob):
    a = 1.0 / (w.gamma + w.sigma)
    return (w.sigma - 1.0) * a * np.log(w.s) + (w.gamma + 1.0) * a * np.log(w.theta)


def productivity_index(w: WorkerJob) -> float:
    """Skill-requirement alignment index ``sum_j s_j**((sigma-1)/(gamma+sigma)) theta_j**((gamma+1)/(gamma+sigma))``."""
    return float(np.exp(logsumexp(_log_share_weights(w))))


def activity_shares(w: WorkerJob) -> np.ndarray:
    """Share of the resource budget spent on each task at the autarky optimum."""
    lw = _log_share_weights(w)
    return np.exp(lw - logsumexp(lw))


def autarky_allocation(w: WorkerJob) -> np.ndarray:
    a = 1.0 / (w.gamma + w.sigma)
    log_phi = logsumexp(_log_share_weights(w))
    logx = w.sigma * a * np.log(w.s) + w.gamma * a * np.log(w.theta) - w.gamma / (w.gamma + 1.0) * log_phi
    return w.budget * np.exp(logx)


def autarky_prices(w: WorkerJob) -> np.ndarray:
    """Power-law shadow prices, ``p_i`` proportional to ``(theta_i/s_i)**(1/(gamma+sigma))``."""
    ratio = np.maximum(w.theta / w.s, RATIO_FLOOR)
    logp = np.log(ratio) / (w.gamma + w.sigma)
    return normalize(np.exp(logp - logp.max()))


def solve_autarky(w: WorkerJob) -> AutarkySolution:
    """Output-maximising task bundle with no technology, plus its supporting prices.

    The power-law prices are checked against the normalised CES gradient at
    the allocation; if they disagree by more than 1e-8 in cosine distance the
    gradient wins, since it defines the supporting hyperplane.
    """
    x_A = autarky_allocation(w)
    p_A = autarky_prices(w)
    F, grad = ces_output(x_A, w)
    if np.all(np.isfinite(grad)) and np.any(grad > 0):
        p_grad = normalize(grad)
        if 1.0 - float(p_A @ p_grad) > PRICE_COSINE_TOL:
            warnings.warn("power-law autarky prices disagree with grad F(x_A); using the gradient", RuntimeWarning)
            p_A = p_grad
    return AutarkySolution(
        x_A=x_A,
        p_A=p_A,
        phi=productivity_index(w),
        output=float(F),
        rho_A=float(unit_revenue(p_A, w)),
        shares=activity_shares(w),
    )


def output_per_budget_exponent(w: WorkerJob) -> float:
    """Power of the productivity index giving autarky output per unit budget.

    Evaluating the CES at the closed-form allocation gives
    ``Y_A / B = Phi**((gamma+sigma) / ((sigma-1)(gamma+1)))``. The simpler
    exponent ``sigma/(sigma-1)`` is wrong whenever ``gamma > 0``: in the
    symmetric two-task case with sigma=2, gamma=1 it predicts 4, while the
    optimum (confirmed by brute-force search over the frontier) is ``2*sqrt(2)``.
    """
    return (w.gamma + w.sigma) / ((w.sigma - 1.0) * (w.gamma + 1.0))


def autarky_output_per_budget(w: WorkerJob) -> float:
    """``Y_A / B`` from the productivity index alone (evaluated in log space)."""
    return float(np.exp(output_per_budget_exponent(w) * logsumexp(_log_share_weights(w))))


def jevons_share_derivative(w: WorkerJob, i: int) -> float:
    """Derivative of task ``i``'s activity share with respect to its own skill.

    ``d omega_i / d s_i = (sigma-1)/((gamma+sigma) s_i) * omega_i (1 - omega_i)``,
    positive exactly when tasks are substitutes (sigma > 1).
    """
    if not 0 <= i < w.n:
        raise IndexError(f"task index {i} out of range for N={w.n}")
    omega = activity_shares(w)[i]
    return (w.sigma - 1.0) / ((w.gamma + w.sigma) * w.s[i]) * omega * (1.0 - omega)
