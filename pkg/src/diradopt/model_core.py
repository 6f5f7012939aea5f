"""CES job requirements, CET skills, and the unit revenue function.

Everything here is vectorised over leading axes: a task vector has shape
``(..., N)`` and scalar results have shape ``(...)``. Computations run in
log space because the exponents ``sigma/(sigma-1)`` and ``(gamma+1)/gamma``
become very large at the edges of the admissible parameter range.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np

SIGMA_RANGE = (1e-3, 1e3)
GAMMA_RANGE = (1e-3, 1e3)
SIGMA_ONE_EXCLUSION = 1e-6
REL_TOL = 1e-9


class ValidationError(ValueError):
    """Invalid model primitives. ``field`` names the offending input."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ConvergenceError(RuntimeError):
    """A numerical solver stopped before meeting its tolerance."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


def _positive_vector(name, v):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValidationError(name, "must be a non-empty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(name, "must be finite")
    if not np.all(arr > 0):
        raise ValidationError(name, "all components must be > 0")
    return arr


@dataclass(frozen=True)
class WorkerJob:
    """A worker-job match.

    Parameters
    ----------
    theta : array_like
        Task value weights (job requirements), all > 0.
    s : array_like
        Skill levels; higher ``s_i`` means task ``i`` is cheaper to do.
    sigma : float
        Elasticity of substitution across tasks in output. Must not be 1.
    gamma : float
        Elasticity of transformation of the resource budget across tasks.
    budget : float
        Resource units (time / attention) available.
    """

    theta: np.ndarray
    s: np.ndarray
    sigma: float
    gamma: float
    budget: float = 1.0

    def __post_init__(self):
        theta = _positive_vector("theta", self.theta)
        s = _positive_vector("s", self.s)
        if theta.shape != s.shape:
            raise ValidationError("s", f"length {s.size} does not match theta length {theta.size}")
        sigma, gamma, budget = float(self.sigma), float(self.gamma), float(self.budget)
        if not (np.isfinite(sigma) and SIGMA_RANGE[0] <= sigma <= SIGMA_RANGE[1]):
            raise ValidationError("sigma", f"must lie in [{SIGMA_RANGE[0]}, {SIGMA_RANGE[1]}], got {sigma}")
        if abs(sigma - 1.0) < SIGMA_ONE_EXCLUSION:
            raise ValidationError("sigma", "sigma = 1 (Cobb-Douglas limit) is not supported")
        if not (np.isfinite(gamma) and GAMMA_RANGE[0] <= gamma <= GAMMA_RANGE[1]):
            raise ValidationError("gamma", f"must lie in [{GAMMA_RANGE[0]}, {GAMMA_RANGE[1]}], got {gamma}")
        if not (np.isfinite(budget) and budget > 0):
            raise ValidationError("budget", f"must be > 0, got {budget}")
        theta.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "budget", budget)

    @property
    def n(self) -> int:
        return self.theta.size

    def replace(self, **changes) -> "WorkerJob":
        return replace(self, **changes)


def _check_x(x, w: WorkerJob, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (w.n,):
        raise ValueError(f"{name} has trailing dimension {x.shape[-1:]} but the worker has N={w.n} tasks")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")
    if np.any(x < 0):
        raise ValueError(f"{name} must be nonnegative")
    return x


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def logsumexp(a, axis=-1, keepdims=False):
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return out if keepdims else np.squeeze(out, axis=axis)


def normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean length along the last axis."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise ValueError("cannot normalise the zero vector")
    return v / norm


def as_price_vector(p, n: Optional[int] = None) -> np.ndarray:
    """Validate a nonnegative price vector and return it with unit norm."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (n is not None and p.size != n):
        raise ValueError(f"price vector must be 1-d of length {n}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError("price vector must be finite and nonnegative")
    if not np.any(p > 0):
        raise ValueError("price vector must not be zero")
    return normalize(p)


def ces_output(x, w: WorkerJob) -> Tuple[np.ndarray, np.ndarray]:
    """CES output ``F(x)`` and its gradient.

    At a boundary point (some ``x_i = 0``) the partial derivative in that
    task is unbounded; it is returned as ``inf``. With ``sigma < 1`` such a
    point also has zero output.
    """
    return _ces(_check_x(x, w), w)


def _ces(x, w):
    sigma = w.sigma
    r = (sigma - 1.0) / sigma
    logx = _log(x)
    logtheta = np.log(w.theta)
    if sigma < 1:
        zero = np.any(x == 0, axis=-1)
        safe_logx = np.where(x == 0, 0.0, logx)
        logF = logsumexp(logtheta / sigma + r * safe_logx, axis=-1) / r
        logF = np.where(zero, -np.inf, logF)
    else:
        logF = logsumexp(logtheta / sigma + r * logx, axis=-1) / r
    F = np.exp(logF)
    with np.errstate(invalid="ignore", over="ignore"):
        grad = np.exp((logtheta + logF[..., None] - logx) / sigma)
    grad = np.where(x == 0, np.inf, grad)
    return F, grad


def _log_ces(x, w):
    """``log F`` and ``grad F / F``; finite where ``F`` itself would overflow."""
    sigma = w.sigma
    r = (sigma - 1.0) / sigma
    logx = _log(x)
    logtheta = np.log(w.theta)
    if sigma < 1:
        zero = np.any(x == 0, axis=-1)
        logF = logsumexp(logtheta / sigma + r * np.where(x == 0, 0.0, logx), axis=-1) / r
        logF = np.where(zero, -np.inf, logF)
    else:
        logF = logsumexp(logtheta / sigma + r * logx, axis=-1) / r
    with np.errstate(invalid="ignore", over="ignore"):
        dlog = np.exp((logtheta - logx) / sigma - r * logF[..., None])
    return logF, np.where(x == 0, np.inf, dlog)


def cet_cost(x, w: WorkerJob) -> Tuple[np.ndarray, np.ndarray]:
    """CET resource use ``g(x)`` and its gradient (zero gradient at ``x = 0``)."""
    return _cet(_check_x(x, w), w)


def _cet(x, w):
    gamma = w.gamma
    q = (gamma + 1.0) / gamma
    logx = _log(x)
    logs = np.log(w.s)
    logg = logsumexp(-logs / gamma + q * logx, axis=-1) / q
    g = np.exp(logg)
    with np.errstate(invalid="ignore"):
        grad = np.exp((logx - logs - logg[..., None]) / gamma)
    grad = np.where(np.isfinite(logg)[..., None], grad, 0.0)
    return g, grad


def unit_revenue(p, w: WorkerJob) -> np.ndarray:
    """Support function of the unit-budget PPS, ``max p.x s.t. g(x) <= 1``."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (w.n,):
        raise ValueError(f"price vector must have N={w.n} components")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("price vector must be finite and nonnegative")
    if np.any(np.all(p == 0, axis=-1)):
        raise ValueError("unit revenue is undefined at the zero price vector")
    e = w.gamma + 1.0
    return np.exp(logsumexp(np.log(w.s) + e * _log(p), axis=-1) / e)


def revenue_maximizer(p, w: WorkerJob, budget: Optional[float] = None) -> np.ndarray:
    """Frontier bundle maximising ``p.x`` subject to ``g(x) <= budget``.

    This is the exact linear-maximisation oracle over the worker's PPS:
    ``x_i = B s_i (p_i / rho(p))**gamma``.
    """
    B = w.budget if budget is None else float(budget)
    rho = unit_revenue(p, w)
    p = np.asarray(p, dtype=float)
    return B * w.s * (p / rho[..., None]) ** w.gamma


# --- generic inner solver -------------------------------------------------

Objective = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass
class MaximizeResult:
    """Solution and diagnostics from :func:`concave_maximize`."""

    x: np.ndarray
    value: float
    iterations: int
    kkt_residual: float
    converged: bool
    shares: np.ndarray


def _frontier_from_shares(shares, w: WorkerJob, budget):
    kappa = w.gamma / (w.gamma + 1.0)
    return budget * w.s ** (1.0 / (w.gamma + 1.0)) * shares**kappa


def _shares_from_bundle(x, w: WorkerJob):
    x = np.asarray(x, dtype=float)
    q = (w.gamma + 1.0) / w.gamma
    terms = np.exp(-np.log(w.s) / w.gamma + q * _log(x))
    return terms / terms.sum(axis=-1, keepdims=True)


def kkt_residual(grad_obj, x, w: WorkerJob) -> np.ndarray:
    """Relative distance of ``grad_obj`` from the cone spanned by ``grad g(x)``."""
    g, grad_g = _cet(x, w)
    mu = np.sum(grad_obj * x, axis=-1) / g
    r = grad_obj - mu[..., None] * grad_g
    return np.linalg.norm(r, axis=-1) / np.linalg.norm(grad_obj, axis=-1)


def concave_maximize(
    w: WorkerJob,
    effective_budget: float,
    shift=None,
    objective: Optional[Objective] = None,
    *,
    x0=None,
    restarts: int = 8,
    seed: int = 0,
    tol: float = 1e-10,
    kkt_tol: float = 1e-8,
    max_iter: int = 100_000,
    stall_iter: int = 500,
) -> MaximizeResult:
    """Maximise ``objective(x + shift)`` subject to ``g(x) <= effective_budget``.

    The objective must be concave and increasing, so the optimum sits on the
    frontier. Frontier points are parametrised by resource shares ``w`` on
    the simplex, ``x_i = b s_i**(1/(gamma+1)) w_i**(gamma/(gamma+1))``, which
    keeps the objective concave in ``w``. The shares are updated
    multiplicatively, ``w <- w**(1-eta) * (w*G)**eta`` with ``G`` the share
    gradient; each iteration tries a few step exponents ``eta`` around the
    last accepted one and keeps the best.

    ``objective`` maps an array of shape ``(..., N)`` to ``(value, grad)`` and
    defaults to the worker's CES output. All restarts run as one batch; the
    first starts from ``x0`` when given.

    Raises
    ------
    ConvergenceError
        If the KKT residual is still above ``kkt_tol`` after ``max_iter``
        iterations, or has not improved for ``stall_iter`` iterations.
    """
    # tie window for ranking candidate steps: relative for a user objective,
    # absolute (scaled by the 1/r amplification) for log F
    log_mode = objective is None
    noise = 8 * np.finfo(float).eps
    if log_mode:
        noise *= 1.0 + abs(w.sigma / (w.sigma - 1.0))

        def objective(z):
            return _log_ces(z, w)
    b = float(effective_budget)
    if not np.isfinite(b) or b < 0:
        raise ValueError(f"effective_budget must be >= 0, got {effective_budget}")
    n = w.n
    shift = np.zeros(n) if shift is None else _check_x(shift, w, "shift")

    if b == 0.0 or n == 1:
        shares = np.ones(n)
        x = _frontier_from_shares(shares, w, b) if b > 0 else np.zeros(n)
        value, grad = objective(x + shift)
        res = float(kkt_residual(grad, x, w)) if b > 0 else 0.0
        value = float(np.exp(value)) if log_mode else float(value)
        return MaximizeResult(x, value, 0, res, True, shares)

    rng = np.random.default_rng(seed)
    R = max(restarts, 1)
    W = rng.dirichlet(np.ones(n), size=R)
    W[0] = np.full(n, 1.0 / n) if x0 is None else _shares_from_bundle(np.maximum(x0, 1e-300), w)
    W = np.clip(W, 1e-300, None)
    W /= W.sum(axis=1, keepdims=True)
    kappa = w.gamma / (w.gamma + 1.0)
    steps = np.array([0.25, 1.0, 4.0])

    def evaluate(W):
        X = _frontier_from_shares(W, w, b)
        val, grad = objective(X + shift)
        return X, np.array(val, dtype=float), np.array(grad, dtype=float)

    X, val, grad = evaluate(W)
    resid = kkt_residual(grad, X, w)
    eta = np.ones(R)
    last_gain = np.full(R, np.inf)
    best_resid, since_progress = resid.min(), 0
    it = 0
    while it < max_iter:
        act = np.flatnonzero(~((resid < kkt_tol) & (last_gain <= tol)))
        if act.size == 0 or since_progress > stall_iter:
            break
        it += 1
        m = act.size
        U = kappa * X[act] * grad[act]
        logW = np.log(W[act])
        target = np.log(U) - np.log(U.sum(axis=1, keepdims=True))
        # candidate step exponents per active row, evaluated as one batch
        e = (eta[act][:, None] * steps[None, :]).reshape(-1, 1)
        logWn = (1 - e) * np.repeat(logW, len(steps), axis=0) + e * np.repeat(target, len(steps), axis=0)
        Wn = np.clip(np.exp(logWn - logsumexp(logWn, axis=1, keepdims=True)), 1e-300, None)
        Xn, valn, gradn = evaluate(Wn)
        residn = kkt_residual(gradn, Xn, w)
        valn = np.where(np.isfinite(valn), valn, -np.inf).reshape(m, -1)
        residn = np.where(np.isfinite(residn), residn, np.inf).reshape(m, -1)
        cur = val[act][:, None]
        # below a few ulps the values cannot rank candidates; fall back to the residual
        window = noise * (np.abs(cur) + 1.0) if log_mode else noise * np.abs(cur)
        floor = cur - window
        tie = (valn >= floor) & (valn <= cur + window)
        score = np.where(tie, cur, valn)
        best_val = score.max(axis=1, keepdims=True)
        cand = (score >= best_val) & (valn >= floor)
        pick = np.argmin(np.where(cand, residn, np.inf), axis=1)
        rows = np.arange(m)
        ok = cand[rows, pick] & ((valn[rows, pick] > cur[:, 0]) | (residn[rows, pick] < resid[act]))
        flat = rows * len(steps) + pick
        acc, rej = act[ok], act[~ok]
        gain = np.maximum(valn[rows, pick][ok] - val[acc], 0.0)
        last_gain[acc] = gain if log_mode else gain / np.abs(val[acc])
        W[acc], X[acc], val[acc], grad[acc] = Wn[flat[ok]], Xn[flat[ok]], valn[rows, pick][ok], gradn[flat[ok]]
        resid[acc] = residn[rows, pick][ok]
        eta[acc] = np.clip(eta[acc] * steps[pick[ok]], 1e-12, 1e6)
        eta[rej] *= 0.05
        # the step is too small to move the shares in double precision
        stalled = rej[eta[rej] < 1e-12]
        last_gain[stalled] = 0.0
        eta[stalled] = 1.0
        if resid.min() < best_resid * (1 - 1e-3):
            best_resid, since_progress = resid.min(), 0
        else:
            since_progress += 1
    best = int(np.argmax(np.where(np.isfinite(val), val, -np.inf)))
    converged = bool(resid[best] < kkt_tol)
    value = float(np.exp(val[best])) if log_mode else float(val[best])
    if not converged:
        raise ConvergenceError(
            f"concave_maximize did not reach KKT residual {kkt_tol:g} in {it} iterations",
            iterations=it, kkt_residual=float(resid[best]), value=value,
        )
    return MaximizeResult(X[best].copy(), value, it, float(resid[best]), converged, W[best].copy())
