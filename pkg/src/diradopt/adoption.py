"""Single-technology adoption: thresholds and the optimal supervision share."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autarky import AutarkySolution, autarky_prices, productivity_index, solve_autarky
from .model_core import (
    ConvergenceError,
    ValidationError,
    WorkerJob,
    cet_cost,
    ces_output,
    concave_maximize,
    logsumexp,
    normalize,
    unit_revenue,
)

# Strict inequalities ("adopts iff chi > chi_0") are decided with this much
# relative slack so that exact boundary cases do not flip on rounding.
BOUNDARY_RTOL = 1e-12
LAMBDA_TOL = 1e-10

NO_ADOPTION = "no-adoption"
PARTIAL = "partial"
ALL_IN = "all-in"


def exceeds(a: float, b: float) -> bool:
    """``a > b`` with a relative dead band of ``BOUNDARY_RTOL``."""
    return a > b + BOUNDARY_RTOL * abs(b)


@dataclass(frozen=True)
class Technology:
    """A directional technology: unit direction ``t`` and capability ``chi``."""

    t: np.ndarray
    chi: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 1 or not np.all(np.isfinite(t)):
            raise ValidationError("t", "must be a finite 1-d array")
        if np.any(t < 0):
            raise ValidationError("t", "components must be nonnegative")
        norm = np.linalg.norm(t)
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError("t", f"must have unit length, got norm {norm:.12g}")
        chi = float(self.chi)
        if not (np.isfinite(chi) and chi >= 0):
            raise ValidationError("chi", f"must be finite and >= 0, got {self.chi}")
        t = t / norm
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "chi", chi)

    @classmethod
    def along(cls, direction, chi: float) -> "Technology":
        """Build a technology from any nonzero nonnegative direction."""
        return cls(normalize(np.asarray(direction, dtype=float)), chi)

    def point(self, budget: float) -> np.ndarray:
        """Task bundle produced when the whole budget supervises the technology."""
        return budget * self.chi * self.t


@dataclass(frozen=True)
class ThresholdPair:
    chi0: float
    chi100: float
    c: float
    collinear: bool


@dataclass(frozen=True)
class AdoptionSolution:
    lambda_star: float
    x_H: np.ndarray
    z_star: np.ndarray
    output: float
    p_star: np.ndarray
    regime: str
    derivative: float = 0.0  # f'(lambda*) on the partial branch
    evaluations: int = 0


def _direction(t, w: WorkerJob) -> np.ndarray:
    t = np.asarray(t.t if isinstance(t, Technology) else t, dtype=float)
    if t.shape != (w.n,):
        raise ValueError(f"direction must have N={w.n} components")
    return t


def direction_bundle(t, w: WorkerJob) -> np.ndarray:
    """The frontier bundle the worker could produce alone along ``t``."""
    t = _direction(t, w)
    return w.budget / float(cet_cost(t, w)[0]) * t


def absolute_advantage(tech: Technology, w: WorkerJob) -> bool:
    """Whether the technology point lies outside the worker's PPS (``chi g(t) > 1``)."""
    g_t = float(cet_cost(_direction(tech, w), w)[0])
    return exceeds(tech.chi * g_t, 1.0)


def adoption_threshold(t, p, w: WorkerJob) -> float:
    """Capability at which ``t`` breaks even at prices ``p``: ``rho(p) / p.t``."""
    t = _direction(t, w)
    pt = float(np.dot(p, t))
    if pt <= 0:
        return math.inf
    return float(unit_revenue(p, w)) / pt


def entry_threshold(t, w: WorkerJob) -> float:
    """Smallest capability at which any use of direction ``t`` raises output."""
    t = _direction(t, w)
    xi = np.maximum(w.theta / w.s, 1e-12) ** (1.0 / (w.gamma + w.sigma))
    denom = float(np.dot(t, xi))
    if denom <= 0:
        return math.inf
    return productivity_index(w) ** (1.0 / (w.gamma + 1.0)) / denom


def corner_prices(t, w: WorkerJob) -> Optional[np.ndarray]:
    """Normalised CES gradient at the technology direction (None if unbounded)."""
    t = _direction(t, w)
    if np.any(t <= 0):
        return None
    logp = (np.log(w.theta) - np.log(t)) / w.sigma
    return normalize(np.exp(logp - logp.max()))


def corner_threshold(t, w: WorkerJob) -> float:
    """Capability above which the whole budget goes to supervising the technology.

    Infinite whenever some ``t_i = 0``: the CES marginal product of that task
    is then unbounded at the all-in point.
    """
    t = _direction(t, w)
    if np.any(t <= 0):
        return math.inf
    sigma, e = w.sigma, w.gamma + 1.0
    log_num = logsumexp(np.log(w.s) + e / sigma * (np.log(w.theta) - np.log(t))) / e
    log_den = logsumexp(np.log(w.theta) / sigma + (1.0 - 1.0 / sigma) * np.log(t))
    return float(np.exp(log_num - log_den))


def threshold_pair(t, w: WorkerJob, autarky: Optional[AutarkySolution] = None) -> ThresholdPair:
    """Entry threshold, all-in threshold, and the isoquant scaling ``F(x_A)/F(t)``.

    For ``t`` not collinear with ``x_A`` these are strictly ordered
    ``chi0 < c < chi100``; in the collinear case all three coincide and
    ``collinear`` is set.
    """
    t = _direction(t, w)
    aut = autarky or solve_autarky(w)
    F_t = float(ces_output(t, w)[0])
    if not F_t > 0:
        raise ValueError("threshold_pair needs F(t) > 0")
    if not float(aut.p_A @ t) > 0:
        raise ValueError("threshold_pair needs p_A . t > 0")
    chi0 = entry_threshold(t, w)
    chi100 = corner_threshold(t, w)
    c = aut.output / w.budget / F_t
    collinear = abs(chi100 - chi0) <= 1e-9 * chi0 and abs(c - chi0) <= 1e-9 * chi0
    return ThresholdPair(chi0, chi100, c, collinear)


def intensity_value(lam: float, tech: Technology, w: WorkerJob, x0=None, **solver):
    """``f(lambda)``: best output when a share ``lam`` of the budget supervises ``tech``."""
    y = tech.point(w.budget)
    if lam >= 1.0:
        return float(ces_output(y, w)[0]), np.zeros(w.n)
    res = concave_maximize(w, (1.0 - lam) * w.budget, shift=lam * y, x0=x0, **solver)
    return res.value, res.x


def _golden_max(f, lo, hi, tol):
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
    return (a + b) / 2


def classify(tech: Technology, w: WorkerJob, autarky: Optional[AutarkySolution] = None) -> str:
    """Regime implied by the closed-form thresholds."""
    t = _direction(tech, w)
    aut = autarky or solve_autarky(w)
    if not absolute_advantage(tech, w) or not float(aut.p_A @ t) > 0:
        return NO_ADOPTION
    if not exceeds(tech.chi, entry_threshold(t, w)):
        return NO_ADOPTION
    if not exceeds(corner_threshold(t, w), tech.chi):
        return ALL_IN
    return PARTIAL


def optimal_intensity(
    tech: Technology,
    w: WorkerJob,
    tol: float = LAMBDA_TOL,
    autarky: Optional[AutarkySolution] = None,
) -> AdoptionSolution:
    """Optimal share of the budget spent supervising ``tech``.

    The regime follows from the thresholds. On the partial branch
    ``f(lambda) = max_x F((1-lambda) x + lambda B chi t)`` is strictly concave,
    so ``lambda*`` is located by golden-section search to width ``tol``, with
    the inner maximisation done by :func:`concave_maximize` warm-started from
    the previous evaluation.
    """
    aut = autarky or solve_autarky(w)
    regime = classify(tech, w, aut)
    if regime == NO_ADOPTION:
        return AdoptionSolution(0.0, aut.x_A.copy(), aut.x_A.copy(), aut.output, aut.p_A.copy(), NO_ADOPTION)
    y = tech.point(w.budget)
    if regime == ALL_IN:
        F, grad = ces_output(y, w)
        return AdoptionSolution(1.0, np.zeros(w.n), y, float(F), normalize(grad), ALL_IN)

    warm = {"x": aut.x_A, "n": 0}

    def f(lam):
        val, x = intensity_value(lam, tech, w, x0=warm["x"])
        warm["x"], warm["n"] = x, warm["n"] + 1
        return val

    lam = _golden_max(f, 0.0, 1.0, tol)
    output, x_H = intensity_value(lam, tech, w, x0=warm["x"])
    z = x_H + lam * y
    _, grad = ces_output(z, w)
    # envelope theorem: f'(lam) = grad F(z) . (y - x_H / (1 - lam))
    deriv = float(grad @ (y - x_H / (1.0 - lam)))
    if not 0.0 < lam < 1.0:
        raise ConvergenceError("golden-section search left the partial region", lambda_star=lam)
    return AdoptionSolution(lam, x_H, z, output, normalize(grad), PARTIAL, deriv, warm["n"] + 1)
