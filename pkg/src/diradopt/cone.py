"""Cone of adopted technology directions around the autarky prices."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional

import numpy as np

from .adoption import BOUNDARY_RTOL, corner_threshold, entry_threshold, exceeds
from .autarky import autarky_prices
from .model_core import WorkerJob, ValidationError, normalize, unit_revenue

SQRT_REGIME_RTOL = 5e-3
CHUNK = 4096


@dataclass(frozen=True)
class ConeSpec:
    p_A: np.ndarray
    rho: float
    chi: float

    @classmethod
    def for_worker(cls, w: WorkerJob, chi: float) -> "ConeSpec":
        p_A = autarky_prices(w)
        return cls(p_A, float(unit_revenue(p_A, w)), float(chi))

    @property
    def empty(self) -> bool:
        return self.chi < self.rho


def half_angle(cone: ConeSpec) -> float:
    """``arccos(rho/chi)``; 0 at ``chi == rho`` and NaN when the cone is empty."""
    if cone.chi <= 0:
        raise ValueError("capability must be > 0")
    ratio = cone.rho / cone.chi
    if ratio > 1.0:
        return math.nan
    return math.acos(ratio)


def in_cone(t, cone: ConeSpec) -> bool:
    """Whether direction ``t`` is strictly inside the cone (boundary excluded)."""
    return exceeds(cone.chi * float(np.dot(cone.p_A, t)), cone.rho)


class SqrtApproximation(NamedTuple):
    exact: float
    approx: float

    @property
    def relative_error(self) -> float:
        return abs(self.approx - self.exact) / self.exact

    @property
    def in_regime(self) -> bool:
        return self.relative_error < SQRT_REGIME_RTOL


def sqrt_approximation_error(rho: float, chi: float) -> SqrtApproximation:
    """Exact half-angle next to its near-threshold form ``sqrt(2 (chi/rho - 1))``."""
    if not chi > rho:
        raise ValueError("the square-root law needs chi > rho")
    return SqrtApproximation(math.acos(rho / chi), math.sqrt(2.0 * (chi / rho - 1.0)))


class MeasureEstimate(NamedTuple):
    value: float
    stderr: float
    samples: int


def sample_directions(n: int, samples: int, seed: int, start: int = 0) -> np.ndarray:
    """Uniform directions on the positive orthant of the unit sphere.

    Sample ``i`` always comes from chunk ``i // CHUNK``, whose generator is
    keyed on ``(seed, chunk)``; any partition of the index range therefore
    reproduces the same draws.
    """
    out = np.empty((samples, n))
    i = 0
    while i < samples:
        idx = start + i
        chunk, offset = divmod(idx, CHUNK)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, chunk])))
        block = np.abs(rng.standard_normal((CHUNK, n)))[offset:]
        take = min(len(block), samples - i)
        out[i:i + take] = block[:take]
        i += take
    return normalize(out)


def _count_inside(cone: ConeSpec, n: int, seed: int, lo: int, hi: int) -> int:
    t = sample_directions(n, hi - lo, seed, start=lo)
    lhs = cone.chi * (t @ cone.p_A)
    return int(np.count_nonzero(lhs > cone.rho + BOUNDARY_RTOL * abs(cone.rho)))


def adoption_measure(cone: ConeSpec, samples: int, seed: int = 0, workers: Optional[int] = None) -> MeasureEstimate:
    """Monte Carlo share of uniformly drawn directions inside the cone.

    Chunks can run on a thread pool; counts are merged in chunk order, so the
    result does not depend on ``workers``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = cone.p_A.size
    if cone.empty:
        return MeasureEstimate(0.0, 0.0, samples)
    bounds = [(lo, min(lo + CHUNK, samples)) for lo in range(0, samples, CHUNK)]
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            counts = list(pool.map(lambda b: _count_inside(cone, n, seed, *b), bounds))
    else:
        counts = [_count_inside(cone, n, seed, *b) for b in bounds]
    m = sum(counts) / samples
    return MeasureEstimate(m, math.sqrt(m * (1 - m) / samples), samples)


class CurvaturePoint(NamedTuple):
    gamma: float
    sigma: float
    phi0: float
    chi_ratio: float
    uniform_cosine: float  # p_A . (1,...,1)/sqrt(N)


def curvature_sweep(w: WorkerJob, totals: Iterable[float], chi: float, t) -> List[CurvaturePoint]:
    """Half-angle and ``chi100/chi0`` as total curvature ``gamma + sigma`` varies.

    Each grid value ``k`` rescales both elasticities proportionally,
    ``gamma = k * gamma/(gamma+sigma)`` and likewise for sigma, keeping
    theta, s, chi and the reference direction ``t`` fixed.
    """
    t = np.asarray(t, dtype=float)
    share = w.gamma / (w.gamma + w.sigma)
    uniform = np.full(w.n, 1.0 / math.sqrt(w.n))
    rows = []
    for k in totals:
        k = float(k)
        try:
            wk = w.replace(gamma=k * share, sigma=k * (1.0 - share))
        except ValidationError as exc:
            raise ValidationError("sweeps.curvature", f"gamma+sigma={k} gives invalid {exc}") from None
        cone = ConeSpec.for_worker(wk, chi)
        ratio = corner_threshold(t, wk) / entry_threshold(t, wk)
        rows.append(CurvaturePoint(wk.gamma, wk.sigma, half_angle(cone), ratio, float(cone.p_A @ uniform)))
    return rows
