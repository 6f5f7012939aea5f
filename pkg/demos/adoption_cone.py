"""
Which directions are worth adopting
===================================

Fix a capability chi and ask which unit directions t clear the entry bar.
The answer is a circular cone around the autarky price vector, whose width
grows like the square root of the excess of chi over rho. Monte Carlo over
the positive orthant gives the share of directions inside it.
"""

import math

import numpy as np

from diradopt import WorkerJob
from diradopt.cone import ConeSpec, adoption_measure, curvature_sweep, half_angle, sqrt_approximation_error

worker = WorkerJob(theta=np.array([1.0, 2.0, 0.5]), s=np.array([2.0, 0.7, 1.0]), sigma=1.5, gamma=2.0)

base = ConeSpec.for_worker(worker, 1.0)
rho = base.rho
print("p_A =", base.p_A, " rho =", rho)

# %%
# Half-angle against relative capability, and how good sqrt(2 (chi/rho - 1)) is.
print("\n chi/rho     phi0      sqrt law   rel. err")
for ratio in [1.0001, 1.001, 1.01, 1.1, 1.5, 3.0, 10.0]:
    approx = sqrt_approximation_error(rho, ratio * rho)
    print(f"{ratio:8.4f}  {approx.exact:9.6f}  {approx.approx:9.6f}  {approx.relative_error:9.2e}")

# %%
# Share of the positive orthant inside the cone. The estimate is reproducible
# for a given seed whatever the number of threads.
print("\n chi/rho   share     stderr")
for ratio in [1.01, 1.05, 1.2, 2.0]:
    est = adoption_measure(ConeSpec(base.p_A, rho, ratio * rho), samples=50_000, seed=7)
    print(f"{ratio:7.3f}  {est.value:7.4f}  {est.stderr:8.5f}")

# %%
# More curvature in production and cost pulls p_A toward the diagonal and
# widens the cone for a fixed direction and capability.
t = np.array([0.6, 0.6, 0.529])
t = t / np.linalg.norm(t)
print("\n gamma+sigma   phi0    chi100/chi0")
for row in curvature_sweep(worker, [2, 4, 8, 16, 32], 1.05, t):
    print(f"{row.gamma + row.sigma:9.1f}  {row.phi0:7.4f}  {row.chi_ratio:9.5f}")

print("\nhemisphere limit: pi/2 - phi0 at chi/rho = 1e3 is",
      math.pi / 2 - half_angle(ConeSpec(base.p_A, rho, 1e3 * rho)))
