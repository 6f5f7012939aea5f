"""
One worker, one tool
====================

A two-task worker with equal task weights and costs meets a technology that
leans toward the first task. We look at the worker's unaided allocation, the
two capability thresholds, and how the supervised share of the budget moves
as the tool improves.

Run with ``python demos/single_technology.py``.
"""

import numpy as np

from diradopt import Technology, WorkerJob
from diradopt.adoption import optimal_intensity, threshold_pair
from diradopt.autarky import solve_autarky

worker = WorkerJob(theta=np.ones(2), s=np.ones(2), sigma=2.0, gamma=1.0)
t = np.array([0.8, 0.6])

# %%
# Unaided, the worker splits effort evenly and the shadow prices point
# along the diagonal.
aut = solve_autarky(worker)
print("x_A  =", aut.x_A)
print("p_A  =", aut.p_A)
print("Y_A  =", aut.output, " (rho =", aut.rho_A, ")")

# %%
# Below chi0 the tool is ignored; above chi100 the worker only supervises it.
tp = threshold_pair(t, worker)
print(f"\nchi0 = {tp.chi0:.6f}   c = {tp.c:.6f}   chi100 = {tp.chi100:.6f}")

# %%
# Sweep capability across both thresholds.
print("\n   chi     lambda*   output    regime")
for chi in np.linspace(0.99, 1.04, 11):
    sol = optimal_intensity(Technology(t, chi), worker)
    print(f"{chi:7.4f}  {sol.lambda_star:8.5f}  {sol.output:8.5f}  {sol.regime}")

# %%
# A point inside the partial band.
sol = optimal_intensity(Technology(t, 1.0167), worker)
print(f"\nat chi = 1.0167: lambda* = {sol.lambda_star:.6f}, p* = {sol.p_star}")
