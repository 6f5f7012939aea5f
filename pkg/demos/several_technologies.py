"""
Adopting tools one after another
================================

With several technologies the worker's frontier is the convex hull of the
human frontier and the technology points. Each adoption moves the shadow
prices, and the entry bar for the next tool is computed at the new prices.
"""

import numpy as np

from diradopt import Technology, WorkerJob
from diradopt.multitech import all_in_next, entry_next, solve_multi

worker = WorkerJob(theta=np.ones(2), s=np.ones(2), sigma=2.0, gamma=1.0)
tools = [
    Technology.along([1.0, 1.0], 1.01),
    Technology.along([0.6, 0.8], 1.03),
    Technology.along([0.9, 0.2], 1.02),
]

adopted = []
for k, tool in enumerate(tools):
    decision = entry_next(worker, adopted, tool)
    print(f"tool {k}: t = {np.round(tool.t, 3)}, chi = {tool.chi}")
    print(f"   bar {decision.threshold:.5f} (without the last tool {decision.prior_threshold:.5f})"
          f" -> {'adopt' if decision.adopt else 'skip'}")
    print(f"   sufficient for all-in: {all_in_next(worker, adopted, tool)}")
    if decision.adopt:
        adopted.append(tool)
        sol = solve_multi(worker, adopted)
        print(f"   shares {np.round(sol.lambdas, 5)}, human {1 - sol.lambdas.sum():.5f},"
              f" output {sol.output:.6f}, gap {sol.gap:.1e}")
