"""Scale a small positive matrix and watch the line sums settle.

Run with ``python3 demos/scaling_basics.py``.
"""

import numpy as np

from sinkhorn_lab import engine
from sinkhorn_lab.density import condition_number
from sinkhorn_lab.experiments import random_dense

A = np.array(random_dense(6, 1.0, 1))
res = engine.run(A, 1e-12, trace=True)

print(f"status {res.status.value} after {res.iterations} passes")
print(f"{'k':>3} {'side':>5} {'l1 error':>12} {'min col':>10} {'max col':>10}")
for row in res.trace:
    if row.k <= 10 or row.k == res.iterations:
        print(f"{row.k:>3} {row.side:>5} {row.l1_row + row.l1_col:12.3e} "
              f"{row.min_col:10.6f} {row.max_col:10.6f}")

print("extreme sums tighten monotonically:", engine.assert_monotone(res.trace))

lx, ly = res.log_scalings()
rebuilt = np.exp(lx)[:, None] * A * np.exp(ly)[None, :]
print("scalings reproduce the result:", np.allclose(rebuilt, res.final, rtol=1e-12))
print(f"condition number of the scalings: {condition_number(res):.3f}")
