"""Density below 1/2: the slow-convergence construction.

Each tenfold cut in the l1 target costs about ten times as many passes,
and the forced equalities among entries hold at every iterate.
"""

import numpy as np

from sinkhorn_lab.adversarial import (SlowMatrixParams, build_slow_matrix, key_entry_regime,
                                      trace_key_entries, verify_key_recursions)
from sinkhorn_lab.engine import iterations_to_targets

targets = [1e-1, 1e-2, 1e-3]
for n in (16, 32):
    p = SlowMatrixParams(n, 0.3, 1e-4)
    A = build_slow_matrix(p)
    hits = iterations_to_targets(A, targets)
    ratios = [hits[b] / hits[a] for a, b in zip(targets, targets[1:])]
    print(f"n={n}: passes {[hits[e] for e in targets]}, tenfold ratios "
          f"{[round(r, 2) for r in ratios]}")

p = SlowMatrixParams(32, 0.3, 1e-4)
tr, _ = trace_key_entries(build_slow_matrix(p), iters=2000)
rep = verify_key_recursions(tr, p, 1998)
for name, item in rep.items.items():
    print(f"  {name:18s} {item.status:12s} checked {item.checked}")
reg = key_entry_regime(tr, p.delta, 1999)
print(f"min(a,b) over 2000 passes {reg.min_ab:.3e} (delta {reg.delta:.3e}); "
      f"max of the four tiny entries {reg.max_xyuv:.2e}")
print("a_k at k = 0, 500, 1000, 2000:", np.round(tr.a[[0, 500, 1000, 2000]], 5))
