"""Estimate permanents of dense 0-1 matrices and compare with Ryser's formula."""

import math

from sinkhorn_lab.experiments import random_dense_binary
from sinkhorn_lab.permanent import (estimate_permanent, exact_permanent, hall_lower_bound,
                                    van_der_waerden_bound)
from sinkhorn_lab.density import density_profile

print(f"{'n':>3} {'gamma':>6} {'exact':>14} {'estimate':>14} {'ratio':>7} {'samples':>8}")
for n in (6, 8, 10, 12):
    A = random_dense_binary(n, 0.7, n)
    exact = exact_permanent(A)
    est = estimate_permanent(A, 0.1, 0.2, seed=n)
    g = density_profile(A, 1.0).gamma_max
    print(f"{n:>3} {g:6.3f} {exact:14.1f} {est.estimate:14.1f} "
          f"{est.estimate / exact:7.4f} {est.samples:>8}")
    print(f"    log lower bounds: dense {hall_lower_bound(n, g, 1.0):.2f}, "
          f"doubly stochastic {van_der_waerden_bound(n):.2f}; log per {math.log(exact):.2f}")
