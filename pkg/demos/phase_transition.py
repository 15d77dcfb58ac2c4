"""Passes to l1 error 1e-4 on either side of density 1/2.

Writes ``PhaseTransition.csv`` and its JSON sidecar to ``demo-output/``.
The slow instance needs a few seconds.
"""

from sinkhorn_lab.experiments import ExperimentSpec, median_iterations, run_experiment

spec = ExperimentSpec("PhaseTransition", sizes=[32], eps_list=[1e-4],
                      gamma_list=[0.1, 0.3, 0.45, 0.55, 0.7, 0.9], trials=3, seed=7,
                      out_path="demo-output")
rows = run_experiment(spec)
for (n, eps, gamma), med in sorted(median_iterations(rows).items()):
    print(f"gamma={gamma:4.2f}: median passes {med:>10.0f}")
