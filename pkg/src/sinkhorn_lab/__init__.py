"""Instrumented Sinkhorn-Knopp matrix scaling.

Submodules
----------
matrix
    Validation, line sums, deviation and accuracy measures, text I/O.
engine
    The iteration, traces and trace checks.
density
    Density profiles and the bounds that hold for dense inputs.
permanent
    Exact permanents, zero test, lower bounds, sampling estimator.
adversarial
    Slow-convergence constructions and their structural checks.
experiments
    Random instances and reproducible sweeps.
"""

__version__ = "0.1.0"

from .matrix import (DeviationReport, InvalidMatrixError, alpha_accuracy, as_matrix,
                     col_sums, deviation, read_matrix, row_sums, write_matrix)
from .engine import (NotScalableError, NotScalableWarning, ScalingResult, ScalingState,
                     ScalingTrace, Status, assert_monotone, assert_phase1, init,
                     iterate_states, iterations_to_targets, run, run_fixed, step)
from .density import (DensityProfile, check_contraction, check_entry_upper_bound,
                      check_theta, condition_number, contraction_tau, density_grid,
                      density_profile, entry_upper_bound, normalize_by_max, q_constant,
                      theta_threshold)
from .permanent import (EstimatorInputError, PermanentEstimate, estimate_permanent,
                        exact_permanent, hall_lower_bound, permanent_is_zero,
                        van_der_waerden_bound)
from .adversarial import (ConstructionError, KeyEntries, SlowMatrixParams, build_slow_matrix,
                          build_block_slow_matrix, extract_key_entries, trace_key_entries,
                          verify_key_recursions, verify_equality_classes, verify_sum_relations)
from .experiments import (ExperimentKind, ExperimentSpec, random_dense, random_dense_binary,
                          random_dense_instance, run_experiment)
