import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sinkhorn_lab.adversarial import SlowMatrixParams, build_slow_matrix
from sinkhorn_lab.density import (bound_report, ceil_count, check_contraction, check_dense_run,
                                  check_entry_upper_bound, check_theta, condition_number,
                                  contraction_tau, density_grid, density_profile,
                                  entry_upper_bound, normalize_by_max, phase1_t, phase2_alpha,
                                  q_constant, theta_threshold)
from sinkhorn_lab.engine import run, run_fixed
from sinkhorn_lab.experiments import random_dense, random_dense_instance
from sinkhorn_lab.matrix import InvalidMatrixError


def test_normalize_examples():
    assert np.array_equal(normalize_by_max([[2, 4], [0, 1]]), [[0.5, 1], [0, 0.25]])
    N = np.array([[0.2, 1.0], [0.3, 0.4]])
    assert np.array_equal(normalize_by_max(N), N)
    with pytest.raises(InvalidMatrixError):
        normalize_by_max(np.zeros((2, 2)))


def test_normalize_uniform_random_statistics():
    B = np.array(random_dense(200, 5.0, 1))
    assert B.max() == pytest.approx(5.0, rel=1e-3)
    A = normalize_by_max(B)
    assert A.max() == 1.0
    # empirical distribution of the normalized entries is close to U[0, 1]
    u = np.sort(A.ravel())
    grid = (np.arange(u.size) + 0.5) / u.size
    assert np.abs(u - grid).max() < 0.01


def test_profile_examples():
    p = density_profile(np.ones((5, 5)), 1.0)
    assert p.gamma_max == 1 and p.is_dense(1.0)
    p = density_profile(np.eye(4), 0.5)
    assert np.all(p.row_counts == 1) and np.all(p.col_counts == 1) and p.gamma_max == 0.25
    assert not p.dense_above_half


@pytest.mark.parametrize("n,gamma", [(16, 0.3), (32, 0.3), (32, 0.45), (64, 0.26)])
def test_profile_of_slow_matrix(n, gamma):
    A = normalize_by_max(build_slow_matrix(SlowMatrixParams(n, gamma, 1e-4)))
    c = math.ceil(gamma * n)
    p = density_profile(A, 2 * c / n)
    assert p.min_count == c and p.gamma_max == c / n and p.is_dense(c / n)


def test_profile_rejects():
    with pytest.raises(ValueError):
        density_profile([[2.0, 0.0], [0.0, 1.0]], 0.5)
    with pytest.raises(ValueError):
        density_profile(np.eye(2), 0.0)


def test_dense_means_exact_hit():
    p = density_profile(np.ones((4, 4)), 0.5)
    assert p.meets(0.75) and not p.is_dense(0.75) and p.is_dense(1.0)
    # ceil(0.6 * 5) = 3 even though 0.6 * 5 rounds to 3.0000000000000004
    assert ceil_count(0.6, 5) == 3


def test_density_grid_orders_best_first():
    A = normalize_by_max(random_dense(30, 1.0, 2))
    grid = density_grid(A)
    keys = [(-p.gamma_max, -p.rho) for p in grid]
    assert keys == sorted(keys) and grid[0].gamma_max == 1.0


def test_random_dense_is_dense_above_six_elevenths():
    hits = 0
    for seed in range(100):
        A = normalize_by_max(random_dense(200, 1.0, (7, seed)))
        if density_profile(A, 2 / 5).gamma_max >= 6 / 11:
            hits += 1
    # Stated frequency target. At n = 200 the minimum line count of entries
    # >= 2/5 sits near n/2, so this fails; see the larger-n companion below.
    assert hits >= 99


def test_random_dense_density_concentrates_at_large_n():
    for seed in range(20):
        A = normalize_by_max(random_dense(2000, 1.0, (7, seed)))
        assert density_profile(A, 2 / 5).gamma_max >= 6 / 11


# ---- closed-form bounds ---------------------------------------------------

def test_theta_examples():
    assert theta_threshold(0, 1, 1) == pytest.approx(1 / 27)
    assert theta_threshold(0, 1, 1, "stated") == pytest.approx(1 / 27)
    want = 0.5 ** 15 * 0.75 ** 5 * 0.5 * 0.5 ** 3 / 27
    assert theta_threshold(0, 0.75, 0.5, "stated") == pytest.approx(want, rel=1e-14)
    assert theta_threshold(0, 0.75, 0.5) == pytest.approx(want * 0.5 ** 3 * 0.75 ** 3, rel=1e-14)


def test_theta_rejects():
    with pytest.raises(ValueError):
        theta_threshold(0.2, 0.6, 0.3)
    with pytest.raises(ValueError):
        theta_threshold(0.0, 0.5, 0.3)
    with pytest.raises(ValueError):
        theta_threshold(0.0, 0.6, 0.3, "other")


def test_entry_bound_examples():
    assert entry_upper_bound(0, 1, 1, 10) == pytest.approx(0.3)
    assert entry_upper_bound(0.05, 0.6, 0.3, 100) == pytest.approx(3 / (0.027 * 0.6 * 0.15 * 100))
    with pytest.raises(ValueError):
        entry_upper_bound(0.2, 0.6, 0.3, 10)


def test_tau_examples():
    assert contraction_tau(1 / 27, 20, 20) == pytest.approx(53 / 54)
    assert contraction_tau(0.01, 36, 48) == pytest.approx(0.9975)
    with pytest.raises(ValueError):
        contraction_tau(0.1, 10, 20)
    with pytest.raises(ValueError):
        contraction_tau(0.0, 15, 20)


def test_phase_constants():
    assert phase1_t(1.0) == pytest.approx(0.45)
    assert phase2_alpha(1.0) == pytest.approx(0.45)
    assert q_constant(1.0, 1.0) == pytest.approx(1 - 8 / 135 * 0.5 ** 5 * 0.55 ** 3)


@given(st.floats(0.51, 1.0), st.floats(0.05, 1.0), st.floats(0.0, 0.99), st.floats(0.0, 0.99))
def test_bounds_monotone_in_alpha(gamma, rho, f1, f2):
    top = 1 - 1 / (2 * gamma)
    a1, a2 = sorted((f1 * top, f2 * top))
    assert theta_threshold(a1, gamma, rho) >= theta_threshold(a2, gamma, rho)
    assert theta_threshold(a1, gamma, rho, "stated") >= theta_threshold(a2, gamma, rho, "stated")
    assert entry_upper_bound(a1, gamma, rho, 50) <= entry_upper_bound(a2, gamma, rho, 50)


@given(st.floats(0.51, 1.0), st.floats(0.05, 1.0), st.integers(4, 400))
def test_tau_below_q_at_phase2_alpha(gamma, rho, n):
    rep = bound_report(phase2_alpha(gamma), gamma, rho, n)
    assert 0 < rep.theta and rep.tau <= 1 and rep.entry_ub > 0
    assert rep.tau <= q_constant(gamma, rho) + 1e-15


def test_check_contraction_disjunction():
    assert check_contraction([1.2, 0.8], [1.1, 0.79], 0.5)
    assert check_contraction([1.2, 0.8], [1.25, 0.9], 0.5)
    assert not check_contraction([1.2, 0.8], [1.19, 0.799], 0.5)


# ---- bounds along runs ----------------------------------------------------

@pytest.mark.parametrize("gamma", [0.6, 0.7, 0.8, 0.9])
def test_dense_run_bounds_hold(gamma):
    for seed in range(5):
        A = random_dense_instance(48, gamma, 0.3, (31, seed))
        assert density_profile(A, 0.3).is_dense(gamma)
        rep = check_dense_run(A, gamma, 0.3)
        assert rep.ok, rep
        assert rep.entry_checked > 0 and rep.theta_checked > 0 and rep.contraction_checked > 0


def test_entry_bound_on_random_dense_64():
    A = normalize_by_max(random_dense(64, 1.0, 12))
    g = density_profile(A, 0.3).gamma_max
    res = run_fixed(A, 10)
    assert check_entry_upper_bound(res.final, g, 0.3)


def test_theta_predicate_on_low_alpha_iterate():
    A = random_dense_instance(40, 0.75, 0.3, 4)
    res = run(A, 1e-8)
    theta = theta_threshold(0.0, 0.75, 0.3)
    assert check_theta(res.final, theta, 0.75)


def test_stated_theta_exceeds_proof_theta():
    assert theta_threshold(0.01, 0.8, 0.3, "stated") > theta_threshold(0.01, 0.8, 0.3)


# ---- condition number -----------------------------------------------------

def test_condition_number_trivial_inputs():
    P = np.array([[0.3, 0.7], [0.7, 0.3]])
    assert condition_number(run(P, 1e-12)) == pytest.approx(1.0, abs=1e-12)
    assert condition_number(run(np.ones((6, 6)), 1e-12)) == pytest.approx(1.0, abs=1e-12)


def test_condition_number_gauge_invariant():
    A = random_dense(12, 1.0, 3)
    k1 = condition_number(run(A, 1e-10))
    k2 = condition_number(run(7.0 * np.asarray(A), 1e-10))
    assert k1 == pytest.approx(k2, rel=1e-8) and k1 >= 1
