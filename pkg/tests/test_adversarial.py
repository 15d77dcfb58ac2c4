import dataclasses
import math

import numpy as np
import pytest

from sinkhorn_lab.adversarial import (ConstructionError, ProvenanceError, SlowMatrixParams,
                                      base_case_report, block_matrix_order,
                                      build_block_slow_matrix, build_slow_matrix, ell_index,
                                      extract_key_entries, key_entry_regime, layout, log_beta,
                                      recover_layout, recover_params, slow_convergence_witness,
                                      slow_entry_horizon, sum_relation_residuals,
                                      trace_key_entries, verify_equality_classes,
                                      verify_key_recursions, verify_sum_relations)
from sinkhorn_lab.engine import init, iterate_states
from sinkhorn_lab.experiments import random_dense


@pytest.fixture(scope="module")
def params32():
    return SlowMatrixParams(32, 0.3, 1e-4)


@pytest.fixture(scope="module")
def states32(params32):
    return list(iterate_states(build_slow_matrix(params32), 500))


# ---- parameters and layout ----------------------------------------------------

def test_params_derived_values(params32):
    p = params32
    assert p.c == 10 and p.h == 16 and p.delta == pytest.approx(1e-4 / 32)
    assert p.rho == pytest.approx(p.delta ** 2 / (100 * 32 ** 2))
    assert p.beta == pytest.approx(1e-4 ** 8 / (100 * 32 ** 61), rel=1e-12)
    assert p.band == 20 / 32 and p.ell == ell_index(32) == 8 * 32 * 3


@pytest.mark.parametrize("args,clause", [
    ((15, 0.3, 1e-4), "even"),
    ((32, 0.2, 1e-4), "gamma"),
    ((32, 0.3, 1e-2), "eps"),
    ((8, 0.45, 1e-4), "n - 2"),
    ((32, 0.3, 1e-30), "beta"),
])
def test_params_reject_named_clause(args, clause):
    with pytest.raises(ConstructionError, match=clause):
        SlowMatrixParams(*args)


def test_params_delta_window():
    with pytest.raises(ConstructionError, match="delta"):
        SlowMatrixParams(32, 0.3, 1e-4, delta=1e-2)
    with pytest.raises(ConstructionError, match="delta"):
        SlowMatrixParams(32, 0.3, 1e-4, delta=1e-7)
    p = SlowMatrixParams(32, 0.3, 1e-4, delta=2e-5)
    assert p.delta == 2e-5


def test_log_beta_formula():
    assert log_beta(32, 1e-4) == pytest.approx(8 * math.log(1e-4) - math.log(100) - 61 * math.log(32))


def test_layout_named_entries(params32):
    A = build_slow_matrix(params32)
    n, h = 32, 16
    assert A[h - 1, h - 1] == 1 and A[h, h] == 1
    assert A[0, h - 1] == params32.band and A[h - 2, h] == params32.band
    assert set(np.unique(A)) == {1.0, params32.band, params32.beta}


def test_layout_circulant_blocks():
    lay = layout(16, 4)
    m = 7
    up = lay.classes[:m, :m] == 1
    assert np.all(up.sum(axis=0) == 4) and np.all(up.sum(axis=1) == 4)
    lo = lay.classes[9:, 9:] == 1
    assert np.all(lo.sum(axis=1) == 4)


def test_recover_params_round_trip(params32):
    A = build_slow_matrix(params32)
    p = recover_params(A)
    assert p.n == 32 and p.c == params32.c
    assert p.eps == pytest.approx(1e-4, rel=1e-12)
    assert np.allclose(build_slow_matrix(p), A, rtol=1e-10, atol=0)


def test_provenance_rejected():
    with pytest.raises(ProvenanceError):
        recover_layout(random_dense(8, 1.0, 0))
    with pytest.raises(ProvenanceError):
        extract_key_entries(init(random_dense(8, 1.0, 0)))
    with pytest.raises(ProvenanceError):
        trace_key_entries(np.ones((8, 8)), iters=3)


# ---- block construction ---------------------------------------------------------

def test_block_zero_density():
    A = build_block_slow_matrix(17, 0.0, 1e-4)
    assert A.shape == (17, 17) and A[16, 16] == 1 / 17
    assert np.all(A[:16, 16] == 0) and np.all(A[16, :16] == 0)
    inner = SlowMatrixParams(16, 0.5 - 1 / 16, 1e-4)
    assert np.array_equal(A[:16, :16], build_slow_matrix(inner))


def test_block_positive_density():
    m = block_matrix_order(40, 0.2)
    k = math.ceil(0.2 * m)
    A = build_block_slow_matrix(m, 0.2, 1e-4)
    n = m - k
    assert n % 2 == 0
    assert np.all(A[n:, n:] == 1) and np.all(A[:n, n:] == 0) and np.all(A[n:, :n] == 0)


def test_block_rejections():
    with pytest.raises(ConstructionError):
        build_block_slow_matrix(16, 0.0, 1e-4)
    with pytest.raises(ConstructionError):
        build_block_slow_matrix(40, 0.3, 1e-4)


def test_block_iteration_matches_block_alone():
    A = build_block_slow_matrix(17, 0.0, 1e-4)
    Z = A[:16, :16]
    for s_full, s_blk in zip(iterate_states(A, 60), iterate_states(Z, 60)):
        assert np.allclose(s_full.current[:16, :16], s_blk.current, rtol=1e-12, atol=0)


# ---- structural identities ----------------------------------------------------

def test_base_case(params32):
    rep = base_case_report(build_slow_matrix(params32))
    assert rep["a0_range"] and rep["b0_range"] and rep["xyuv0_bound"]


def test_equality_classes_along_run(states32):
    for s in states32[:201]:
        assert verify_equality_classes(s)


def test_equality_classes_detect_perturbation(states32):
    s = states32[7]
    M = np.array(s.current)
    M[1, 2] *= 1 + 1e-6
    assert not verify_equality_classes(dataclasses.replace(s, current=M))


def test_sum_relations_along_run(states32):
    for s in states32:
        assert verify_sum_relations(s)


def test_sum_relations_detect_perturbation(states32):
    s = states32[4]
    M = np.array(s.current)
    M[2, 3] += 1e-6
    assert not verify_sum_relations(dataclasses.replace(s, current=M))
    assert max(sum_relation_residuals(M, 32)) > 1e-7


def test_even_iterate_column_identity(states32):
    s = states32[10]
    a, b, x, y, u, v = extract_key_entries(s).as_tuple()
    c = s.current.sum(axis=0)
    # rows are standardized at even k, so the upper-row identity gives the column sums
    assert np.allclose(c[:15], 1 - 2 * (a - x) - 15 * (u - v), rtol=0, atol=1e-12)


def test_l1_error_is_row_column_gap(states32):
    for s in states32[::25]:
        r, c = s.current.sum(axis=1), s.current.sum(axis=0)
        l1 = np.abs(r - 1).sum() + np.abs(c - 1).sum()
        assert l1 == pytest.approx(np.abs(r - c).sum(), rel=1e-12, abs=1e-15)


def test_key_entry_trace_matches_states(params32, states32):
    tr, res = trace_key_entries(build_slow_matrix(params32), iters=500)
    assert len(tr) == 501 and res.iterations == 500
    for k in (0, 1, 77, 500):
        assert tr.at(k) == extract_key_entries(states32[k])


# ---- recursions and regime ----------------------------------------------------

@pytest.mark.parametrize("n,decay", [(16, "pass"), (32, "not_reached")])
def test_key_recursions(n, decay):
    p = SlowMatrixParams(n, 0.3, 1e-4)
    tr, _ = trace_key_entries(build_slow_matrix(p), iters=502)
    rep = verify_key_recursions(tr, p, 500)
    assert rep.passed and rep.first_violation is None
    assert rep.items["recursion"].status == "pass"
    assert rep.items["one_step_decay"].status == "pass"
    # the decay item starts at 8n(ceil(ln n) - 1): 256 for n = 16, 768 for n = 32
    assert rep.items["decay"].status == decay
    assert all(it.informational for it in rep.items.values() if not it.gated)


def test_first_bracket_explicit(params32, states32):
    rho = params32.rho
    a1 = extract_key_entries(states32[1]).a
    a2 = extract_key_entries(states32[2]).a
    assert a1 / (1 + 2 * a1 + rho) <= a2 * (1 + 1e-10)
    assert a2 <= a1 / (1 + 2 * a1 - rho) * (1 + 1e-10)


def test_upper_bound_item_at_n32(params32):
    tr, _ = trace_key_entries(build_slow_matrix(params32), iters=502)
    rep = verify_key_recursions(tr, params32, 500)
    assert rep.items["upper_bounds"].status == "pass"
    assert np.all(np.maximum(tr.a, tr.b)[:501] < 2 / 31)


def test_recursion_failure_is_reported(params32):
    tr, _ = trace_key_entries(build_slow_matrix(params32), iters=40)
    tr.a[20] *= 1.01
    rep = verify_key_recursions(tr, params32, 38)
    assert not rep.passed and rep.first_violation in (19, 20)


def test_regime_on_short_horizon(params32):
    tr, _ = trace_key_entries(build_slow_matrix(params32), iters=2000)
    rep = key_entry_regime(tr, params32.delta, 2000)
    assert rep.holds and rep.min_ab >= params32.delta
    assert slow_entry_horizon(tr, params32.delta) is None


def test_slow_entry_horizon_definition():
    p = SlowMatrixParams(16, 0.3, 1e-4)
    tr, _ = trace_key_entries(build_slow_matrix(p), iters=3000)
    for delta in (1e-2, 5e-3):
        K = slow_entry_horizon(tr, delta)
        below = np.flatnonzero(tr.ab_min < delta)
        assert K == min(int(below[0]), math.ceil(1 / delta))
        assert np.all(tr.ab_min[:K] >= delta)


def test_slow_convergence_witness():
    p = SlowMatrixParams(16, 0.3, 1e-4)
    w = slow_convergence_witness(build_slow_matrix(p), 1e-2)
    assert w.status == "converged" and w.iterations > 100
    assert w.constant == pytest.approx(w.iterations * 1e-2 / 16)
