"""Random instances and reproducible parameter sweeps.

Every random instance is drawn from a Philox generator keyed by
``SeedSequence(seed, spawn_key=keys)``; the identifier :data:`GENERATOR_ID`
is written next to every result so an instance can be regenerated from
``(seed, keys)`` alone.
"""

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import __version__
from .adversarial import (ConstructionError, SlowMatrixParams, build_slow_matrix,
                          build_block_slow_matrix, block_matrix_order)
from .density import ceil_count, condition_number
from .engine import Status, iterations_to_targets, run
from .matrix import frozen
from .permanent import estimate_permanent, exact_permanent

GENERATOR_ID = "numpy.Philox4x64-10/SeedSequence-spawn_key/v1"

COLUMNS = ("kind", "n", "eps", "gamma", "trial", "instance", "seed_key", "generator",
           "status", "iterations", "samples", "value", "reference")


def make_rng(seed, *keys):
    """Independent Philox stream for ``(seed, keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return make_rng(*seed)
    return make_rng(seed)


def random_dense(n, t, seed):
    """n x n matrix of i.i.d. uniform ``[0, t)`` entries.

    ``seed`` is an int, a tuple ``(seed, *keys)`` or a ``numpy.random.Generator``.
    """
    if n < 1 or not t > 0:
        raise ValueError("need n >= 1 and t > 0")
    return frozen(t * _rng(seed).random((n, n)))


def _regular_support(n, c, rng):
    """0-1 matrix with exactly ``c`` ones per line: a permuted circulant band."""
    p = rng.permutation(n)
    q = rng.permutation(n)
    return ((q[None, :] - p[:, None]) % n) < c


def random_dense_instance(n, gamma, rho, seed, extra=0.05):
    """Random normalized (gamma, rho)-dense matrix.

    Every line gets exactly ``ceil(gamma n)`` entries in ``[rho, 1]`` from a
    randomly permuted circulant band; row 0 keeps exactly that many, and other
    rows gain extra large entries with probability ``extra``. All remaining
    entries are uniform in ``[0, rho)``. One large entry is set to 1.
    """
    rng = _rng(seed)
    c = ceil_count(gamma, n)
    S = _regular_support(n, c, rng)
    add = rng.random((n, n)) < extra
    add[0, :] = False
    S = S | add
    big = rho + (1.0 - rho) * rng.random((n, n))
    small = rho * rng.random((n, n))
    A = np.where(S, big, small)
    i, j = np.argwhere(S)[rng.integers(S.sum())]
    A[i, j] = 1.0
    return frozen(A)


def random_dense_binary(n, gamma, seed, extra=0.05):
    """Random 0-1 matrix whose sparsest line has exactly ``ceil(gamma n)`` ones."""
    rng = _rng(seed)
    c = ceil_count(gamma, n)
    S = _regular_support(n, c, rng)
    add = rng.random((n, n)) < extra
    add[0, :] = False
    return frozen((S | add).astype(np.float64))


class ExperimentKind(str, Enum):
    UPPER_BOUND = "UpperBound"
    LOWER_BOUND = "LowerBound"
    PHASE_TRANSITION = "PhaseTransition"
    CONDITION_NUMBER = "ConditionNumber"
    PERMANENT_ACCURACY = "PermanentAccuracy"


KIND_INDEX = {k: i for i, k in enumerate(ExperimentKind)}


@dataclass
class ExperimentSpec:
    """One sweep.

    Parameters
    ----------
    kind : ExperimentKind or str
    sizes, eps_list, gamma_list : list
        Grid axes; unused axes may be empty.
    trials : int
        Random instances per cell.
    seed : int
    out_path : str
        Output directory; empty to skip writing.
    rho : float
        Large-entry level for random dense instances.
    construction_eps : float
        Accuracy parameter used to build the slow-convergence matrices.
    max_iters : int
    workers : int
        Process pool size; 1 runs inline.
    perm_eps, perm_delta : float
        Estimator parameters for PermanentAccuracy.
    """

    kind: ExperimentKind
    sizes: list
    eps_list: list = field(default_factory=list)
    gamma_list: list = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    out_path: str = ""
    rho: float = 0.3
    construction_eps: float = 1e-4
    max_iters: int = 10**7
    workers: int = 1
    perm_eps: float = 0.1
    perm_delta: float = 0.2

    def __post_init__(self):
        self.kind = ExperimentKind(self.kind)
        self.sizes = [int(v) for v in self.sizes]
        self.eps_list = [float(v) for v in self.eps_list]
        self.gamma_list = [float(v) for v in self.gamma_list]
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sizes:
            raise ValueError("sizes must be non-empty")
        if any(not 0.0 < e < 1.0 for e in self.eps_list):
            raise ValueError("every eps must lie in (0, 1)")
        needs_eps = self.kind != ExperimentKind.PERMANENT_ACCURACY
        if needs_eps and not self.eps_list:
            raise ValueError(f"{self.kind.value} needs eps_list")
        needs_gamma = self.kind in (ExperimentKind.PHASE_TRANSITION,
                                    ExperimentKind.PERMANENT_ACCURACY)
        if needs_gamma and not self.gamma_list:
            raise ValueError(f"{self.kind.value} needs gamma_list")
        if self.kind == ExperimentKind.LOWER_BOUND and not self.gamma_list:
            self.gamma_list = [0.3]

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _row(spec, n, eps, gamma, trial, instance, keys, status, iterations=None,
         samples=None, value=None, reference=None):
    return {"kind": spec.kind.value, "n": n, "eps": eps, "gamma": gamma, "trial": trial,
            "instance": instance, "seed_key": ":".join(str(k) for k in (spec.seed,) + keys),
            "generator": GENERATOR_ID, "status": status, "iterations": iterations,
            "samples": samples, "value": value, "reference": reference}


def slow_matrix(n, gamma, construction_eps):
    """Slow-convergence matrix for density ``gamma`` below 1/2 and its label.

    Densities in (1/4, 1/2) use the basic construction at order ``n``; densities
    in [0, 1/4] use the block construction at the smallest admissible order
    ``m >= n``.
    """
    if 0.25 < gamma < 0.5:
        return build_slow_matrix(SlowMatrixParams(n, gamma, construction_eps)), "slow"
    m = block_matrix_order(n, gamma)
    return build_block_slow_matrix(m, gamma, construction_eps), "block-slow"


def _status(res_map, e):
    return "converged" if res_map.get(e) is not None else Status.ITERATION_CAP.value


def _cell_upper(spec, n, trial):
    keys = (KIND_INDEX[spec.kind], n, trial)
    A = random_dense(n, 1.0, (spec.seed,) + keys)
    hits = iterations_to_targets(A, spec.eps_list, max_iters=spec.max_iters)
    return [_row(spec, n, e, None, trial, "uniform[0,1]", keys, _status(hits, e),
                 iterations=hits[e]) for e in spec.eps_list]


def _cell_lower(spec, n, gamma):
    keys = (KIND_INDEX[spec.kind], n)
    A, label = slow_matrix(n, gamma, spec.construction_eps)
    hits = iterations_to_targets(A, spec.eps_list, max_iters=spec.max_iters)
    label = f"{label}(order={A.shape[0]},eps={spec.construction_eps!r})"
    return [_row(spec, n, e, gamma, 0, label, keys, _status(hits, e), iterations=hits[e])
            for e in spec.eps_list]


def _cell_phase(spec, n, gi, gamma, trial):
    keys = (KIND_INDEX[spec.kind], n, gi, trial)
    if gamma > 0.5:
        A = random_dense_instance(n, gamma, spec.rho, (spec.seed,) + keys)
        label = f"dense(gamma={gamma!r},rho={spec.rho!r})"
    else:
        if trial > 0:
            return []
        A, label = slow_matrix(n, gamma, spec.construction_eps)
        label = f"{label}(order={A.shape[0]},eps={spec.construction_eps!r})"
    hits = iterations_to_targets(A, spec.eps_list, max_iters=spec.max_iters)
    return [_row(spec, n, e, gamma, trial, label, keys, _status(hits, e), iterations=hits[e])
            for e in spec.eps_list]


def _cell_condition(spec, n, trial):
    keys = (KIND_INDEX[spec.kind], n, trial)
    A = random_dense(n, 1.0, (spec.seed,) + keys)
    out = []
    for e in spec.eps_list:
        res = run(A, e, max_iters=spec.max_iters)
        out.append(_row(spec, n, e, None, trial, "uniform[0,1]", keys, res.status.value,
                        iterations=res.iterations, value=condition_number(res)))
    return out


def _cell_permanent(spec, n, gi, gamma, trial):
    keys = (KIND_INDEX[spec.kind], n, gi, trial)
    A = random_dense_binary(n, gamma, (spec.seed,) + keys)
    exact = exact_permanent(A)
    est = estimate_permanent(A, spec.perm_eps, spec.perm_delta,
                             seed=hash_keys(spec.seed, keys))
    return [_row(spec, n, None, gamma, trial, f"binary(gamma={gamma!r})", keys, "ok",
                 samples=est.samples, value=est.estimate, reference=exact)]


def hash_keys(seed, keys):
    """Deterministic 63-bit integer derived from ``(seed, keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) >> 1


def _cells(spec):
    K = ExperimentKind
    cells = []
    if spec.kind == K.UPPER_BOUND:
        cells = [(_cell_upper, (n, t)) for n in spec.sizes for t in range(spec.trials)]
    elif spec.kind == K.LOWER_BOUND:
        cells = [(_cell_lower, (n, g)) for n in spec.sizes for g in spec.gamma_list]
    elif spec.kind == K.PHASE_TRANSITION:
        cells = [(_cell_phase, (n, gi, g, t)) for n in spec.sizes
                 for gi, g in enumerate(spec.gamma_list) for t in range(spec.trials)]
    elif spec.kind == K.CONDITION_NUMBER:
        cells = [(_cell_condition, (n, t)) for n in spec.sizes for t in range(spec.trials)]
    elif spec.kind == K.PERMANENT_ACCURACY:
        cells = [(_cell_permanent, (n, gi, g, t)) for n in spec.sizes
                 for gi, g in enumerate(spec.gamma_list) for t in range(spec.trials)]
    return cells


def _run_cell(spec, fn, args):
    try:
        return fn(spec, *args)
    except (ConstructionError, ValueError, RuntimeError, FloatingPointError) as exc:
        # keep the sweep going; the failure is recorded in the row
        n = args[0]
        return [_row(spec, n, None, None, None, fn.__name__, tuple(a for a in args
                     if isinstance(a, int)), f"error: {type(exc).__name__}: {exc}")]


def _sort_key(row):
    def num(v):
        return (1, 0.0) if v is None else (0, float(v))
    return (row["kind"], row["n"], num(row["eps"]), num(row["gamma"]), num(row["trial"]))


def run_experiment(spec):
    """Run a sweep and return its rows, ordered by (kind, n, eps, gamma, trial).

    When ``spec.out_path`` is set, ``<kind>.csv`` and a ``<kind>.json`` sidecar
    with the sweep settings and generator identifier are written there.
    """
    cells = _cells(spec)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futs = [pool.submit(_run_cell, spec, fn, args) for fn, args in cells]
            parts = [f.result() for f in futs]
    else:
        parts = [_run_cell(spec, fn, args) for fn, args in cells]
    rows = sorted((r for p in parts for r in p), key=_sort_key)
    if spec.out_path:
        write_results(spec, rows, spec.out_path)
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def write_results(spec, rows, out_dir):
    """Write ``<kind>.csv`` and ``<kind>.json``; returns the two paths."""
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, spec.kind.value)
    with open(base + ".csv", "w", newline="") as fh:
        fh.write(rows_to_csv(rows))
    meta = {"spec": spec.to_dict(), "generator": GENERATOR_ID,
            "seed_key_layout": "seed:kind_index:n[:gamma_index]:trial",
            "package_version": __version__, "numpy_version": np.__version__,
            "rows": len(rows)}
    with open(base + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return base + ".csv", base + ".json"


def read_results(path):
    """Load a results CSV back as a list of dicts of strings."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@dataclass(frozen=True)
class TrendFit:
    n: int
    eps: tuple
    medians: tuple
    slope: float
    intercept: float
    r2: float


def fit_log_trend(eps_list, values):
    """Least-squares line of ``values`` against ``ln(1/eps)``; returns slope, intercept, R^2."""
    xs = np.log(1.0 / np.asarray(eps_list, dtype=float))
    ys = np.asarray(values, dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(((ys - pred) ** 2).sum())
    ss_tot = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def summarize_upper_bound(rows):
    """Median iterations per (n, eps) and the per-n fit against ``ln(1/eps)``."""
    by_n = {}
    for r in rows:
        if r["status"] != "converged":
            continue
        by_n.setdefault(int(r["n"]), {}).setdefault(float(r["eps"]), []).append(
            int(r["iterations"]))
    fits = []
    for n in sorted(by_n):
        eps = sorted(by_n[n], reverse=True)
        med = [float(np.median(by_n[n][e])) for e in eps]
        s, b, r2 = fit_log_trend(eps, med)
        fits.append(TrendFit(n, tuple(eps), tuple(med), s, b, r2))
    return fits


def iteration_table(rows):
    """Map ``(n, eps, gamma)`` to the list of iteration counts of converged rows."""
    out = {}
    for r in rows:
        if r["status"] != "converged":
            continue
        g = None if r["gamma"] in (None, "") else float(r["gamma"])
        key = (int(r["n"]), float(r["eps"]), g)
        out.setdefault(key, []).append(int(r["iterations"]))
    return out


def median_iterations(rows):
    return {k: float(np.median(v)) for k, v in iteration_table(rows).items()}


def fraction_within(rows, factor):
    """Share of PermanentAccuracy rows with estimate within ``factor`` of the exact value."""
    ok = [1.0 / factor <= float(r["value"]) / float(r["reference"]) <= factor
          for r in rows if r["status"] == "ok"]
    return sum(ok) / len(ok) if ok else math.nan
