"""Sinkhorn-Knopp iteration for (1,1)-scaling with tracing.

Indexing follows the usual convention for this iteration: ``A^(0)`` is the
row-normalized input, odd iterates come from a column pass and even iterates
(k >= 2) from a row pass. So even iterates have unit row sums and odd iterates
have unit column sums. The iteration count of a run is the index of the final
iterate.

Scaling vectors are kept as logarithms relative to ``A^(0)``, so that
``diag(exp(log_x)) @ A^(0) @ diag(exp(log_y)) == A^(k)``. The initial row
normalization is stored separately as ``log_row_offset = -log r(A)``.
"""

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from ._matching import has_perfect_matching
from .matrix import as_matrix, frozen

DEFAULT_MAX_ITERS = 10**7

TRACE_FIELDS = ("k", "side", "l1_row", "l1_col", "l2_row", "l2_col",
                "max_row", "min_row", "max_col", "min_col", "prod_sums")


class Status(str, Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"
    NOT_SCALABLE = "not_scalable"


class NotScalableWarning(RuntimeWarning):
    """The support cannot be scaled (zero line sum or no perfect matching)."""


class NotScalableError(ValueError):
    """Raised by :func:`init` and :func:`step` on a zero line sum."""


@dataclass(frozen=True)
class ScalingState:
    """Snapshot of one iterate.

    Attributes
    ----------
    k : int
        Iterate index.
    current : numpy.ndarray
        ``A^(k)``.
    log_x, log_y : numpy.ndarray
        Logs of the diagonal scalings taking ``base`` to ``current``.
    base : numpy.ndarray
        ``A^(0)``, the row-normalized input.
    source : numpy.ndarray
        The unnormalized input matrix.
    log_row_offset : numpy.ndarray
        ``-log r(source)``; ``base = diag(exp(log_row_offset)) @ source``.
    """

    k: int
    current: np.ndarray
    log_x: np.ndarray
    log_y: np.ndarray
    base: np.ndarray
    source: np.ndarray
    log_row_offset: np.ndarray

    @property
    def n(self):
        return self.current.shape[0]

    @property
    def standardized_side(self):
        return "row" if self.k % 2 == 0 else "col"

    def reconstruct(self):
        """Rebuild ``A^(k)`` from ``base`` and the scaling vectors."""
        return np.exp(self.log_x)[:, None] * self.base * np.exp(self.log_y)[None, :]


class TraceRow(NamedTuple):
    k: int
    side: str
    l1_row: float
    l1_col: float
    l2_row: float
    l2_col: float
    max_row: float
    min_row: float
    max_col: float
    min_col: float
    prod_sums: float


def _trace_row(k, r, c):
    dr = r - 1.0
    dc = c - 1.0
    s = c if k % 2 == 0 else r
    with np.errstate(divide="ignore"):
        prod = math.exp(float(np.log(s).sum()))
    return TraceRow(
        k=k,
        side="row" if k % 2 == 0 else "col",
        l1_row=float(np.abs(dr).sum()),
        l1_col=float(np.abs(dc).sum()),
        l2_row=float(np.sqrt(np.dot(dr, dr))),
        l2_col=float(np.sqrt(np.dot(dc, dc))),
        max_row=float(r.max()),
        min_row=float(r.min()),
        max_col=float(c.max()),
        min_col=float(c.min()),
        prod_sums=prod,
    )


@dataclass
class ScalingTrace:
    """Per-iterate record of sum errors and extreme line sums.

    ``side`` names the standardized side of the iterate and ``prod_sums`` is
    the product of the other side's sums, i.e. the sums the next pass divides by.
    """

    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        """One trace field as an array."""
        if name == "side":
            return np.array([r.side for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows])

    def reversed(self):
        return ScalingTrace(list(reversed(self.rows)))

    def to_csv(self, path_or_file=None):
        """Write the trace as CSV; returns the text when no target is given."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in self.rows:
            w.writerow([r.k, r.side] + [format(v, ".17g") for v in r[2:]])
        text = buf.getvalue()
        if path_or_file is None:
            return text
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_file):
        if hasattr(path_or_file, "read"):
            text = path_or_file.read()
        else:
            with open(path_or_file, newline="") as fh:
                text = fh.read()
        reader = csv.DictReader(io.StringIO(text))
        rows = []
        for d in reader:
            rows.append(TraceRow(int(d["k"]), d["side"],
                                 *(float(d[f]) for f in TRACE_FIELDS[2:])))
        return cls(rows)


@dataclass(frozen=True)
class ScalingResult:
    """Outcome of :func:`run`.

    ``log_x`` and ``log_y`` are relative to ``A^(0)``; use
    :meth:`log_scalings` for scalings relative to the input matrix.
    """

    status: Status
    iterations: int
    final: np.ndarray
    log_x: np.ndarray
    log_y: np.ndarray
    log_row_offset: np.ndarray
    error: float
    eps: float
    norm: str
    trace: ScalingTrace = None
    errors: np.ndarray = None

    @property
    def converged(self):
        return self.status == Status.CONVERGED

    def log_scalings(self):
        """``(log X, log Y)`` with ``diag(e^X) @ A @ diag(e^Y) == final``."""
        return self.log_x + self.log_row_offset, self.log_y.copy()


def _check_norm(norm):
    norm = norm.lower()
    if norm not in ("l1", "l2"):
        raise ValueError(f"norm must be 'l1' or 'l2', got {norm!r}")
    return norm


def _prepare(A):
    A = as_matrix(A, square=True)
    r = A.sum(axis=1)
    c = A.sum(axis=0)
    if np.any(r <= 0):
        raise NotScalableError(f"zero row at index {int(np.argmin(r))}")
    if np.any(c <= 0):
        raise NotScalableError(f"zero column at index {int(np.argmin(c))}")
    return A, r


def init(A):
    """Row-normalize ``A`` to obtain ``A^(0)``.

    Raises
    ------
    NotScalableError
        If ``A`` has a zero row or zero column.
    """
    A, r = _prepare(A)
    base = frozen(A / r[:, None])
    n = A.shape[0]
    return ScalingState(k=0, current=base, log_x=np.zeros(n), log_y=np.zeros(n),
                        base=base, source=A, log_row_offset=-np.log(r))


def step(state):
    """Apply one normalization pass and return the next state.

    A column pass produces odd iterates, a row pass even ones.
    """
    cur = state.current
    if state.k % 2 == 0:
        s = cur.sum(axis=0)
        if np.any(s <= 0):
            raise NotScalableError(f"zero column sum at iterate {state.k}")
        nxt = cur / s[None, :]
        log_x, log_y = state.log_x, state.log_y - np.log(s)
    else:
        s = cur.sum(axis=1)
        if np.any(s <= 0):
            raise NotScalableError(f"zero row sum at iterate {state.k}")
        nxt = cur / s[:, None]
        log_x, log_y = state.log_x - np.log(s), state.log_y
    return ScalingState(k=state.k + 1, current=frozen(nxt), log_x=log_x, log_y=log_y,
                        base=state.base, source=state.source,
                        log_row_offset=state.log_row_offset)


def iterate_states(A, iters):
    """Yield ``init(A)`` followed by ``iters`` successive states."""
    s = init(A)
    yield s
    for _ in range(iters):
        s = step(s)
        yield s


def _sinkhorn(A, eps, norm, max_iters, trace, trace_every, observer, record_errors,
              stop_on_converge, check_support):
    norm = _check_norm(norm)
    if stop_on_converge and not eps > 0:
        raise ValueError("eps must be positive")
    if max_iters < 0:
        raise ValueError("max_iters must be nonnegative")
    if trace_every < 1:
        raise ValueError("trace_every must be >= 1")
    A, r0 = _prepare(A)
    n = A.shape[0]
    cur = A / r0[:, None]
    view = cur.view()
    view.flags.writeable = False
    log_x = np.zeros(n)
    log_y = np.zeros(n)
    rows = [] if trace else None
    errs = [] if record_errors else None

    if check_support and not has_perfect_matching(A):
        warnings.warn("support has no perfect matching; matrix is not scalable",
                      NotScalableWarning, stacklevel=3)
        status = Status.NOT_SCALABLE
        k, err = 0, math.inf
        if trace:
            rows.append(_trace_row(0, cur.sum(axis=1), cur.sum(axis=0)))
    else:
        k = 0
        last_traced = -1
        while True:
            r = cur.sum(axis=1)
            c = cur.sum(axis=0)
            s = c if k % 2 == 0 else r
            d = s - 1.0
            err = float(np.abs(d).sum()) if norm == "l1" else float(np.sqrt(np.dot(d, d)))
            if errs is not None:
                errs.append(err)
            if trace and k % trace_every == 0:
                rows.append(_trace_row(k, r, c))
                last_traced = k
            if observer is not None:
                observer(k, view, r, c)
            if stop_on_converge and err <= eps:
                status = Status.CONVERGED
                break
            if k >= max_iters:
                status = Status.ITERATION_CAP
                break
            if not np.all(s > 0) or not np.all(np.isfinite(s)):
                warnings.warn(f"zero line sum at iterate {k}; matrix is not scalable",
                              NotScalableWarning, stacklevel=3)
                status = Status.NOT_SCALABLE
                break
            if k % 2 == 0:
                cur /= s[None, :]
                log_y -= np.log(s)
            else:
                cur /= s[:, None]
                log_x -= np.log(s)
            k += 1
        if trace and last_traced != k:
            rows.append(_trace_row(k, r, c))

    return ScalingResult(
        status=status, iterations=k, final=frozen(cur), log_x=log_x, log_y=log_y,
        log_row_offset=-np.log(r0), error=err, eps=eps, norm=norm,
        trace=ScalingTrace(rows) if trace else None,
        errors=np.array(errs) if record_errors else None,
    )


def run(A, eps, norm="l1", max_iters=DEFAULT_MAX_ITERS, trace=False, trace_every=1,
        observer=None, record_errors=False, check_support=True):
    """Scale ``A`` until the line-sum error is at most ``eps``.

    The error of iterate ``k`` is the chosen norm of ``s - 1`` where ``s`` are
    the sums of the side that is not standardized; the standardized side
    contributes zero.

    Parameters
    ----------
    A : array_like
        Square nonnegative matrix without zero rows or columns.
    eps : float
        Target error, > 0.
    norm : {"l1", "l2"}
    max_iters : int
        Largest iterate index to reach before giving up.
    trace : bool
        Record a :class:`ScalingTrace`.
    trace_every : int
        Keep every ``trace_every``-th iterate in the trace (the final iterate is
        always kept).
    observer : callable, optional
        Called as ``observer(k, current, row_sums, col_sums)`` at every iterate.
        ``current`` is a read-only view of the working buffer.
    record_errors : bool
        Keep the error of every iterate in ``result.errors``.
    check_support : bool
        Test the support for a perfect matching first and stop early if none.

    Returns
    -------
    ScalingResult
    """
    return _sinkhorn(A, eps, norm, max_iters, trace, trace_every, observer,
                     record_errors, True, check_support)


def run_fixed(A, iters, norm="l1", trace=True, trace_every=1, observer=None,
              record_errors=False):
    """Run exactly ``iters`` passes regardless of the error."""
    return _sinkhorn(A, 0.0, norm, iters, trace, trace_every, observer,
                     record_errors, False, False)


def iterations_to_targets(A, eps_list, norm="l1", max_iters=DEFAULT_MAX_ITERS):
    """First iterate index whose error is at most each target.

    Returns
    -------
    dict
        Maps each target to its iteration count, or None if ``max_iters`` was
        reached first.
    """
    eps_list = sorted(set(float(e) for e in eps_list), reverse=True)
    res = run(A, eps_list[-1], norm=norm, max_iters=max_iters, record_errors=True)
    errs = res.errors
    out = {}
    for e in eps_list:
        hits = np.flatnonzero(errs <= e)
        out[e] = int(hits[0]) if hits.size else None
    return out


def assert_monotone(trace, tol=1e-12):
    """Check that extreme non-standardized sums tighten every two iterates.

    For odd ``k`` the minimum row sum must not decrease and the maximum row sum
    must not increase from one odd iterate to the next in the trace; the same
    holds for columns at even ``k``. Rows are compared in the order stored.
    """
    if len(trace) < 3:
        raise ValueError("monotonicity check needs at least 3 trace rows")
    last = [None, None]
    for row in trace:
        p = row.k % 2
        prev = last[p]
        if prev is not None:
            if p == 1:
                lo, lo0, hi, hi0 = row.min_row, prev.min_row, row.max_row, prev.max_row
            else:
                lo, lo0, hi, hi0 = row.min_col, prev.min_col, row.max_col, prev.max_col
            if lo < lo0 - tol * max(1.0, abs(lo0)):
                return False
            if hi > hi0 + tol * max(1.0, abs(hi0)):
                return False
        last[p] = row
    return True


def assert_phase1(trace, t, n, rho):
    """Count iterates whose l1 error exceeds ``t*n`` and check their bound.

    Returns
    -------
    count : int
        Number of traced iterates with ``l1_row + l1_col > t*n``.
    bound : float
        ``8 t^-2 (ln n - ln rho)``.
    ok : bool
        ``count <= bound`` and every counted iterate has
        ``prod_sums <= exp(-n t^2 / 8) + 1e-12``.
    """
    cap = math.exp(-n * t * t / 8.0) + 1e-12
    count = 0
    prod_ok = True
    for row in trace:
        if row.l1_row + row.l1_col > t * n:
            count += 1
            if row.prod_sums > cap:
                prod_ok = False
    bound = 8.0 / (t * t) * (math.log(n) - math.log(rho))
    return count, bound, bool(count <= bound and prod_ok)
