"""Sparse-below-half matrices on which Sinkhorn-Knopp converges slowly.

The basic construction is an even-order n x n matrix with half-width
``h = n/2``. Two circulant blocks of order ``h - 1`` carry ``ceil(gamma n)``
ones per line; rows ``h`` and ``h+1`` (1-based) connect to the lower block;
the columns ``h`` and ``h+1`` of the upper rows hold the band value
``2 ceil(gamma n)/n``. Every other entry is a tiny ``beta``.

Six entries of the iterates (the "key entries") determine every other
entry, which makes the slow decay of the error traceable in closed form.
All indices in this module are 0-based; ``h - 1`` and ``h`` are the two
middle rows/columns.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .density import ceil_count
from .engine import DEFAULT_MAX_ITERS, ScalingState, run, run_fixed
from .matrix import frozen

BETA_FLOOR = 1e-300


class ConstructionError(ValueError):
    """A construction parameter violates one of the builder's requirements."""


class ProvenanceError(ValueError):
    """The matrix was not produced by :func:`build_slow_matrix`."""


def log_beta(n, eps):
    """``log(eps^8 / (100 n^61))``."""
    return 8.0 * math.log(eps) - math.log(100.0) - 61.0 * math.log(n)


def rho_from_delta(delta, n):
    """``delta^2 / (100 n^2)``."""
    return delta * delta / (100.0 * n * n)


@dataclass(frozen=True)
class SlowMatrixParams:
    """Parameters of the slow-convergence matrix.

    Parameters
    ----------
    n : int
        Even order.
    gamma : float
        Density in (1/4, 1/2) with ``n - 2 ceil(gamma n) >= 2``.
    eps : float
        Accuracy parameter below 1e-3; sets ``beta``.
    delta : float, optional
        Lower level for the two slow entries, in ``[eps/n, 1/(1000 n))``.
        Defaults to ``eps / n``.
    """

    n: int
    gamma: float
    eps: float
    delta: float = None
    c: int = field(init=False)
    log_beta: float = field(init=False)

    def __post_init__(self):
        n, gamma, eps = self.n, self.gamma, self.eps
        if not isinstance(n, (int, np.integer)) or n < 4 or n % 2:
            raise ConstructionError(f"n must be an even integer >= 4, got {n}")
        if not 0.25 < gamma < 0.5:
            raise ConstructionError(f"gamma must lie in (1/4, 1/2), got {gamma}")
        if not 0.0 < eps < 1e-3:
            raise ConstructionError(f"eps must lie in (0, 1e-3), got {eps}")
        c = ceil_count(gamma, n)
        if n - 2 * c < 2:
            raise ConstructionError(f"n - 2 ceil(gamma n) >= 2 fails: n={n}, ceil={c}")
        delta = eps / n if self.delta is None else float(self.delta)
        if not eps / n * (1 - 1e-12) <= delta < 1.0 / (1000.0 * n):
            raise ConstructionError(
                f"delta must lie in [eps/n, 1/(1000 n)) = [{eps / n}, {1 / (1000 * n)}), got {delta}")
        lb = log_beta(n, eps)
        if lb <= math.log(BETA_FLOOR):
            raise ConstructionError(
                f"beta = exp({lb:.1f}) is below the representable floor {BETA_FLOOR}")
        log_cap = math.log(rho_from_delta(delta, n)) + 6 * math.log(delta) - 51 * math.log(n)
        if lb > log_cap + 1e-9:
            raise ConstructionError("beta <= rho delta^6 / n^51 fails")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "log_beta", lb)

    @property
    def h(self):
        return self.n // 2

    @property
    def beta(self):
        return math.exp(self.log_beta)

    @property
    def rho(self):
        return rho_from_delta(self.delta, self.n)

    @property
    def band(self):
        return 2.0 * self.c / self.n

    @property
    def ell(self):
        return ell_index(self.n)


def ell_index(n):
    """``8 n (ceil(ln n) - 1)``."""
    return 8 * n * (math.ceil(math.log(n)) - 1)


@dataclass(frozen=True)
class Layout:
    """Entry classes of the construction: 1 = one, 2 = band, 0 = beta."""

    n: int
    c: int
    classes: np.ndarray

    @property
    def h(self):
        return self.n // 2


def layout(n, c):
    """Class map of the construction with order ``n`` and ``c`` ones per circulant line."""
    h = n // 2
    m = h - 1
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    circ = ((j - i) % m) < c
    ones = ((i < m) & (j < m) & circ)
    ones |= (i > h) & (j > h) & circ
    ones |= ((i == h - 1) | (i == h)) & (j > h)
    ones |= (i == j) & ((i == h - 1) | (i == h))
    band = (i < m) & ((j == h - 1) | (j == h))
    cls = np.zeros((n, n), dtype=np.int8)
    cls[ones] = 1
    cls[band] = 2
    cls.setflags(write=False)
    return Layout(n=n, c=c, classes=cls)


def build_slow_matrix(params):
    """Materialize the slow-convergence matrix for ``params``.

    Entries take exactly three values: 1, ``2 ceil(gamma n)/n`` and ``beta``.
    """
    if not isinstance(params, SlowMatrixParams):
        raise TypeError("expected SlowMatrixParams")
    lay = layout(params.n, params.c)
    A = np.full((params.n, params.n), params.beta)
    A[lay.classes == 1] = 1.0
    A[lay.classes == 2] = params.band
    return frozen(A)


def block_inner_order(m, gamma):
    """Order of the slow block inside the size-``m`` block-diagonal construction."""
    if gamma == 0:
        return m - 1
    return m - ceil_count(gamma, m)


def block_matrix_order(m_min, gamma):
    """Smallest ``m >= m_min`` meeting the parity requirement for ``gamma``."""
    m = m_min
    while True:
        if gamma == 0:
            if m % 2 == 1:
                return m
        elif block_inner_order(m, gamma) % 2 == 0:
            return m
        m += 1


def build_block_slow_matrix(m, gamma, eps):
    """Block-diagonal slow-convergence matrix for densities in [0, 1/4].

    The top-left block is :func:`build_slow_matrix` at order ``n`` and density
    ``1/2 - 1/n``. The bottom-right block is an all-ones block of order
    ``ceil(gamma m)`` when ``gamma > 0`` (with ``n = m - ceil(gamma m)``), or
    the 1 x 1 block ``[1/m]`` when ``gamma == 0`` (with ``n = m - 1``).
    """
    if not 0.0 <= gamma <= 0.25:
        raise ConstructionError(f"gamma must lie in [0, 1/4], got {gamma}")
    if gamma == 0:
        if m % 2 != 1:
            raise ConstructionError(f"gamma = 0 needs odd m, got {m}")
        n = m - 1
        tail = np.array([[1.0 / m]])
    else:
        k = ceil_count(gamma, m)
        n = m - k
        if n % 2:
            raise ConstructionError(f"m - ceil(gamma m) = {n} must be even")
        tail = np.ones((k, k))
    if n < 6:
        raise ConstructionError(f"inner order {n} too small; need at least 6")
    Z = build_slow_matrix(SlowMatrixParams(n, 0.5 - 1.0 / n, eps))
    A = np.zeros((m, m))
    A[:n, :n] = Z
    A[n:, n:] = tail
    return frozen(A)


def recover_layout(A, rtol=1e-12):
    """Check that ``A`` has the three-valued structure and return its layout.

    Raises
    ------
    ProvenanceError
        If ``A`` is not a matrix from :func:`build_slow_matrix`.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.ndim != 2 or A.shape != (n, n) or n < 4 or n % 2:
        raise ProvenanceError(f"expected an even-order square matrix, got shape {A.shape}")
    h = n // 2
    c = int(round(A[0, h - 1] * n / 2))
    if not 1 <= c <= h - 1:
        raise ProvenanceError("band value does not match any admissible density")
    lay = layout(n, c)
    cls = lay.classes
    beta = A[0, n - 1]
    expect = np.where(cls == 1, 1.0, np.where(cls == 2, 2.0 * c / n, beta))
    if not beta > 0 or not np.allclose(A, expect, rtol=rtol, atol=0.0):
        raise ProvenanceError("entries do not follow the slow-convergence layout")
    return lay


def recover_params(A):
    """Reconstruct :class:`SlowMatrixParams` from a built matrix.

    ``gamma`` is returned as ``ceil(gamma n)/n`` and ``eps`` is recovered from
    ``beta``; both rebuild the same matrix.
    """
    lay = recover_layout(A)
    n = lay.n
    lb = math.log(float(np.asarray(A)[0, n - 1]))
    eps = math.exp((lb + math.log(100.0) + 61.0 * math.log(n)) / 8.0)
    return SlowMatrixParams(n, lay.c / n, eps)


@dataclass(frozen=True)
class KeyEntries:
    k: int
    a: float
    b: float
    x: float
    y: float
    u: float
    v: float

    def as_tuple(self):
        return (self.a, self.b, self.x, self.y, self.u, self.v)


def _key(cur, n):
    h = n // 2
    return (cur[0, h - 1], cur[h - 1, n - 1], cur[h - 1, 0],
            cur[n - 1, h - 1], cur[0, n - 1], cur[n - 1, 0])


def extract_key_entries(state):
    """Read the six key entries off a state whose input is a built matrix."""
    if not isinstance(state, ScalingState):
        raise TypeError("expected a ScalingState")
    recover_layout(state.source)
    return KeyEntries(state.k, *map(float, _key(state.current, state.n)))


@dataclass
class KeyEntryTrace:
    """Key entries and l1 error at every iterate ``0..len-1``."""

    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    error: np.ndarray
    n: int

    def __len__(self):
        return len(self.a)

    def at(self, k):
        return KeyEntries(k, float(self.a[k]), float(self.b[k]), float(self.x[k]),
                          float(self.y[k]), float(self.u[k]), float(self.v[k]))

    @property
    def xyuv_max(self):
        return np.max(np.vstack([self.x, self.y, self.u, self.v]), axis=0)

    @property
    def ab_min(self):
        return np.minimum(self.a, self.b)


class _KeyRecorder:
    def __init__(self, n, extra=None):
        self.n = n
        self.rows = []
        self.errs = []
        self.extra = extra

    def __call__(self, k, cur, r, c):
        self.rows.append(_key(cur, self.n))
        s = c if k % 2 == 0 else r
        self.errs.append(float(np.abs(s - 1.0).sum()))
        if self.extra is not None:
            self.extra(k, cur, r, c)

    def trace(self):
        arr = np.array(self.rows, dtype=np.float64).reshape(-1, 6)
        return KeyEntryTrace(*arr.T.copy(), error=np.array(self.errs), n=self.n)


def trace_key_entries(A, iters=None, eps=None, max_iters=DEFAULT_MAX_ITERS, observer=None):
    """Run the iteration on a built matrix and record the key entries each step.

    Give ``iters`` to run a fixed number of passes, or ``eps`` to stop at the
    first iterate whose l1 error is at most ``eps``.

    Returns
    -------
    KeyEntryTrace
    ScalingResult
    """
    lay = recover_layout(A)
    rec = _KeyRecorder(lay.n, observer)
    if (iters is None) == (eps is None):
        raise ValueError("give exactly one of iters and eps")
    if iters is not None:
        res = run_fixed(A, iters, trace=False, observer=rec)
    else:
        res = run(A, eps, norm="l1", max_iters=max_iters, observer=rec)
    return rec.trace(), res


def _same(vals, tol):
    vals = np.asarray(vals)
    if vals.size <= 1:
        return True
    scale = float(np.max(np.abs(vals)))
    return float(vals.max() - vals.min()) <= tol * scale


def equality_class_report(current, lay, tol=1e-12):
    """Which groups of forced equalities hold in an iterate.

    Returns
    -------
    dict
        ``upper_block``, ``lower_block``, ``lower_left``, ``upper_right``,
        ``middle`` mapped to bools.
    """
    M = np.asarray(current)
    n, h = lay.n, lay.h
    m = h - 1
    cls = lay.classes
    out = {}
    ok = True
    for v in (0, 1):
        blk = cls[:m, :m] == v
        ok &= _same(M[:m, :m][blk], tol)
    out["upper_block"] = bool(ok)
    ok = True
    for v in (0, 1):
        blk = cls[h + 1:, h + 1:] == v
        ok &= _same(M[h + 1:, h + 1:][blk], tol)
    out["lower_block"] = bool(ok)
    out["lower_left"] = _same(M[h + 1:, :m], tol)
    out["upper_right"] = _same(M[:m, h + 1:], tol)
    mid = [
        _same([M[h - 1, h - 1], M[h, h]], tol),
        _same([M[h - 1, h], M[h, h - 1]], tol),
        _same(M[:m, h - 1:h + 1], tol),
        _same(M[h - 1:h + 1, :m], tol),
        _same(M[h - 1:h + 1, h + 1:], tol),
        _same(M[h + 1:, h - 1:h + 1], tol),
    ]
    out["middle"] = bool(all(mid))
    return out


def verify_equality_classes(state, tol=1e-12):
    """True iff every forced equality among entries holds within relative ``tol``."""
    lay = recover_layout(state.source)
    return all(equality_class_report(state.current, lay, tol).values())


def sum_relation_residuals(current, n):
    """Residuals of the four row/column sum identities of an iterate.

    Returns the largest absolute residual of each identity: the two middle
    rows, the upper rows and the lower rows.
    """
    M = np.asarray(current)
    h = n // 2
    m = h - 1
    r = M.sum(axis=1)
    c = M.sum(axis=0)
    a, b, x, y, u, v = _key(M, n)
    mid = m * (b + x - a - y)
    res_h = abs(r[h - 1] - (c[h - 1] + mid))
    res_h1 = abs(r[h] - (c[h] + mid))
    res_up = np.abs(r[:m] - (c[:m] + 2 * (a - x) + m * (u - v))).max()
    res_lo = np.abs(c[h + 1:] - (r[h + 1:] + 2 * (b - y) + m * (u - v))).max()
    return float(res_h), float(res_h1), float(res_up), float(res_lo)


def verify_sum_relations(state, tol=1e-12):
    """True iff the row/column sum identities hold within ``tol``."""
    lay = recover_layout(state.source)
    return max(sum_relation_residuals(state.current, lay.n)) <= tol


def slow_entry_horizon(trace, delta):
    """First ``k`` with ``min(a_k, b_k) < delta`` or ``k >= 1/delta``; None if not in the trace."""
    ab = trace.ab_min
    lim = math.ceil(1.0 / delta - 1e-12)
    bad = np.flatnonzero(ab < delta)
    cands = [int(bad[0])] if bad.size else []
    if lim < len(trace):
        cands.append(lim)
    return min(cands) if cands else None


@dataclass(frozen=True)
class ItemResult:
    """Outcome of one recursion or bound check.

    ``status`` is ``"pass"``, ``"fail"`` or ``"not_reached"``. ``informational``
    marks checks whose constants are only derived for very large ``n``.
    """

    name: str
    status: str
    checked: int
    first_violation: int = None
    gated: bool = False
    informational: bool = False

    def to_dict(self):
        return {"status": self.status, "checked": self.checked,
                "first_violation": self.first_violation, "gated": self.gated,
                "informational": self.informational}


@dataclass(frozen=True)
class KeyRecursionReport:
    n: int
    horizon: int
    K: int
    ell: int
    delta: float
    rho: float
    large_n: bool
    items: dict

    @property
    def passed(self):
        """All gated checks pass."""
        return all(it.status == "pass" for it in self.items.values() if it.gated)

    @property
    def first_violation(self):
        ks = [it.first_violation for it in self.items.values()
              if it.gated and it.first_violation is not None]
        return min(ks) if ks else None

    def to_dict(self):
        return {"n": self.n, "horizon": self.horizon, "K": self.K, "ell": self.ell,
                "delta": self.delta, "rho": self.rho, "large_n": self.large_n,
                "passed": self.passed, "first_violation": self.first_violation,
                "items": {k: v.to_dict() for k, v in self.items.items()}}


LARGE_N = 10000


def _le(lhs, rhs, slack):
    return lhs <= rhs + slack * max(abs(lhs), abs(rhs))


def verify_key_recursions(trace, params, horizon, delta=None, slack=1e-10):
    """Check the key-entry recursions and bounds up to ``horizon``.

    The range checked is clipped to ``K - 1`` where ``K`` is the first iterate
    with ``min(a, b) < delta`` or ``k >= 1/delta``. Checks whose range starts
    after the clipped horizon are reported ``"not_reached"``.

    Parameters
    ----------
    trace : KeyEntryTrace
        Must cover iterates ``0..horizon+1``.
    params : SlowMatrixParams
    horizon : int
    delta : float, optional
        Overrides ``params.delta`` (``rho`` follows).
    slack : float
        Relative slack on every inequality.

    Returns
    -------
    KeyRecursionReport
        The two exact recursions (``recursion`` and ``one_step_decay``) are
        gated; the rest are flagged informational unless ``n > 10000``.
    """
    n = params.n
    h = n // 2
    m = h - 1
    delta = params.delta if delta is None else float(delta)
    rho = rho_from_delta(delta, n)
    ell = ell_index(n)
    K = slow_entry_horizon(trace, delta)
    T = min(horizon, len(trace) - 2)
    if K is not None:
        T = min(T, K - 1)
    a, b = trace.a, trace.b
    X = np.vstack([trace.x, trace.y, trace.u, trace.v])
    large = n > LARGE_N
    info = not large
    items = {}

    def record(name, ks, check, gated=False):
        first = None
        count = 0
        for k in ks:
            count += 1
            if not check(k):
                first = k
                break
        status = "not_reached" if count == 0 else ("pass" if first is None else "fail")
        items[name] = ItemResult(name, status, count, first, gated, info and not gated)

    def recursion(k):
        ak, bk = a[k], b[k]
        if k % 2 == 1:
            pairs = [(a[k + 1], ak, 1 + 2 * ak), (b[k + 1], bk, 1 + m * (bk - ak))]
        else:
            pairs = [(b[k + 1], bk, 1 + 2 * bk), (a[k + 1], ak, 1 + m * (ak - bk))]
        for val, num, den in pairs:
            if den - rho <= 0:
                return False
            if not (_le(num / (den + rho), val, slack) and _le(val, num / (den - rho), slack)):
                return False
        return True

    def bounds(k):
        cap = 2.0 / (n - 1)
        lhs = max(a[k], b[k])
        ok = _le(lhs, cap - (1.0 / delta - (k - 1)) * rho, slack)
        ok &= cap - (1.0 / delta - (k - 1)) * rho < cap
        ok &= cap < 0.1
        ok &= 1 + m * (a[k] - b[k]) - rho > 1 - m * b[k] - rho > 0
        ok &= 1 + m * (b[k] - a[k]) - rho > 1 - m * a[k] - rho > 0
        return bool(ok)

    def relations(k):
        p, q = (a, b) if k % 2 == 1 else (b, a)
        # odd k: p = a, q = b; even k swaps the roles
        pk, qk = p[k], q[k]
        return (_le(qk, pk + (6 * k + 2) * rho * qk, slack)
                and _le(pk, qk * (1 + 2 * pk) + 6 * (k + 1) * rho * qk, slack)
                and _le(q[k + 1], pk + (6 * k + 4) * rho * qk, slack))

    def decay(k):
        return _le(b[k] / b[k - 2], 1.0 / (1.0 + b[k - 2]), slack)

    def growth(k):
        cap = (1.0 + b[k - 2]) ** 3
        r1 = X[:, k] / X[:, k - 1]
        r2 = X[:, k - 1] / X[:, k - 2]
        return _le(float(max(r1.max(), r2.max())), cap, slack)

    base = rho * delta ** 6
    log_base = math.log(rho) + 6 * math.log(delta) - 51 * math.log(n)

    def xyuv_early(k):
        lhs = float(X[:, k].max())
        log_rhs = log_base + 3 * k * math.log1p(2.0 / (n - 1))
        return lhs <= math.exp(log_rhs) * (1 + slack)

    def xyuv_late(k):
        lhs = float(X[:, k].max())
        if k % 2 == 1:
            rhs = base / n ** 2 * (b[ell] / b[k - 1]) ** 6 * (b[k - 1] / b[k + 1]) ** 3
        else:
            rhs = base / n ** 2 * (b[ell] / b[k]) ** 6
        return _le(lhs, rhs, slack)

    record("recursion", range(0, T + 1), recursion, gated=True)
    record("upper_bounds", range(0, T + 1), bounds)
    record("key_relations", range(0, T + 1), relations)
    record("decay", range(ell + 2 + (ell % 2), T + 1, 2), decay)
    record("growth_cap", range(2, T + 1, 2), growth)
    record("xyuv_bound_early", range(0, min(T, ell) + 1), xyuv_early)
    record("xyuv_bound_late", [k for k in range(ell, T + 1) if k % 2 == 0 or k < T], xyuv_late)
    record("one_step_decay", range(1, T + 1),
           lambda k: _le(b[k - 1] * (1 - 3 * b[k - 1]), b[k], slack), gated=True)

    return KeyRecursionReport(n=n, horizon=T, K=K, ell=ell, delta=delta, rho=rho,
                             large_n=large, items=items)


@dataclass(frozen=True)
class RegimeReport:
    """Whether the two slow entries stay above ``delta`` and the four tiny ones below ``rho/(4n)``."""

    horizon: int
    delta: float
    rho: float
    min_ab: float
    max_xyuv: float
    first_ab_violation: int
    first_xyuv_violation: int

    @property
    def holds(self):
        return self.first_ab_violation is None and self.first_xyuv_violation is None

    def to_dict(self):
        return {"horizon": self.horizon, "delta": self.delta, "rho": self.rho,
                "min_ab": self.min_ab, "max_xyuv": self.max_xyuv,
                "first_ab_violation": self.first_ab_violation,
                "first_xyuv_violation": self.first_xyuv_violation, "holds": self.holds}


def key_entry_regime(trace, delta, horizon):
    """Check ``min(a,b) >= delta`` and ``max(x,y,u,v) < rho/(4n)`` for ``k <= horizon``."""
    n = trace.n
    rho = rho_from_delta(delta, n)
    stop = min(horizon, len(trace) - 1) + 1
    ab = trace.ab_min[:stop]
    xm = trace.xyuv_max[:stop]
    bad_ab = np.flatnonzero(ab < delta)
    bad_x = np.flatnonzero(xm >= rho / (4 * n))
    return RegimeReport(
        horizon=stop - 1, delta=delta, rho=rho, min_ab=float(ab.min()),
        max_xyuv=float(xm.max()),
        first_ab_violation=int(bad_ab[0]) if bad_ab.size else None,
        first_xyuv_violation=int(bad_x[0]) if bad_x.size else None,
    )


def base_case_report(A, delta=None):
    """Key entries of ``A^(0)`` against their closed-form ranges.

    Returns a dict of booleans for the ranges of ``a_0``, ``b_0`` and the
    tiny entries, plus the entries themselves.
    """
    params = recover_params(A)
    n = params.n
    delta = params.delta if delta is None else delta
    rho = rho_from_delta(delta, n)
    r = np.asarray(A).sum(axis=1)
    cur = np.asarray(A) / r[:, None]
    a, b, x, y, u, v = map(float, _key(cur, n))
    cap = math.exp(math.log(rho) + 6 * math.log(delta) - 51 * math.log(n))
    return {
        "a0": a, "b0": b, "xyuv0": max(x, y, u, v),
        "a0_range": 2 / (n + 4 + rho) <= a * (1 + 1e-12) and a <= 2 / (n + 4) * (1 + 1e-12),
        "b0_range": 2 / (n + rho) <= b * (1 + 1e-12) and b <= 2 / n * (1 + 1e-12),
        "xyuv0_bound": max(x, y, u, v) <= cap * (1 + 1e-9),
    }


@dataclass(frozen=True)
class SlowConvergenceWitness:
    n: int
    eps: float
    iterations: int
    constant: float
    status: str


def slow_convergence_witness(A, eps, max_iters=DEFAULT_MAX_ITERS):
    """Iterations until the l1 error first drops to ``eps`` and ``iterations * eps / n``."""
    res = run(A, eps, norm="l1", max_iters=max_iters)
    n = np.asarray(A).shape[0]
    return SlowConvergenceWitness(n=n, eps=eps, iterations=res.iterations,
                                  constant=res.iterations * eps / n, status=res.status.value)
