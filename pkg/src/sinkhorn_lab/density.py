"""Density profiles of [0,1] matrices and the quantitative bounds for dense inputs.

A square [0,1] matrix is (gamma, rho)-dense when every row and column has at
least ``ceil(gamma n)`` entries that are at least ``rho``, and some line has
exactly that many.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .matrix import alpha_accuracy, as_matrix


def ceil_count(gamma, n):
    """``ceil(gamma * n)``, robust to rounding just above an integer."""
    return int(math.ceil(gamma * n - 1e-9))


def normalize_by_max(B):
    """Divide every entry by the largest one."""
    B = as_matrix(B)
    A = B / B.max()
    A.setflags(write=False)
    return A


@dataclass(frozen=True)
class DensityProfile:
    """Counts of entries ``>= rho`` per row and column.

    Attributes
    ----------
    rho : float
    row_counts, col_counts : numpy.ndarray
    min_count : int
        Smallest count over all rows and columns.
    gamma_max : float
        ``min_count / n``: the largest gamma for which the matrix is
        (gamma, rho)-dense.
    """

    rho: float
    row_counts: np.ndarray
    col_counts: np.ndarray
    min_count: int
    gamma_max: float

    @property
    def n(self):
        return len(self.row_counts)

    def meets(self, gamma):
        """Every line has at least ``ceil(gamma n)`` large entries."""
        return ceil_count(gamma, self.n) <= self.min_count

    def is_dense(self, gamma):
        """(gamma, rho)-dense: every line meets the count and one line hits it exactly."""
        return ceil_count(gamma, self.n) == self.min_count

    @property
    def dense_above_half(self):
        return self.gamma_max > 0.5

    def to_dict(self):
        return {
            "rho": self.rho,
            "gamma_max": self.gamma_max,
            "min_count": self.min_count,
            "row_counts": [int(v) for v in self.row_counts],
            "col_counts": [int(v) for v in self.col_counts],
            "dense_above_half": bool(self.dense_above_half),
        }


def density_profile(A, rho, strict=False):
    """Profile the entries of ``A`` against the threshold ``rho``.

    Parameters
    ----------
    A : array_like
        Square matrix with entries in [0, 1].
    rho : float
        Threshold in (0, 1].
    strict : bool
        Count entries ``> rho`` instead of ``>= rho``.
    """
    A = as_matrix(A, square=True)
    if A.max() > 1.0:
        raise ValueError("density profile needs entries in [0, 1]; normalize first")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    M = A > rho if strict else A >= rho
    rc = M.sum(axis=1)
    cc = M.sum(axis=0)
    m = int(min(rc.min(), cc.min()))
    return DensityProfile(rho=float(rho), row_counts=rc, col_counts=cc, min_count=m,
                          gamma_max=m / A.shape[0])


def density_grid(A, exponents=range(1, 21)):
    """Profiles on the grid ``rho = 2^-e``, best (largest gamma, then largest rho) first."""
    profiles = [density_profile(A, 2.0 ** -e) for e in exponents]
    return sorted(profiles, key=lambda p: (-p.gamma_max, -p.rho))


def theta_threshold(alpha, gamma, rho, variant="proof"):
    """Large-entry threshold for dense iterates with accuracy ``alpha``.

    Every line of such an iterate has at least ``ceil(gamma n)`` entries above
    ``theta / n``.

    Parameters
    ----------
    alpha : float
        Accuracy of the iterate; must be below ``1 - 1/(2 gamma)``.
    gamma, rho : float
        Density parameters, ``gamma`` in (1/2, 1].
    variant : {"proof", "stated"}
        ``"stated"`` uses ``rho^15 gamma^5``; ``"proof"`` uses the smaller
        ``rho^18 gamma^8`` that the derivation actually supports.
    """
    if not 0.5 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (1/2, 1], got {gamma}")
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    if alpha >= 1.0 - 1.0 / (2.0 * gamma):
        raise ValueError(f"alpha={alpha} violates alpha < 1 - 1/(2 gamma)")
    if variant == "stated":
        pr, pg = 15, 5
    elif variant == "proof":
        pr, pg = 18, 8
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return (rho ** pr * gamma ** pg * (2.0 * gamma * (1.0 - alpha) - 1.0)
            * (2.0 * gamma - 1.0 - alpha) ** 3 / 27.0)


def count_above(A, threshold):
    """Smallest number of entries ``> threshold`` over all rows and columns."""
    M = np.asarray(A) > threshold
    return int(min(M.sum(axis=1).min(), M.sum(axis=0).min()))


def check_theta(A, theta, gamma):
    """Every line of ``A`` has at least ``ceil(gamma n)`` entries above ``theta / n``."""
    n = np.asarray(A).shape[0]
    return count_above(A, theta / n) >= ceil_count(gamma, n)


def entry_upper_bound(alpha, gamma, rho, n):
    """Largest possible entry of a standardized dense iterate with accuracy ``alpha``.

    Returns ``3 / (rho^3 gamma (2 gamma - 1 - alpha) n)``.
    """
    gap = 2.0 * gamma - 1.0 - alpha
    if gap <= 0:
        raise ValueError(f"need 2 gamma - 1 - alpha > 0, got {gap}")
    if not 0.0 < rho <= 1.0 or gamma <= 0:
        raise ValueError("rho must be in (0, 1] and gamma positive")
    return 3.0 / (rho ** 3 * gamma * gap * n)


def check_entry_upper_bound(A, gamma, rho, alpha=None, slack=1e-12):
    """Max entry of a standardized iterate is within :func:`entry_upper_bound`."""
    A = np.asarray(A)
    if alpha is None:
        alpha = alpha_accuracy(A)
    return float(A.max()) <= entry_upper_bound(alpha, gamma, rho, A.shape[0]) + slack


def contraction_tau(theta, L, n):
    """Contraction factor ``1 - theta (L - n/2) / n``."""
    if not L > n / 2:
        raise ValueError(f"need L > n/2, got L={L}, n={n}")
    if not theta > 0:
        raise ValueError("theta must be positive")
    return 1.0 - theta * (L - n / 2.0) / n


def check_contraction(c_k, c_k2, tau, slack=1e-12):
    """Either side of the non-unit sums contracts by ``tau`` over two passes.

    Parameters
    ----------
    c_k, c_k2 : array_like
        Non-standardized sums of iterates ``k`` and ``k + 2``.
    """
    c_k = np.asarray(c_k)
    c_k2 = np.asarray(c_k2)
    upper = c_k2.max() - 1.0 <= tau * (c_k.max() - 1.0) + slack
    lower = 1.0 / c_k2.min() - 1.0 <= tau * (1.0 / c_k.min() - 1.0) + slack
    return bool(upper or lower)


def q_constant(gamma, rho):
    """Per-round contraction constant ``1 - (8/135) rho^18 gamma^5 (gamma-1/2)^5 (gamma-9/20)^3``."""
    return 1.0 - 8.0 / 135.0 * rho ** 18 * gamma ** 5 * (gamma - 0.5) ** 5 * (gamma - 0.45) ** 3


def phase2_alpha(gamma):
    """Accuracy ``(9/10)(1 - 1/(2 gamma))`` below which the contraction regime holds."""
    return 0.9 * (1.0 - 1.0 / (2.0 * gamma))


def phase1_t(gamma):
    """Phase-1 error level ``9 (2 gamma - 1) / (20 gamma)`` per line."""
    return 9.0 * (2.0 * gamma - 1.0) / (20.0 * gamma)


@dataclass(frozen=True)
class BoundReport:
    alpha: float
    theta: float
    tau: float
    entry_ub: float
    gamma: float
    rho: float
    n: int


def bound_report(alpha, gamma, rho, n, variant="proof"):
    """Evaluate theta, tau (with ``L = ceil(gamma n)``) and the entry bound together."""
    theta = theta_threshold(alpha, gamma, rho, variant)
    tau = contraction_tau(theta, ceil_count(gamma, n), n)
    return BoundReport(alpha=alpha, theta=theta, tau=tau,
                       entry_ub=entry_upper_bound(alpha, gamma, rho, n),
                       gamma=gamma, rho=rho, n=n)


def condition_number(result):
    """Ratio of the largest to smallest diagonal scaling entry.

    The scalings are only defined up to ``X -> cX, Y -> Y/c``; the gauge is
    fixed by giving ``log X`` and ``log Y`` equal means, so a matrix that needs
    no scaling gets ``kappa = 1``.
    """
    lx, ly = result.log_scalings()
    shift = 0.5 * (lx.mean() - ly.mean())
    allv = np.concatenate([lx - shift, ly + shift])
    return float(math.exp(allv.max() - allv.min()))


@dataclass
class DenseRunReport:
    """Outcome of checking the dense-input bounds along one scaling run.

    Each ``*_checked`` field counts the iterates (or iterate pairs) where the
    bound's precondition held; ``*_failures`` lists the offending ``k``.
    """

    gamma: float
    rho: float
    iterations: int = 0
    entry_checked: int = 0
    entry_failures: list = field(default_factory=list)
    theta_checked: int = 0
    theta_failures: list = field(default_factory=list)
    contraction_checked: int = 0
    contraction_failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not (self.entry_failures or self.theta_failures or self.contraction_failures)


def check_dense_run(A, gamma, rho, eps=1e-10, max_iters=100_000, variant="proof"):
    """Scale a (gamma, rho)-dense matrix and check the dense-input bounds at each iterate.

    At every iterate with ``alpha < 2 gamma - 1`` the largest entry must obey
    :func:`entry_upper_bound`. Once ``alpha <= phase2_alpha(gamma)`` every line
    must keep ``ceil(gamma n)`` entries above ``theta / n``, and the
    non-standardized sums of iterates ``k`` and ``k + 2`` must satisfy
    :func:`check_contraction` with ``tau`` built from ``theta`` at ``k``.

    Parameters
    ----------
    A : array_like
        Square matrix with entries in [0, 1] and ``gamma > 1/2``.
    gamma, rho : float
        Density parameters of ``A``.
    eps : float
        l1 target of the run.

    Returns
    -------
    DenseRunReport
    """
    from .engine import run

    A = as_matrix(A, square=True)
    n = A.shape[0]
    L = ceil_count(gamma, n)
    report = DenseRunReport(gamma=gamma, rho=rho)
    a2 = phase2_alpha(gamma)
    pending = {}

    def observe(k, cur, r, c):
        side = c if k % 2 == 0 else r
        alpha = 2.0 / n * float(np.abs(side - 1.0).sum())
        if alpha < 2.0 * gamma - 1.0:
            report.entry_checked += 1
            if float(cur.max()) > entry_upper_bound(alpha, gamma, rho, n) + 1e-12:
                report.entry_failures.append(k)
        prev = pending.pop(k - 2, None)
        if prev is not None:
            report.contraction_checked += 1
            if not check_contraction(prev[1], side, prev[0]):
                report.contraction_failures.append(k - 2)
        if alpha <= a2:
            theta = theta_threshold(alpha, gamma, rho, variant)
            report.theta_checked += 1
            if count_above(cur, theta / n) < L:
                report.theta_failures.append(k)
            pending[k] = (contraction_tau(theta, L, n), side.copy())

    res = run(A, eps, max_iters=max_iters, observer=observe)
    report.iterations = res.iterations
    return report
