"""Exact permanents, a structural zero test, lower bounds and a scale-then-sample estimator.

All bounds are returned as natural logarithms.
"""

import math
from dataclasses import dataclass
from enum import Enum
from statistics import NormalDist

import numpy as np

from ._matching import has_perfect_matching
from .density import density_profile
from .engine import Status, run
from .matrix import as_matrix, deviation

MAX_EXACT_N = 30
SIS_BLOCK = 4096
SIS_MAX_INITIAL = 1 << 17
SIS_MAX_SAMPLES = 1 << 21


def exact_permanent(A):
    """Permanent by Ryser's inclusion-exclusion over a Gray-code subset order.

    Row sums over the current column subset are updated one column at a time;
    each block of subsets restarts from an exact sum to bound drift. Terms are
    accumulated with ``math.fsum``.

    Parameters
    ----------
    A : array_like
        Square matrix with ``n <= 30``.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > MAX_EXACT_N:
        raise ValueError(f"exact permanent limited to n <= {MAX_EXACT_N}, got n={n}")
    if n == 0:
        return 1.0
    total = 1 << n
    chunk = 1 << min(n, 14)
    cols = np.arange(n, dtype=np.int64)
    partial = []
    for k0 in range(0, total, chunk):
        k = np.arange(k0, k0 + chunk, dtype=np.int64)
        g = k ^ (k >> 1)
        start = A @ ((g[0] >> cols) & 1).astype(np.float64)
        if k0 == 0:
            kk = k[1:]
            gg = g[1:]
        else:
            kk = k
            gg = g
        flip = np.log2(kk & -kk).astype(np.int64)
        sign = np.where((gg >> flip) & 1, 1.0, -1.0)
        steps = sign[:, None] * A[:, flip].T
        if k0 == 0:
            sums = np.vstack([start, start + np.cumsum(steps, axis=0)])
        else:
            # the first step leads into g[0] itself, skip it
            sums = np.vstack([start, start + np.cumsum(steps[1:], axis=0)])
        odd = (np.bitwise_count(g) & 1).astype(bool)
        terms = np.prod(sums, axis=1)
        terms[odd] = -terms[odd]
        partial.append(math.fsum(terms))
    value = math.fsum(partial)
    if n % 2:
        value = -value
    return value + 0.0


def permanent_is_zero(A):
    """True iff the support of ``A`` has no perfect matching (augmenting paths)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return not has_perfect_matching(A)


def hall_lower_bound(n, gamma, rho):
    """``log(rho^n * floor(gamma n)!)``, a lower bound on the permanent of a dense matrix."""
    return n * math.log(rho) + math.lgamma(math.floor(gamma * n + 1e-9) + 1)


def van_der_waerden_bound(n):
    """``log(n! / n^n)``, the minimum permanent of an n x n doubly stochastic matrix."""
    return math.lgamma(n + 1) - n * math.log(n)


class Method(str, Enum):
    EXACT = "exact"
    IMPORTANCE_SAMPLING = "importance_sampling"


@dataclass(frozen=True)
class PermanentEstimate:
    """Permanent value with its sampling uncertainty.

    ``relative_half_width`` is the half width of an empirical 95% interval
    divided by the estimate; it is 0 for exact values.
    """

    estimate: float
    samples: int
    relative_half_width: float
    method: Method
    scaled_max_deviation: float = None

    @property
    def log_estimate(self):
        return math.log(self.estimate) if self.estimate > 0 else -math.inf

    @classmethod
    def exact(cls, A):
        return cls(estimate=exact_permanent(A), samples=0, relative_half_width=0.0,
                   method=Method.EXACT)

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "log_estimate": self.log_estimate,
            "samples": self.samples,
            "rel_half_width": self.relative_half_width,
            "method": self.method.value,
            "scaled_max_deviation": self.scaled_max_deviation,
        }


class EstimatorInputError(ValueError):
    """Input rejected by :func:`estimate_permanent`; ``reason`` names the check."""

    def __init__(self, reason, message):
        super().__init__(message)
        self.reason = reason


def _sis_block(A, B, rng, size):
    """Weights of ``size`` column-by-column sampled permutations.

    Column ``j`` picks an unused row ``i`` with probability proportional to
    ``B[i, j]``; the weight is the product of ``A[i, j]`` over the proposal
    probabilities, which is unbiased for ``per(A)``.
    """
    n = B.shape[0]
    avail = np.ones((size, n), dtype=bool)
    logw = np.zeros(size)
    alive = np.ones(size, dtype=bool)
    idx = np.arange(size)
    for j in range(n):
        p = np.where(avail, B[:, j][None, :], 0.0)
        cdf = np.cumsum(p, axis=1)
        tot = cdf[:, -1]
        u = rng.random(size) * tot
        i = np.minimum((cdf <= u[:, None]).sum(axis=1), n - 1)
        pij = B[i, j]
        good = (tot > 0) & (pij > 0) & avail[idx, i]
        alive &= good
        logw += (np.log(np.where(good, tot, 1.0)) - np.log(np.where(good, pij, 1.0))
                 + np.log(np.where(good, A[i, j], 1.0)))
        avail[idx, i] = False
    return np.where(alive, np.exp(logw), 0.0)


def _block_rng(seed, block):
    ss = np.random.SeedSequence([int(seed), block], spawn_key=(0x5151,))
    return np.random.Generator(np.random.Philox(ss))


def importance_weights(A, samples, seed, proposal=None):
    """Raw importance weights for ``A``, each an unbiased estimate of ``per(A)``.

    Parameters
    ----------
    A : array_like
        Square nonnegative matrix.
    samples : int
        Number of weights; rounded up to whole blocks of ``SIS_BLOCK``.
    seed : int
        Sampling seed, with the same block streams as :func:`estimate_permanent`.
    proposal : array_like, optional
        Proposal matrix; defaults to ``A`` itself.
    """
    A = np.asarray(as_matrix(A, square=True))
    B = A if proposal is None else np.asarray(proposal, dtype=np.float64)
    nblocks = max(1, int(math.ceil(samples / SIS_BLOCK)))
    return np.concatenate([_sis_block(A, B, _block_rng(seed, b), SIS_BLOCK)
                           for b in range(nblocks)])


def initial_sample_size(n, gamma, eps, delta):
    """``n^((1-gamma)/(2 gamma-1)) eps^-2 log(1/delta)`` rounded up to whole blocks."""
    shape = n ** ((1.0 - gamma) / (2.0 * gamma - 1.0)) * eps ** -2 * math.log(1.0 / delta)
    N = min(max(int(math.ceil(shape)), SIS_BLOCK), SIS_MAX_INITIAL)
    return int(math.ceil(N / SIS_BLOCK)) * SIS_BLOCK


def estimate_permanent(A, eps, delta, seed, max_samples=SIS_MAX_SAMPLES):
    """Estimate the permanent of a dense 0-1 matrix.

    The matrix is first scaled until every line sum is within ``1/(10 n^2)`` of
    1. Permutations are then drawn column by column with the scaled matrix as
    proposal. The sample count starts from the dense-case complexity shape and
    grows until the empirical ``1 - delta`` interval has relative half width at
    most ``eps / 2``, or ``max_samples`` is reached.

    Parameters
    ----------
    A : array_like
        Square 0-1 matrix whose every line has more than ``n/2`` ones and whose
        permanent is positive.
    eps, delta : float
        Target relative accuracy and failure probability.
    seed : int
        Sampling seed; block ``b`` of samples uses the stream ``(seed, b)``.

    Returns
    -------
    PermanentEstimate

    Raises
    ------
    EstimatorInputError
        With ``reason`` one of ``"not_binary"``, ``"zero_permanent"``,
        ``"not_dense"``.
    """
    A = as_matrix(A, square=True)
    n = A.shape[0]
    if not 0 < eps < 1 or not 0 < delta < 1:
        raise ValueError("eps and delta must lie in (0, 1)")
    if not np.all((A == 0) | (A == 1)):
        raise EstimatorInputError("not_binary", "estimator needs a 0-1 matrix")
    if permanent_is_zero(A):
        raise EstimatorInputError("zero_permanent",
                                  "permanent is zero: the support has no perfect matching")
    gamma = density_profile(A, 1.0).gamma_max
    if gamma <= 0.5:
        raise EstimatorInputError(
            "not_dense", f"density {gamma:.4g} is not above 1/2; estimator not applicable")

    target = 1.0 / (10.0 * n * n)
    res = run(A, target, norm="l1")
    if res.status != Status.CONVERGED:
        raise RuntimeError(f"scaling stopped with status {res.status.value}")
    B = np.array(res.final)
    maxdev = deviation(B).max_deviation

    z = NormalDist().inv_cdf(1.0 - delta / 2.0)
    N0 = initial_sample_size(n, gamma, eps, delta)
    blocks = []
    while True:
        while len(blocks) * SIS_BLOCK < N0:
            blocks.append(_sis_block(A, B, _block_rng(seed, len(blocks)), SIS_BLOCK))
        w = np.concatenate(blocks)
        N = w.size
        mean = math.fsum(w) / N
        sd = float(np.sqrt(math.fsum((w - mean) ** 2) / max(N - 1, 1)))
        if mean <= 0:
            need = N + SIS_BLOCK
        else:
            need = (z * sd / (mean * eps / 2.0)) ** 2
        if need <= N or N >= max_samples:
            break
        N0 = min(int(math.ceil(need)), max_samples)
    rhw = 1.959963984540054 * sd / (math.sqrt(N) * mean) if mean > 0 else math.inf
    return PermanentEstimate(estimate=mean, samples=N, relative_half_width=rhw,
                             method=Method.IMPORTANCE_SAMPLING, scaled_max_deviation=maxdev)
