import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching


def has_perfect_matching(A):
    """True iff the bipartite support graph of square ``A`` has a perfect matching."""
    S = np.asarray(A) != 0
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if S.all():
        return True
    if not S.any(axis=1).all() or not S.any(axis=0).all():
        return False
    match = maximum_bipartite_matching(csr_matrix(S.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))
