"""Dense nonnegative matrices, line sums and the error measures used for scaling.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Functions that
hand a matrix back to the caller return a read-only array so that values
behave as immutable snapshots.
"""

from dataclasses import dataclass

import numpy as np

# a side counts as standardized when every sum is within this of 1
STANDARDIZED_TOL = 1e-9


class InvalidMatrixError(ValueError):
    """Raised when an array is not a valid nonnegative, nonzero matrix."""


def as_matrix(A, square=False):
    """Validate ``A`` and return it as a read-only float64 array.

    Parameters
    ----------
    A : array_like
        Two-dimensional array with finite nonnegative entries, not all zero.
    square : bool
        Also require ``rows == cols``.

    Returns
    -------
    numpy.ndarray
        A read-only copy (or view, if ``A`` already qualifies).
    """
    M = np.array(A, dtype=np.float64)
    if M.ndim != 2:
        raise InvalidMatrixError(f"expected a 2-d array, got ndim={M.ndim}")
    if M.shape[0] < 1 or M.shape[1] < 1:
        raise InvalidMatrixError("matrix must have at least one row and one column")
    if square and M.shape[0] != M.shape[1]:
        raise InvalidMatrixError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidMatrixError("matrix has non-finite entries")
    if np.any(M < 0):
        raise InvalidMatrixError("matrix has negative entries")
    if not np.any(M > 0):
        raise InvalidMatrixError("matrix is identically zero")
    M.setflags(write=False)
    return M


def frozen(M):
    """Return a read-only copy of ``M``."""
    out = np.array(M, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def row_sums(A):
    """Sum of each row."""
    return np.asarray(A, dtype=np.float64).sum(axis=1)


def col_sums(A):
    """Sum of each column."""
    return np.asarray(A, dtype=np.float64).sum(axis=0)


@dataclass(frozen=True)
class DeviationReport:
    """Distance of a square matrix's line sums from the all-ones vector."""

    l1_row: float
    l1_col: float
    l2_row: float
    l2_col: float
    max_row: float
    min_row: float
    max_col: float
    min_col: float
    max_deviation: float

    @property
    def l1(self):
        return self.l1_row + self.l1_col

    @property
    def l2(self):
        return self.l2_row + self.l2_col


def deviation_from_sums(r, c):
    """Build a :class:`DeviationReport` from precomputed row and column sums."""
    dr = np.abs(r - 1.0)
    dc = np.abs(c - 1.0)
    max_row, min_row = float(r.max()), float(r.min())
    max_col, min_col = float(c.max()), float(c.min())
    return DeviationReport(
        l1_row=float(dr.sum()),
        l1_col=float(dc.sum()),
        l2_row=float(np.sqrt(np.dot(dr, dr))),
        l2_col=float(np.sqrt(np.dot(dc, dc))),
        max_row=max_row,
        min_row=min_row,
        max_col=max_col,
        min_col=min_col,
        max_deviation=max(abs(max_row - 1.0), abs(1.0 - min_row),
                          abs(max_col - 1.0), abs(1.0 - min_col)),
    )


def deviation(A):
    """Row and column sum errors of a square matrix.

    Parameters
    ----------
    A : array_like
        Square nonnegative matrix.

    Returns
    -------
    DeviationReport
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrixError(f"deviation needs a square matrix, got shape {A.shape}")
    return deviation_from_sums(A.sum(axis=1), A.sum(axis=0))


def standardized_side(A, tol=STANDARDIZED_TOL):
    """Return ``"row"`` or ``"col"`` for the side whose sums are all 1, else None.

    When both sides qualify, ``"row"`` is returned.
    """
    A = np.asarray(A, dtype=np.float64)
    if np.all(np.abs(A.sum(axis=1) - 1.0) <= tol):
        return "row"
    if np.all(np.abs(A.sum(axis=0) - 1.0) <= tol):
        return "col"
    return None


def alpha_accuracy(A, tol=STANDARDIZED_TOL):
    """Accuracy ``(2/n) * sum |s_j - 1|`` over the non-standardized side.

    Parameters
    ----------
    A : array_like
        Square matrix whose rows or columns all sum to 1 (within ``tol``).

    Returns
    -------
    float

    Raises
    ------
    InvalidMatrixError
        If neither side is standardized.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidMatrixError(f"alpha_accuracy needs a square matrix, got shape {A.shape}")
    side = standardized_side(A, tol)
    if side is None:
        raise InvalidMatrixError("matrix is not standardized: neither rows nor columns sum to 1")
    s = A.sum(axis=0) if side == "row" else A.sum(axis=1)
    return 2.0 / A.shape[0] * float(np.abs(s - 1.0).sum())


def read_matrix(path_or_file):
    """Read a matrix in the text interchange format.

    The first line holds ``rows cols``; each following line holds one row of
    whitespace-separated decimal literals.
    """
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidMatrixError("empty matrix file")
    header = lines[0].split()
    if len(header) != 2:
        raise InvalidMatrixError("header must be 'rows cols'")
    try:
        rows, cols = int(header[0]), int(header[1])
    except ValueError as exc:
        raise InvalidMatrixError(f"bad header: {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != rows:
        raise InvalidMatrixError(f"expected {rows} rows, found {len(body)}")
    data = []
    for i, ln in enumerate(body):
        fields = ln.split()
        if len(fields) != cols:
            raise InvalidMatrixError(f"row {i} has {len(fields)} entries, expected {cols}")
        try:
            data.append([float(f) for f in fields])
        except ValueError as exc:
            raise InvalidMatrixError(f"row {i}: {exc}") from exc
    return as_matrix(data)


def write_matrix(A, path_or_file):
    """Write ``A`` in the text interchange format with round-trip precision."""
    A = np.asarray(A, dtype=np.float64)
    out = [f"{A.shape[0]} {A.shape[1]}"]
    out.extend(" ".join(repr(float(v)) for v in row) for row in A)
    text = "\n".join(out) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)
