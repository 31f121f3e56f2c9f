"""
Dense linear algebra over GF(2).

Matrices are stored row-major with each row packed into bytes
(`numpy.packbits`, big-endian bit order). Row operations are XORs of packed
rows; padding bits past `cols` are always zero.
"""

from dataclasses import dataclass

import numpy as np

from utils.errors import InconsistentSystemError


@dataclass(frozen=True, eq=False)
class BitMatrix:
    """A rows x cols matrix over GF(2) with packed rows."""

    rows: int
    cols: int
    bits: np.ndarray

    @classmethod
    def from_dense(cls, dense) -> "BitMatrix":
        arr = np.asarray(dense, dtype=np.uint8)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        arr = arr & 1
        rows, cols = arr.shape
        packed = np.packbits(arr, axis=1) if cols else np.zeros((rows, 0), np.uint8)
        packed.setflags(write=False)
        return cls(rows, cols, packed)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls.from_dense(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, size: int) -> "BitMatrix":
        return cls.from_dense(np.eye(size, dtype=np.uint8))

    def to_dense(self) -> np.ndarray:
        """Returns the matrix as a rows x cols uint8 array of 0/1."""
        if self.cols == 0:
            return np.zeros((self.rows, 0), dtype=np.uint8)
        return np.unpackbits(self.bits, axis=1, count=self.cols)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self.bits.tobytes()))

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        product = self.to_dense().astype(np.int64) @ other.to_dense().astype(np.int64)
        return BitMatrix.from_dense(product & 1)

    def mul_vec(self, vec) -> np.ndarray:
        """Returns M·v over GF(2) for a 0/1 vector v."""
        v = np.asarray(vec, dtype=np.int64)
        return ((self.to_dense().astype(np.int64) @ v) & 1).astype(np.uint8)

    def hstack(self, other: "BitMatrix") -> "BitMatrix":
        return BitMatrix.from_dense(np.hstack([self.to_dense(), other.to_dense()]))

    def vstack(self, other: "BitMatrix") -> "BitMatrix":
        return BitMatrix.from_dense(np.vstack([self.to_dense(), other.to_dense()]))

    def rank(self) -> int:
        return rref(self).rank


@dataclass(frozen=True)
class RrefResult:
    """Reduced row echelon form together with its pivot columns."""

    reduced: BitMatrix
    pivot_columns: list[int]
    rank: int


def _column(packed: np.ndarray, col: int) -> np.ndarray:
    return (packed[:, col >> 3] >> (7 - (col & 7))) & 1


def _eliminate(packed: np.ndarray, pivot_limit: int) -> list[int]:
    """
    Reduces `packed` in place to RREF, choosing pivots only among the first
    `pivot_limit` columns. Pivot row is the first nonzero row at or below the
    current pivot position.
    """
    n_rows = packed.shape[0]
    pivots: list[int] = []
    pivot_row = 0

    for col in range(pivot_limit):
        if pivot_row == n_rows:
            break
        column = _column(packed, col)
        candidates = np.flatnonzero(column[pivot_row:])
        if candidates.size == 0:
            continue
        found = pivot_row + int(candidates[0])
        if found != pivot_row:
            packed[[pivot_row, found]] = packed[[found, pivot_row]]
            column[[pivot_row, found]] = column[[found, pivot_row]]

        # Clear the column above and below the pivot
        targets = np.flatnonzero(column)
        targets = targets[targets != pivot_row]
        if targets.size:
            packed[targets] ^= packed[pivot_row]

        pivots.append(col)
        pivot_row += 1

    return pivots


def rref(matrix: BitMatrix, pivot_limit: int | None = None) -> RrefResult:
    """
    Computes the reduced row echelon form of a GF(2) matrix.

    Args:
        matrix: The matrix to reduce.
        pivot_limit: Restrict pivots to the first `pivot_limit` columns; the
            remaining columns are carried along (augmented part).

    Returns:
        The reduced matrix, its pivot columns and the rank.
    """
    limit = matrix.cols if pivot_limit is None else pivot_limit
    packed = matrix.bits.copy()
    pivots = _eliminate(packed, limit)
    packed.setflags(write=False)
    reduced = BitMatrix(matrix.rows, matrix.cols, packed)
    return RrefResult(reduced=reduced, pivot_columns=pivots, rank=len(pivots))


def left_null_space(matrix: BitMatrix) -> BitMatrix:
    """
    Returns N with N·M = 0 whose rows form a basis of the left null space.

    The result has rows(M) - rank(M) rows; full row rank M yields 0 rows.
    """
    augmented = matrix.hstack(BitMatrix.identity(matrix.rows))
    result = rref(augmented, pivot_limit=matrix.cols)
    dense = result.reduced.to_dense()
    return BitMatrix.from_dense(dense[result.rank :, matrix.cols :])


def solve_with_determination(
    matrix: BitMatrix, rhs
) -> tuple[np.ndarray, np.ndarray]:
    """
    Solves M x = s over GF(2) and flags the coordinates fixed by the system.

    A coordinate j is determined when every solution agrees on it, i.e. when
    e_j lies in the row space of M. In RREF that happens exactly when column
    j is a pivot and its pivot row has no other nonzero entry. Free
    coordinates are pinned to 0.

    Args:
        matrix: The system matrix M.
        rhs: The right-hand side s as a 0/1 vector of length rows(M).

    Returns:
        A tuple (solution, determined) of length cols(M) arrays.

    Raises:
        InconsistentSystemError: If the system has no solution.
    """
    s = np.asarray(rhs, dtype=np.uint8).reshape(-1, 1)
    if s.shape[0] != matrix.rows:
        raise ValueError(f"rhs length {s.shape[0]} != rows {matrix.rows}")

    augmented = matrix.hstack(BitMatrix.from_dense(s))
    result = rref(augmented, pivot_limit=matrix.cols)
    dense = result.reduced.to_dense()
    coeffs, reduced_rhs = dense[:, : matrix.cols], dense[:, matrix.cols]

    if np.any(reduced_rhs[result.rank :]):
        raise InconsistentSystemError("inconsistent")

    solution = np.zeros(matrix.cols, dtype=np.uint8)
    determined = np.zeros(matrix.cols, dtype=bool)
    for row, col in enumerate(result.pivot_columns):
        solution[col] = reduced_rhs[row]
        determined[col] = int(coeffs[row].sum()) == 1

    return solution, determined
