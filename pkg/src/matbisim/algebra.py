"""Matrix algebra over an action-set semiring, plus real-matrix helpers.

Boolean side: matrix entries are subsets of a fixed label alphabet, stored
as bit masks.  Addition is entrywise union, multiplication is the
union-of-intersections product, and ``<=`` is entrywise inclusion.
Matrices whose entries are only the empty or the full set play the role of
0-1 matrices (collectors, internal-step matrices, indicator vectors).

Real side: plain numpy arrays, a finiteness-checking constructor, and a
small pivoted solver with a deterministic singularity threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

DEFAULT_ATOL = 1e-9

#: Reserved label for internal steps; never part of an alphabet.
TAU_LABEL = "tau"


class MatrixShapeError(ValueError):
    """Operand dimensions (or alphabets) do not line up."""


class SingularMatrixError(ValueError):
    """Elimination met a pivot below the singularity threshold."""


@dataclass(frozen=True)
class ActionAlphabet:
    """Ordered set of visible action labels.

    The internal-step label ``"tau"`` is reserved and may never appear here;
    internal steps live in a separate 0-1 matrix.
    """

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        if len(set(names)) != len(names):
            raise ValueError("duplicate action labels")
        for name in names:
            if not name:
                raise ValueError("empty action label")
            if name == TAU_LABEL:
                raise ValueError(f"label {TAU_LABEL!r} is reserved for internal steps")

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def full_mask(self) -> int:
        return (1 << len(self.names)) - 1

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown action label {label!r}") from None

    def mask_of(self, labels: Iterable[str]) -> int:
        mask = 0
        for label in labels:
            mask |= 1 << self.index(label)
        return mask

    def labels_of(self, mask: int) -> tuple[str, ...]:
        return tuple(n for i, n in enumerate(self.names) if mask >> i & 1)

    def action_set(self, labels: Iterable[str] = ()) -> "ActionSet":
        return ActionSet(self, self.mask_of(labels))

    def full_set(self) -> "ActionSet":
        return ActionSet(self, self.full_mask)


@dataclass(frozen=True)
class ActionSet:
    """A subset of an alphabet; the scalar of the boolean matrix world."""

    alphabet: ActionAlphabet
    mask: int

    def __post_init__(self):
        if not 0 <= self.mask <= self.alphabet.full_mask:
            raise ValueError("mask out of range for alphabet")

    def _check(self, other: "ActionSet") -> None:
        if self.alphabet != other.alphabet:
            raise ValueError("action sets over different alphabets")

    def __or__(self, other: "ActionSet") -> "ActionSet":
        self._check(other)
        return ActionSet(self.alphabet, self.mask | other.mask)

    def __and__(self, other: "ActionSet") -> "ActionSet":
        self._check(other)
        return ActionSet(self.alphabet, self.mask & other.mask)

    def complement(self) -> "ActionSet":
        return ActionSet(self.alphabet, self.mask ^ self.alphabet.full_mask)

    def __le__(self, other: "ActionSet") -> bool:
        self._check(other)
        return self.mask | other.mask == other.mask

    @property
    def labels(self) -> tuple[str, ...]:
        return self.alphabet.labels_of(self.mask)

    @property
    def is_empty(self) -> bool:
        return self.mask == 0

    @property
    def is_full(self) -> bool:
        return self.mask == self.alphabet.full_mask

    def __repr__(self):
        return f"ActionSet({{{', '.join(self.labels)}}})"


def format_entry(alphabet: ActionAlphabet, mask: int) -> str:
    """Render one matrix entry: 0, 1, or a braced label set."""
    if mask == 0:
        return "0"
    if mask == alphabet.full_mask:
        return "1"
    return "{" + ",".join(alphabet.labels_of(mask)) + "}"


@dataclass(frozen=True)
class ActionMatrix:
    """Rectangular matrix with action-set entries.

    ``data`` holds one bit mask per entry.  Values are immutable; every
    operation returns a fresh matrix.
    """

    alphabet: ActionAlphabet
    data: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        data = tuple(tuple(row) for row in self.data)
        object.__setattr__(self, "data", data)
        if not data or not data[0]:
            raise MatrixShapeError("matrices must have at least one row and column")
        width = len(data[0])
        full = self.alphabet.full_mask
        for row in data:
            if len(row) != width:
                raise MatrixShapeError("ragged rows")
            for mask in row:
                if not 0 <= mask <= full:
                    raise ValueError("entry mask out of range for alphabet")

    # -- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, alphabet: ActionAlphabet, rows: int, cols: int) -> "ActionMatrix":
        return cls(alphabet, tuple((0,) * cols for _ in range(rows)))

    @classmethod
    def full(cls, alphabet: ActionAlphabet, rows: int, cols: int) -> "ActionMatrix":
        one = alphabet.full_mask
        return cls(alphabet, tuple((one,) * cols for _ in range(rows)))

    @classmethod
    def identity(cls, alphabet: ActionAlphabet, n: int) -> "ActionMatrix":
        one = alphabet.full_mask
        return cls(alphabet, tuple(tuple(one if i == j else 0 for j in range(n)) for i in range(n)))

    @classmethod
    def from_sets(cls, alphabet: ActionAlphabet, entries: Sequence[Sequence[Iterable[str]]]) -> "ActionMatrix":
        return cls(alphabet, tuple(tuple(alphabet.mask_of(cell) for cell in row) for row in entries))

    @classmethod
    def from_bits(cls, alphabet: ActionAlphabet, bits: Sequence[Sequence[int]]) -> "ActionMatrix":
        """Build a 0-1 matrix: truthy cells become the full set."""
        one = alphabet.full_mask
        return cls(alphabet, tuple(tuple(one if cell else 0 for cell in row) for row in bits))

    # -- shape ---------------------------------------------------------

    @property
    def rows(self) -> int:
        return len(self.data)

    @property
    def cols(self) -> int:
        return len(self.data[0])

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.data), len(self.data[0])

    def _check_alphabet(self, other: "ActionMatrix") -> None:
        if self.alphabet != other.alphabet:
            raise MatrixShapeError("matrices over different alphabets")

    # -- entry access ----------------------------------------------------

    def mask_at(self, i: int, j: int) -> int:
        return self.data[i][j]

    def entry(self, i: int, j: int) -> ActionSet:
        return ActionSet(self.alphabet, self.data[i][j])

    # -- semiring operations ----------------------------------------------

    def __add__(self, other: "ActionMatrix") -> "ActionMatrix":
        self._check_alphabet(other)
        if self.shape != other.shape:
            raise MatrixShapeError(f"cannot add {self.shape} and {other.shape}")
        data = tuple(
            tuple(a | b for a, b in zip(ra, rb)) for ra, rb in zip(self.data, other.data)
        )
        return ActionMatrix(self.alphabet, data)

    def __matmul__(self, other: "ActionMatrix") -> "ActionMatrix":
        self._check_alphabet(other)
        if self.cols != other.rows:
            raise MatrixShapeError(f"cannot multiply {self.shape} by {other.shape}")
        bcols = tuple(zip(*other.data))
        out = []
        for row in self.data:
            out_row = []
            for col in bcols:
                acc = 0
                for a, b in zip(row, col):
                    x = a & b
                    if x:
                        acc |= x
                out_row.append(acc)
            out.append(tuple(out_row))
        return ActionMatrix(self.alphabet, tuple(out))

    def meet(self, other: "ActionMatrix") -> "ActionMatrix":
        """Entrywise intersection."""
        self._check_alphabet(other)
        if self.shape != other.shape:
            raise MatrixShapeError(f"cannot meet {self.shape} and {other.shape}")
        data = tuple(
            tuple(a & b for a, b in zip(ra, rb)) for ra, rb in zip(self.data, other.data)
        )
        return ActionMatrix(self.alphabet, data)

    def transpose(self) -> "ActionMatrix":
        return ActionMatrix(self.alphabet, tuple(zip(*self.data)))

    def __le__(self, other: "ActionMatrix") -> bool:
        """Entrywise inclusion."""
        self._check_alphabet(other)
        if self.shape != other.shape:
            raise MatrixShapeError(f"cannot compare {self.shape} and {other.shape}")
        return all(
            a | b == b for ra, rb in zip(self.data, other.data) for a, b in zip(ra, rb)
        )

    def is_zero_one(self) -> bool:
        full = self.alphabet.full_mask
        return all(mask == 0 or mask == full for row in self.data for mask in row)

    def is_zero(self) -> bool:
        return all(mask == 0 for row in self.data for mask in row)

    def __str__(self):
        rendered = [[format_entry(self.alphabet, m) for m in row] for row in self.data]
        width = max(len(cell) for row in rendered for cell in row)
        return "\n".join(" ".join(cell.rjust(width) for cell in row) for row in rendered)


def first_difference(a: ActionMatrix, b: ActionMatrix) -> tuple[int, int] | None:
    """Row-major coordinates of the first differing entry, if any."""
    if a.shape != b.shape:
        raise MatrixShapeError(f"cannot compare {a.shape} and {b.shape}")
    for i, (ra, rb) in enumerate(zip(a.data, b.data)):
        for j, (x, y) in enumerate(zip(ra, rb)):
            if x != y:
                return i, j
    return None


def rt_closure(m: ActionMatrix) -> ActionMatrix:
    """Least reflexive-transitive 0-1 matrix above ``m``.

    Computed as a Warshall fixpoint on row bit sets; the infinite power sum
    stabilizes after at most n steps, which this realizes in O(n^2) word
    operations.
    """
    if m.rows != m.cols:
        raise MatrixShapeError("closure needs a square matrix")
    if not m.is_zero_one():
        raise ValueError("closure is defined for 0-1 matrices only")
    n = m.rows
    reach = []
    for i, row in enumerate(m.data):
        bits = 1 << i
        for j, mask in enumerate(row):
            if mask:
                bits |= 1 << j
        reach.append(bits)
    for k in range(n):
        bit = 1 << k
        rk = reach[k]
        for i in range(n):
            if reach[i] & bit:
                reach[i] |= rk
    one = m.alphabet.full_mask
    data = tuple(
        tuple(one if reach[i] >> j & 1 else 0 for j in range(n)) for i in range(n)
    )
    return ActionMatrix(m.alphabet, data)


# ---------------------------------------------------------------------------
# Real matrices
# ---------------------------------------------------------------------------


def real_matrix(entries) -> np.ndarray:
    """Copy input to a float array, rejecting NaN and infinities."""
    arr = np.array(entries, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite entries")
    return arr


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise MatrixShapeError(f"cannot compare shapes {a.shape} and {b.shape}")
    return float(np.max(np.abs(a - b))) if a.size else 0.0

def allclose_abs(a, b, atol: float = DEFAULT_ATOL) -> bool:
    """Absolute-tolerance comparison; relative error is deliberately ignored."""
    return max_abs_diff(a, b) <= atol


def first_real_mismatch(lhs, rhs, atol: float = DEFAULT_ATOL):
    """First row-major entry where |lhs - rhs| exceeds atol, or None.

    One-dimensional inputs are treated as single-column matrices.
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.shape != rhs.shape:
        raise MatrixShapeError(f"cannot compare shapes {lhs.shape} and {rhs.shape}")
    if lhs.ndim == 1:
        lhs = lhs.reshape(-1, 1)
        rhs = rhs.reshape(-1, 1)
    bad = np.argwhere(np.abs(lhs - rhs) > atol)
    if bad.size == 0:
        return None
    i, j = map(int, bad[0])
    return i, j, float(lhs[i, j]), float(rhs[i, j])


def solve_linear(a, b, *, pivot_rtol: float = 1e-12) -> np.ndarray:
    """Solve ``a @ x = b`` by Gaussian elimination with partial pivoting.

    A pivot smaller than ``pivot_rtol`` times the largest initial magnitude
    of its column raises :class:`SingularMatrixError`; this makes the
    singularity verdict deterministic and independent of elimination
    history.
    """
    m = real_matrix(a)
    rhs = real_matrix(b)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise MatrixShapeError("solver needs a square coefficient matrix")
    n = m.shape[0]
    vector = rhs.ndim == 1
    if rhs.shape[0] != n or rhs.ndim > 2:
        raise MatrixShapeError("right-hand side has the wrong number of rows")
    rhs = rhs.reshape(n, -1)
    col_scale = np.max(np.abs(m), axis=0)
    m = m.copy()
    rhs = rhs.copy()
    for k in range(n):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        if col_scale[k] == 0.0 or abs(m[p, k]) < pivot_rtol * col_scale[k]:
            raise SingularMatrixError(f"pivot for column {k} below threshold")
        if p != k:
            m[[k, p]] = m[[p, k]]
            rhs[[k, p]] = rhs[[p, k]]
        factors = m[k + 1 :, k] / m[k, k]
        m[k + 1 :, k:] -= np.outer(factors, m[k, k:])
        rhs[k + 1 :] -= np.outer(factors, rhs[k])
    x = np.empty_like(rhs)
    for k in range(n - 1, -1, -1):
        x[k] = (rhs[k] - m[k, k + 1 :] @ x[k + 1 :]) / m[k, k]
    return x[:, 0] if vector else x
