"""State-space partitions, collector/distributor matrices, and the search
for coarsest bisimulations (iterated refinement plus an exhaustive oracle).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .algebra import DEFAULT_ATOL, ActionAlphabet, ActionMatrix

#: Bell numbers B(0)..B(12); the oracle refuses anything larger.
BELL = (1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597)
MAX_ORACLE_STATES = 12


class ModelFormatError(ValueError):
    """Malformed model, partition, or distributor text."""


@dataclass(frozen=True)
class Witness:
    """First offending entry of a violated matrix equality.

    ``lhs``/``rhs`` are label tuples in the boolean world and floats in the
    real world; ``residual`` is set for real comparisons only.
    """

    row: int
    col: int
    lhs: object
    rhs: object
    residual: float | None = None


@dataclass(frozen=True)
class CheckReport:
    """Verdict of one bisimulation check."""

    kind: str
    passed: bool
    violated: str | None = None
    witness: Witness | None = None

    def __post_init__(self):
        if self.passed != (self.violated is None):
            raise ValueError("passed iff no violated equality")


class CheckFailed(ValueError):
    """An operation requiring a passing check was given a failing one."""

    def __init__(self, report: CheckReport):
        super().__init__(f"{report.kind} check failed on {report.violated!r}")
        self.report = report


@dataclass(frozen=True)
class Partition:
    """Partition of ``{0..n-1}`` in canonical form.

    Blocks are sorted internally and ordered by smallest member, so
    structural equality decides partition equality.
    """

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("partitions need at least one state")
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else -1))
        object.__setattr__(self, "blocks", blocks)
        seen: set[int] = set()
        for block in blocks:
            if not block:
                raise ValueError("empty block")
            for s in block:
                if not 0 <= s < self.n:
                    raise ValueError(f"state {s} out of range")
                if s in seen:
                    raise ValueError(f"state {s} in two blocks")
                seen.add(s)
        if len(seen) != self.n:
            missing = sorted(set(range(self.n)) - seen)
            raise ValueError(f"states not covered: {missing}")

    @classmethod
    def identity(cls, n: int) -> "Partition":
        return cls(n, tuple((i,) for i in range(n)))

    @classmethod
    def single_block(cls, n: int) -> "Partition":
        return cls(n, (tuple(range(n)),))

    @classmethod
    def from_assignment(cls, labels: Sequence) -> "Partition":
        groups: dict = {}
        for state, lab in enumerate(labels):
            groups.setdefault(lab, []).append(state)
        return cls(len(labels), tuple(tuple(g) for g in groups.values()))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def assignment(self) -> tuple[int, ...]:
        out = [0] * self.n
        for k, block in enumerate(self.blocks):
            for s in block:
                out[s] = k
        return tuple(out)

    def block_of(self, state: int) -> int:
        return self.assignment[state]

    def is_identity(self) -> bool:
        return self.num_blocks == self.n

    def collector_bool(self, alphabet: ActionAlphabet) -> ActionMatrix:
        """n x N collector over the given alphabet (0-1 entries)."""
        one = alphabet.full_mask
        assign = self.assignment
        data = tuple(
            tuple(one if assign[i] == k else 0 for k in range(self.num_blocks))
            for i in range(self.n)
        )
        return ActionMatrix(alphabet, data)

    def collector_real(self) -> np.ndarray:
        v = np.zeros((self.n, self.num_blocks))
        for k, block in enumerate(self.blocks):
            v[list(block), k] = 1.0
        return v


def split_by_keys(p: Partition, keys: Sequence) -> Partition:
    """Refine ``p`` by grouping, inside each block, states with equal keys."""
    blocks = []
    for block in p.blocks:
        groups: dict = {}
        for s in block:
            groups.setdefault(keys[s], []).append(s)
        blocks.extend(groups.values())
    return Partition(p.n, tuple(tuple(b) for b in blocks))


# ---------------------------------------------------------------------------
# Collector / distributor helpers
# ---------------------------------------------------------------------------


def is_bool_collector(v: ActionMatrix) -> bool:
    if not v.is_zero_one():
        return False
    full = v.alphabet.full_mask
    if full == 0:
        return False
    cols_hit = [False] * v.cols
    for row in v.data:
        ones = [j for j, m in enumerate(row) if m]
        if len(ones) != 1:
            return False
        cols_hit[ones[0]] = True
    return all(cols_hit)


def require_bool_collector(v: ActionMatrix) -> None:
    if not is_bool_collector(v):
        raise ValueError("not a collector: need exactly one full entry per row and no empty column")


def is_real_collector(v: np.ndarray) -> bool:
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        return False
    if not np.all((v == 0.0) | (v == 1.0)):
        return False
    if not np.all(v.sum(axis=1) == 1.0):
        return False
    return bool(np.all(v.sum(axis=0) >= 1.0))


def require_real_collector(v: np.ndarray) -> None:
    if not is_real_collector(v):
        raise ValueError("not a collector: need exactly one unit entry per row and no empty column")


def collector_to_partition(v) -> Partition:
    """Recover the partition encoded by a collector (boolean or real)."""
    if isinstance(v, ActionMatrix):
        require_bool_collector(v)
        labels = [next(j for j, m in enumerate(row) if m) for row in v.data]
    else:
        arr = np.asarray(v, dtype=float)
        require_real_collector(arr)
        labels = [int(np.argmax(row)) for row in arr]
    return Partition.from_assignment(labels)


def canonical_distributor_bool(v: ActionMatrix) -> ActionMatrix:
    """Transpose of the collector; a distributor in the boolean world."""
    require_bool_collector(v)
    u = v.transpose()
    if u @ v != ActionMatrix.identity(v.alphabet, v.cols):
        raise ValueError("transpose is not a distributor for this matrix")
    return u


def canonical_distributor_real(v: np.ndarray) -> np.ndarray:
    """Row-normalized transpose: each class row averages its members."""
    v = np.asarray(v, dtype=float)
    require_real_collector(v)
    u = v.T / v.sum(axis=0)[:, None]
    if not np.allclose(u @ v, np.eye(v.shape[1]), atol=1e-12) or not np.allclose(
        u.sum(axis=1), 1.0, atol=1e-12
    ):
        raise ValueError("normalized transpose is not a distributor for this matrix")
    return u


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def content_lines(text: str) -> list[tuple[int, list[str]]]:
    """Token lists of non-empty lines, with 1-based line numbers; '#' starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append((lineno, body.split()))
    return out


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ModelFormatError(f"line {lineno}: {what} must be an integer, got {token!r}") from None


def parse_partition(text: str) -> Partition:
    lines = content_lines(text)
    if not lines or lines[0][1][0] != "partition":
        raise ModelFormatError("partition files start with 'partition <n>'")
    lineno, header = lines[0]
    if len(header) != 2:
        raise ModelFormatError(f"line {lineno}: expected 'partition <n>'")
    n = _parse_int(header[1], lineno, "state count")
    blocks = []
    for lineno, tokens in lines[1:]:
        blocks.append(tuple(_parse_int(t, lineno, "state index") for t in tokens))
    try:
        return Partition(n, tuple(blocks))
    except ValueError as exc:
        raise ModelFormatError(f"invalid partition: {exc}") from exc


def format_partition(p: Partition) -> str:
    lines = [f"partition {p.n}"]
    lines.extend(" ".join(str(s) for s in block) for block in p.blocks)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Coarsest-partition search
# ---------------------------------------------------------------------------


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """All partitions of ``{0..n-1}`` in restricted-growth order."""
    labels = [0] * n

    def rec(i: int, top: int) -> Iterator[Partition]:
        if i == n:
            yield Partition.from_assignment(labels)
            return
        for lab in range(top + 2):
            labels[i] = lab
            yield from rec(i + 1, max(top, lab))

    if n == 0:
        return
    yield from rec(1, 0)


def refinement_fixpoint(n: int, signature_fn: Callable[[Partition], Sequence]) -> Partition:
    """Iterate block splitting from the one-block partition to a fixpoint.

    ``signature_fn`` may depend on the current partition (the branching
    closures do), so signatures are recomputed every round.
    """
    part = Partition.single_block(n)
    while True:
        refined = split_by_keys(part, signature_fn(part))
        if refined == part:
            return part
        part = refined


def brute_force_coarsest(model, checker: Callable, *, max_states: int = MAX_ORACLE_STATES) -> Partition:
    """Exhaustive oracle: fewest blocks, ties broken by canonical form.

    ``checker(model, partition)`` must return a :class:`CheckReport`.
    """
    n = model.num_states
    if n > max_states:
        raise ValueError(f"state bound exceeded: {n} > {max_states} (Bell number too large)")
    best: Partition | None = None
    for p in enumerate_partitions(n):
        if not checker(model, p).passed:
            continue
        if best is None or (p.num_blocks, p.blocks) < (best.num_blocks, best.blocks):
            best = p
    if best is None:
        raise ValueError("no partition passed the checker")
    return best


def standard_checker(model, kind: str, *, atol: float = DEFAULT_ATOL, strict_middle: bool = False) -> Callable:
    """Checker callable ``(model, partition) -> CheckReport`` for a kind."""
    from . import lts as _lts
    from . import mrc as _mrc

    if isinstance(model, _lts.Lts):
        return _lts.partition_checker(kind, strict_middle=strict_middle)
    if isinstance(model, (_mrc.Mrc, _mrc.MrcFast)):
        return _mrc.partition_checker(kind, atol=atol)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def coarsest_partition(
    model,
    kind: str,
    checker: Callable | None = None,
    *,
    atol: float = DEFAULT_ATOL,
    strict_middle: bool = False,
) -> Partition:
    """Coarsest partition whose collector passes the bisimulation check.

    Strong and weak kinds (and branching on transition systems) use
    signature refinement.  Branching on reward chains has no unique
    coarsest solution in general, so small instances fall back to the
    exhaustive lattice search; larger ones return the refinement fixpoint,
    which passes its own check but may not have the fewest blocks.

    A custom ``checker`` switches to the exhaustive search so that the
    result is defined by the checker alone.
    """
    from . import lts as _lts
    from . import mrc as _mrc

    if kind not in ("strong", "weak", "branching"):
        raise ValueError(f"unknown kind {kind!r}")
    custom = checker is not None
    if checker is None:
        checker = standard_checker(model, kind, atol=atol, strict_middle=strict_middle)

    n = model.num_states
    if custom or (strict_middle and kind == "weak"):
        return brute_force_coarsest(model, checker)

    if isinstance(model, _lts.Lts):
        signature_fn = _lts.refinement_signatures(model, kind)
    elif isinstance(model, (_mrc.Mrc, _mrc.MrcFast)):
        if kind == "branching" and n <= MAX_ORACLE_STATES:
            return brute_force_coarsest(model, checker)
        signature_fn = _mrc.refinement_signatures(model, kind, atol=atol)
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")

    result = refinement_fixpoint(n, signature_fn)
    report = checker(model, result)
    if not report.passed:
        raise RuntimeError(f"refinement produced a non-passing partition ({report.violated})")
    return result
