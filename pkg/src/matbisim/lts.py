"""Labeled transition systems with explicit termination, in matrix form.

A system is (initial indicator, visible transition matrix, internal 0-1
matrix, termination indicator).  The combined transition matrix with the
internal label folded in is recoverable; the split representation keeps the
whole algebra inside one alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .algebra import (
    TAU_LABEL,
    ActionAlphabet,
    ActionMatrix,
    first_difference,
    rt_closure,
)
from .partition import (
    CheckFailed,
    CheckReport,
    ModelFormatError,
    Partition,
    Witness,
    content_lines,
    require_bool_collector,
)

KINDS = ("strong", "weak", "branching")


@dataclass(frozen=True)
class Lts:
    """Transition system of dimension ``n`` over a fixed visible alphabet."""

    alphabet: ActionAlphabet
    initial: ActionMatrix      # 1 x n, 0-1, exactly one nonzero entry
    visible: ActionMatrix      # n x n, action-set entries
    internal: ActionMatrix     # n x n, 0-1 (internal steps)
    terminating: ActionMatrix  # n x 1, 0-1

    def __post_init__(self):
        if self.alphabet.size == 0:
            raise ValueError("alphabet must contain at least one visible action")
        n = self.visible.rows
        for m in (self.initial, self.visible, self.internal, self.terminating):
            if m.alphabet != self.alphabet:
                raise ValueError("all matrices must share the system alphabet")
        if self.visible.shape != (n, n) or self.internal.shape != (n, n):
            raise ValueError("transition matrices must be square and agree in size")
        if self.initial.shape != (1, n):
            raise ValueError(f"initial vector must be 1 x {n}")
        if self.terminating.shape != (n, 1):
            raise ValueError(f"termination vector must be {n} x 1")
        for m, what in ((self.initial, "initial"), (self.internal, "internal"), (self.terminating, "termination")):
            if not m.is_zero_one():
                raise ValueError(f"{what} matrix must be 0-1")
        if sum(1 for m in self.initial.data[0] if m) != 1:
            raise ValueError("initial vector must have exactly one nonzero entry")

    @property
    def num_states(self) -> int:
        return self.visible.rows

    @property
    def initial_state(self) -> int:
        return next(i for i, m in enumerate(self.initial.data[0]) if m)


def combined_labels(lts: Lts) -> tuple[tuple[frozenset[str], ...], ...]:
    """One label-set table holding visible and internal steps together."""
    out = []
    for i in range(lts.num_states):
        row = []
        for j in range(lts.num_states):
            labels = set(lts.alphabet.labels_of(lts.visible.mask_at(i, j)))
            if lts.internal.mask_at(i, j):
                labels.add(TAU_LABEL)
            row.append(frozenset(labels))
        out.append(tuple(row))
    return tuple(out)


def split_labels(alphabet: ActionAlphabet, table: Sequence[Sequence[frozenset[str]]]) -> tuple[ActionMatrix, ActionMatrix]:
    """Inverse of :func:`combined_labels`: split a label table into
    (visible, internal).  The split is unique because the internal label is
    reserved."""
    visible = []
    internal = []
    for row in table:
        vrow = []
        irow = []
        for cell in row:
            irow.append(alphabet.full_mask if TAU_LABEL in cell else 0)
            vrow.append(alphabet.mask_of(lab for lab in cell if lab != TAU_LABEL))
        visible.append(tuple(vrow))
        internal.append(tuple(irow))
    return ActionMatrix(alphabet, tuple(visible)), ActionMatrix(alphabet, tuple(internal))


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def parse_lts(text: str) -> Lts:
    """Parse the line-oriented system format.

    Header: ``lts <n>``, ``alphabet <a1> ...``, ``init <i>``,
    ``term <i1> ...`` (possibly empty), then one ``<src> <label> <dst>``
    per transition.  The label ``tau`` feeds the internal matrix; repeated
    transition lines are idempotent.
    """
    lines = content_lines(text)
    if len(lines) < 4:
        raise ModelFormatError("expected header lines: lts, alphabet, init, term")
    (ln0, h0), (ln1, h1), (ln2, h2), (ln3, h3) = lines[:4]
    if h0[0] != "lts" or len(h0) != 2:
        raise ModelFormatError(f"line {ln0}: expected 'lts <n>'")
    try:
        n = int(h0[1])
    except ValueError:
        raise ModelFormatError(f"line {ln0}: state count must be an integer") from None
    if n < 1:
        raise ModelFormatError(f"line {ln0}: need at least one state")
    if h1[0] != "alphabet":
        raise ModelFormatError(f"line {ln1}: expected 'alphabet <labels...>'")
    try:
        alphabet = ActionAlphabet(tuple(h1[1:]))
    except ValueError as exc:
        raise ModelFormatError(f"line {ln1}: {exc}") from exc
    if alphabet.size == 0:
        raise ModelFormatError(f"line {ln1}: alphabet must list at least one visible action")
    if h2[0] != "init" or len(h2) != 2:
        raise ModelFormatError(f"line {ln2}: expected 'init <state>'")
    if h3[0] != "term":
        raise ModelFormatError(f"line {ln3}: expected 'term <states...>'")

    def state(token: str, lineno: int) -> int:
        try:
            i = int(token)
        except ValueError:
            raise ModelFormatError(f"line {lineno}: state index must be an integer, got {token!r}") from None
        if not 0 <= i < n:
            raise ModelFormatError(f"line {lineno}: state {i} out of range 0..{n - 1}")
        return i

    init = state(h2[1], ln2)
    term = {state(t, ln3) for t in h3[1:]}

    visible = [[0] * n for _ in range(n)]
    internal = [[0] * n for _ in range(n)]
    for lineno, tokens in lines[4:]:
        if len(tokens) != 3:
            raise ModelFormatError(f"line {lineno}: expected '<src> <label> <dst>'")
        src = state(tokens[0], lineno)
        dst = state(tokens[2], lineno)
        label = tokens[1]
        if label == TAU_LABEL:
            internal[src][dst] = alphabet.full_mask
        elif label in alphabet:
            visible[src][dst] |= 1 << alphabet.index(label)
        else:
            raise ModelFormatError(f"line {lineno}: unknown label {label!r}")

    one = alphabet.full_mask
    return Lts(
        alphabet=alphabet,
        initial=ActionMatrix(alphabet, (tuple(one if i == init else 0 for i in range(n)),)),
        visible=ActionMatrix(alphabet, tuple(tuple(r) for r in visible)),
        internal=ActionMatrix(alphabet, tuple(tuple(r) for r in internal)),
        terminating=ActionMatrix(alphabet, tuple((one,) if i in term else (0,) for i in range(n))),
    )


def format_lts(lts: Lts) -> str:
    """Canonical text form; parse/format round-trips exactly."""
    n = lts.num_states
    lines = [
        f"lts {n}",
        "alphabet " + " ".join(lts.alphabet.names),
        f"init {lts.initial_state}",
        ("term " + " ".join(str(i) for i in range(n) if lts.terminating.mask_at(i, 0))).rstrip(),
    ]
    n_labels = lts.alphabet.size
    edges = []
    for i in range(n):
        for j in range(n):
            mask = lts.visible.mask_at(i, j)
            for b in range(n_labels):
                if mask >> b & 1:
                    edges.append((i, j, b))
            if lts.internal.mask_at(i, j):
                edges.append((i, j, n_labels))
    for i, j, b in sorted(edges):
        label = TAU_LABEL if b == n_labels else lts.alphabet.names[b]
        lines.append(f"{i} {label} {j}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Bisimulation checks
# ---------------------------------------------------------------------------


def _require_collector_for(lts: Lts, v: ActionMatrix) -> None:
    if v.alphabet != lts.alphabet:
        raise ValueError("collector must share the system alphabet")
    if v.rows != lts.num_states:
        raise ValueError(f"collector has {v.rows} rows for a {lts.num_states}-state system")
    require_bool_collector(v)


def _require_distributor_for(v: ActionMatrix, u: ActionMatrix) -> None:
    if u.shape != (v.cols, v.rows):
        raise ValueError("distributor shape must be the collector's transpose shape")
    if u @ v != ActionMatrix.identity(v.alphabet, v.cols):
        raise ValueError("UV = I fails: not a distributor")
    if any(not any(row) or _or_row(row) != v.alphabet.full_mask for row in u.data):
        raise ValueError("U1 = 1 fails: not a distributor")


def _or_row(row: tuple[int, ...]) -> int:
    acc = 0
    for m in row:
        acc |= m
    return acc


def _equality_witness(lhs: ActionMatrix, rhs: ActionMatrix) -> Witness | None:
    pos = first_difference(lhs, rhs)
    if pos is None:
        return None
    i, j = pos
    alph = lhs.alphabet
    return Witness(i, j, alph.labels_of(lhs.mask_at(i, j)), alph.labels_of(rhs.mask_at(i, j)))


def _check_saturated(kind: str, v: ActionMatrix, u: ActionMatrix, conditions) -> CheckReport:
    """Verify ``V (U X) = X`` for each named condition matrix X."""
    for name, x in conditions:
        w = _equality_witness(v @ (u @ x), x)
        if w is not None:
            return CheckReport(kind, False, name, w)
    return CheckReport(kind, True)


def check_strong_lts(lts: Lts, v: ActionMatrix, *, distributor: ActionMatrix | None = None) -> CheckReport:
    """Strong bisimulation check; internal steps are treated as ordinary."""
    _require_collector_for(lts, v)
    u = distributor if distributor is not None else v.transpose()
    if distributor is not None:
        _require_distributor_for(v, u)
    return _check_saturated(
        "strong",
        v,
        u,
        (
            ("VUρ = ρ", lts.terminating),
            ("VUAV = AV", lts.visible @ v),
            ("VUSV = SV", lts.internal @ v),
        ),
    )


def check_weak_lts(
    lts: Lts,
    v: ActionMatrix,
    *,
    strict_middle: bool = False,
    distributor: ActionMatrix | None = None,
) -> CheckReport:
    """Weak bisimulation check through the internal closure.

    The default middle condition saturates the closed visible part
    (``VUΠAΠV = ΠAΠV``).  ``strict_middle`` switches to the literal variant
    ``VUΠAΠV = ΠV``, kept for comparison.
    """
    _require_collector_for(lts, v)
    u = distributor if distributor is not None else v.transpose()
    if distributor is not None:
        _require_distributor_for(v, u)
    pi = rt_closure(lts.internal)
    papiv = pi @ lts.visible @ pi @ v
    for name, x in (("VUΠρ = Πρ", pi @ lts.terminating), ("VUΠV = ΠV", pi @ v)):
        w = _equality_witness(v @ (u @ x), x)
        if w is not None:
            return CheckReport("weak", False, name, w)
    if strict_middle:
        w = _equality_witness(v @ (u @ papiv), pi @ v)
        name = "VUΠAΠV = ΠV"
    else:
        w = _equality_witness(v @ (u @ papiv), papiv)
        name = "VUΠAΠV = ΠAΠV"
    if w is not None:
        return CheckReport("weak", False, name, w)
    return CheckReport("weak", True)


def branching_closure(lts: Lts, v: ActionMatrix) -> ActionMatrix:
    """Closure of the internal steps restricted to same-class pairs."""
    return rt_closure(lts.internal.meet(v @ v.transpose()))


def check_branching_lts(lts: Lts, v: ActionMatrix, *, distributor: ActionMatrix | None = None) -> CheckReport:
    """Branching bisimulation check; the closure depends on the partition."""
    _require_collector_for(lts, v)
    u = distributor if distributor is not None else v.transpose()
    if distributor is not None:
        _require_distributor_for(v, u)
    pi_v = branching_closure(lts, v)
    eye = ActionMatrix.identity(lts.alphabet, lts.num_states)
    return _check_saturated(
        "branching",
        v,
        u,
        (
            ("VUΠ_V ρ = Π_V ρ", pi_v @ lts.terminating),
            ("VU(I + Π_V S)V = (I + Π_V S)V", (eye + pi_v @ lts.internal) @ v),
            ("VUΠ_V AV = Π_V AV", pi_v @ lts.visible @ v),
        ),
    )


def check_strong_relational(lts: Lts, v: ActionMatrix) -> CheckReport:
    """Strong check via the relation ``R = V Vᵀ``; cross-validates the
    saturation form (``RA ≤ AR`` plus the analogous internal and
    termination inequalities)."""
    _require_collector_for(lts, v)
    r = v @ v.transpose()
    conditions = (
        ("Rρ ≤ ρ", r @ lts.terminating, lts.terminating),
        ("RA ≤ AR", r @ lts.visible, lts.visible @ r),
        ("RS ≤ SR", r @ lts.internal, lts.internal @ r),
    )
    for name, lhs, rhs in conditions:
        if not lhs <= rhs:
            w = _first_inclusion_failure(lhs, rhs)
            return CheckReport("strong-relational", False, name, w)
    return CheckReport("strong-relational", True)


def _first_inclusion_failure(lhs: ActionMatrix, rhs: ActionMatrix) -> Witness:
    for i in range(lhs.rows):
        for j in range(lhs.cols):
            a, b = lhs.mask_at(i, j), rhs.mask_at(i, j)
            if a | b != b:
                alph = lhs.alphabet
                return Witness(i, j, alph.labels_of(a), alph.labels_of(b))
    raise AssertionError("no inclusion failure found")


# ---------------------------------------------------------------------------
# Quotients and closure
# ---------------------------------------------------------------------------


def _checked(report: CheckReport) -> None:
    if not report.passed:
        raise CheckFailed(report)


def lump_strong_lts(lts: Lts, v: ActionMatrix, *, distributor: ActionMatrix | None = None) -> Lts:
    """Quotient by a strong bisimulation; independent of the distributor."""
    _checked(check_strong_lts(lts, v, distributor=distributor))
    u = distributor if distributor is not None else v.transpose()
    return Lts(
        alphabet=lts.alphabet,
        initial=lts.initial @ v,
        visible=u @ lts.visible @ v,
        internal=u @ lts.internal @ v,
        terminating=u @ lts.terminating,
    )


def _lump_transpose(lts: Lts, v: ActionMatrix) -> Lts:
    u = v.transpose()
    return Lts(
        alphabet=lts.alphabet,
        initial=lts.initial @ v,
        visible=u @ lts.visible @ v,
        internal=u @ lts.internal @ v,
        terminating=u @ lts.terminating,
    )


def lump_weak_lts(lts: Lts, v: ActionMatrix, *, strict_middle: bool = False) -> Lts:
    """Quotient by a weak bisimulation.

    Unlike the strong case the result depends on the distributor; this
    fixes the transpose.
    """
    _checked(check_weak_lts(lts, v, strict_middle=strict_middle))
    return _lump_transpose(lts, v)


def lump_branching_lts(lts: Lts, v: ActionMatrix) -> Lts:
    """Quotient by a branching bisimulation (transpose distributor)."""
    _checked(check_branching_lts(lts, v))
    return _lump_transpose(lts, v)


def tau_closure(lts: Lts) -> Lts:
    """System closed under internal-step sequences.

    Visible part becomes ΠAΠ, the internal part the closure Π itself, and
    termination is pulled back along internal paths.
    """
    pi = rt_closure(lts.internal)
    return Lts(
        alphabet=lts.alphabet,
        initial=lts.initial,
        visible=pi @ lts.visible @ pi,
        internal=pi,
        terminating=pi @ lts.terminating,
    )


# ---------------------------------------------------------------------------
# Identity and diagram verifiers
# ---------------------------------------------------------------------------


def verify_closure_identities(lts: Lts, v: ActionMatrix) -> bool:
    """Check ``VᵀΠV = (VᵀSV)*`` and ``ΠVVᵀ = ΠVVᵀΠ``.

    Both hold whenever the weak check passes.  The first compares the
    pulled-down closure with the closure of the pulled-down internal
    matrix; for arbitrary collectors it can fail, because the class-level
    closure may connect classes that no state-level internal path connects.
    """
    _require_collector_for(lts, v)
    u = v.transpose()
    pi = rt_closure(lts.internal)
    first = u @ pi @ v == rt_closure(u @ lts.internal @ v)
    pvv = pi @ v @ u
    second = pvv == pvv @ pi
    return first and second


def verify_weak_commutation(lts: Lts, v: ActionMatrix) -> bool:
    """Closing internal steps and lumping commute for weak bisimulations.

    Compares the closure of the lumped system against the lump of the
    closed system on the visible part and on termination.  Requires the
    weak check to pass.
    """
    _checked(check_weak_lts(lts, v))
    u = v.transpose()
    pi = rt_closure(lts.internal)
    lumped_closure = rt_closure(u @ lts.internal @ v)
    visible_ok = (
        lumped_closure @ (u @ lts.visible @ v) @ lumped_closure
        == u @ (pi @ lts.visible @ pi) @ v
    )
    term_ok = lumped_closure @ (u @ lts.terminating) == u @ (pi @ lts.terminating)
    return visible_ok and term_ok


def verify_branching_commutation(lts: Lts, v: ActionMatrix) -> bool:
    """Same commutation statement for branching bisimulations.

    The three equalities compare the branching-lumped system against the
    quotient of the class-restricted closure.  Requires the branching
    check to pass.
    """
    _checked(check_branching_lts(lts, v))
    u = v.transpose()
    n = lts.num_states
    eye_n = ActionMatrix.identity(lts.alphabet, n)
    eye_cls = ActionMatrix.identity(lts.alphabet, v.cols)
    keep = rt_closure(lts.internal).meet(v @ u)  # S* restricted to class pairs
    internal_ok = eye_cls + u @ lts.internal @ v == u @ (keep @ (eye_n + lts.internal)) @ v
    visible_ok = u @ lts.visible @ v == u @ (keep @ lts.visible) @ v
    term_ok = u @ lts.terminating == u @ (keep @ lts.terminating)
    return internal_ok and visible_ok and term_ok


# ---------------------------------------------------------------------------
# Hooks for the coarsest-partition engine
# ---------------------------------------------------------------------------


def check_lts(lts: Lts, v: ActionMatrix, kind: str, *, strict_middle: bool = False) -> CheckReport:
    if kind == "strong":
        return check_strong_lts(lts, v)
    if kind == "weak":
        return check_weak_lts(lts, v, strict_middle=strict_middle)
    if kind == "branching":
        return check_branching_lts(lts, v)
    raise ValueError(f"unknown kind {kind!r}")


def partition_checker(kind: str, *, strict_middle: bool = False) -> Callable[[Lts, Partition], CheckReport]:
    def checker(lts: Lts, p: Partition) -> CheckReport:
        return check_lts(lts, p.collector_bool(lts.alphabet), kind, strict_middle=strict_middle)

    return checker


def refinement_signatures(lts: Lts, kind: str) -> Callable[[Partition], list]:
    """Per-state signature rows whose block-constancy is the check."""
    if kind == "strong":

        def signatures(p: Partition) -> list:
            v = p.collector_bool(lts.alphabet)
            av = lts.visible @ v
            sv = lts.internal @ v
            return [
                (av.data[i], sv.data[i], lts.terminating.data[i][0])
                for i in range(lts.num_states)
            ]

        return signatures

    if kind == "weak":
        pi = rt_closure(lts.internal)
        closed_visible = pi @ lts.visible @ pi
        closed_term = pi @ lts.terminating

        def signatures(p: Partition) -> list:
            v = p.collector_bool(lts.alphabet)
            pv = pi @ v
            pav = closed_visible @ v
            return [
                (pv.data[i], pav.data[i], closed_term.data[i][0])
                for i in range(lts.num_states)
            ]

        return signatures

    if kind == "branching":
        eye = ActionMatrix.identity(lts.alphabet, lts.num_states)

        def signatures(p: Partition) -> list:
            v = p.collector_bool(lts.alphabet)
            pi_v = branching_closure(lts, v)
            taus = (eye + pi_v @ lts.internal) @ v
            acts = pi_v @ lts.visible @ v
            term = pi_v @ lts.terminating
            return [
                (taus.data[i], acts.data[i], term.data[i][0])
                for i in range(lts.num_states)
            ]

        return signatures

    raise ValueError(f"unknown kind {kind!r}")


def derived_matrices(lts: Lts, v: ActionMatrix, kind: str) -> dict[str, ActionMatrix]:
    """Matrices a check derives; used for report checksums."""
    if kind == "strong":
        return {"AV": lts.visible @ v, "SV": lts.internal @ v}
    if kind == "weak":
        pi = rt_closure(lts.internal)
        return {"Π": pi, "ΠAΠV": pi @ lts.visible @ pi @ v, "Πρ": pi @ lts.terminating}
    if kind == "branching":
        pi_v = branching_closure(lts, v)
        return {"Π_V": pi_v, "Π_V AV": pi_v @ lts.visible @ v, "Π_V ρ": pi_v @ lts.terminating}
    raise ValueError(f"unknown kind {kind!r}")
