"""Markov reward chains, with and without fast (instantaneous-in-the-limit)
transitions: transient analysis by uniformization, ordinary/weak/branching
lumping checks, ergodic projections, limit chains, and the distributor
certification needed for weak lumping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .algebra import (
    DEFAULT_ATOL,
    SingularMatrixError,
    first_real_mismatch,
    max_abs_diff,
    real_matrix,
    solve_linear,
)
from .partition import (
    CheckFailed,
    CheckReport,
    ModelFormatError,
    Partition,
    Witness,
    canonical_distributor_real,
    content_lines,
    require_real_collector,
)

#: Truncate the uniformization series once this much Poisson mass is covered.
UNIFORMIZATION_MASS = 1e-12

#: Rates at or below this are structurally absent for the ergodic projection.
EDGE_TOL = 1e-12

_SERIES_LIMIT = 64.0


class GeneratorError(ValueError):
    """Matrix is not a rate generator (negative rate or bad row sum)."""


class DistributorError(ValueError):
    """A distributor candidate failed its certification."""


def validate_generator(q, *, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Check generator shape and return a cleaned copy.

    Off-diagonal entries in ``[-atol, 0)`` are clamped to zero and the
    diagonal is recomputed as the negated off-diagonal row sum, so the
    result has exact zero row sums.
    """
    q = real_matrix(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise GeneratorError("generator must be square")
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    bad = np.argwhere(off < -atol)
    if bad.size:
        i, j = map(int, bad[0])
        raise GeneratorError(f"row {i}: negative rate {q[i, j]!r} to state {j}")
    sums = q.sum(axis=1)
    worst = int(np.argmax(np.abs(sums)))
    if abs(sums[worst]) > atol:
        raise GeneratorError(f"row {worst}: row sum {sums[worst]!r} exceeds tolerance")
    off = np.clip(off, 0.0, None)
    np.fill_diagonal(off, -off.sum(axis=1))
    return off


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _validated_sigma(sigma, n: int, atol: float) -> np.ndarray:
    sigma = real_matrix(sigma).reshape(-1)
    if sigma.shape != (n,):
        raise ValueError(f"initial vector must have {n} entries")
    if np.any(sigma < -atol):
        raise ValueError("negative initial probability")
    sigma = np.clip(sigma, 0.0, None)
    if abs(sigma.sum() - 1.0) > atol:
        raise ValueError(f"initial probabilities sum to {sigma.sum()!r}, not 1")
    return sigma


@dataclass(frozen=True, eq=False)
class Mrc:
    """Reward chain (initial distribution, generator, reward rates)."""

    sigma: np.ndarray
    q: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        q = validate_generator(self.q)
        n = q.shape[0]
        sigma = _validated_sigma(self.sigma, n, DEFAULT_ATOL)
        rho = real_matrix(self.rho).reshape(-1)
        if rho.shape != (n,):
            raise ValueError(f"reward vector must have {n} entries")
        object.__setattr__(self, "sigma", _freeze(sigma))
        object.__setattr__(self, "q", _freeze(q))
        object.__setattr__(self, "rho", _freeze(rho))

    @property
    def num_states(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True, eq=False)
class MrcFast:
    """Reward chain with separate slow and fast generators.

    The full rate matrix is the slow part plus the fast part scaled by a
    speed parameter that is taken to infinity in the limit analyses.
    """

    sigma: np.ndarray
    qs: np.ndarray
    qf: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        qs = validate_generator(self.qs)
        qf = validate_generator(self.qf)
        n = qs.shape[0]
        if qf.shape != (n, n):
            raise ValueError("slow and fast generators must agree in size")
        sigma = _validated_sigma(self.sigma, n, DEFAULT_ATOL)
        rho = real_matrix(self.rho).reshape(-1)
        if rho.shape != (n,):
            raise ValueError(f"reward vector must have {n} entries")
        object.__setattr__(self, "sigma", _freeze(sigma))
        object.__setattr__(self, "qs", _freeze(qs))
        object.__setattr__(self, "qf", _freeze(qf))
        object.__setattr__(self, "rho", _freeze(rho))

    @property
    def num_states(self) -> int:
        return self.qs.shape[0]


def as_fast_chain(model: Mrc | MrcFast) -> MrcFast:
    if isinstance(model, MrcFast):
        return model
    n = model.num_states
    return MrcFast(model.sigma, model.q, np.zeros((n, n)), model.rho)


def as_plain_chain(model: Mrc | MrcFast) -> Mrc:
    if isinstance(model, Mrc):
        return model
    if np.any(model.qf != 0.0):
        raise ValueError("chain has fast transitions; no plain form")
    return Mrc(model.sigma, model.qs, model.rho)


# ---------------------------------------------------------------------------
# Transient analysis
# ---------------------------------------------------------------------------


def transition_matrix(q, t: float, *, atol: float = DEFAULT_ATOL, require_generator: bool = True) -> np.ndarray:
    """Matrix exponential ``e^(q t)`` by uniformization.

    Poisson-weighted powers of ``I + q/Λ`` are summed until the cumulative
    Poisson mass reaches ``1 - UNIFORMIZATION_MASS``.  Long horizons are
    split in half and squared so the series argument stays small.  With
    ``require_generator`` off the same series is used for matrices with
    zero row sums but possibly negative off-diagonal entries (limit-chain
    evaluation); the rearrangement is exact for any square matrix.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if require_generator:
        q = validate_generator(q, atol=atol)
        lam = float(np.max(np.abs(np.diag(q)))) if q.size else 0.0
    else:
        q = real_matrix(q)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("matrix must be square")
        lam = float(np.max(np.sum(np.abs(q), axis=1)))
    n = q.shape[0]
    if t == 0.0 or lam == 0.0:
        return np.eye(n)

    splits = 0
    horizon = t
    while lam * horizon > _SERIES_LIMIT:
        horizon /= 2.0
        splits += 1

    p = np.eye(n) + q / lam
    weight = math.exp(-lam * horizon)
    total = weight
    acc = weight * np.eye(n)
    power = np.eye(n)
    k = 0
    while total < 1.0 - UNIFORMIZATION_MASS:
        k += 1
        power = power @ p
        weight *= lam * horizon / k
        acc += weight * power
        total += weight

    for _ in range(splits):
        acc = acc @ acc
    return acc


def total_reward(model: Mrc, t: float) -> float:
    """Expected reward rate at time ``t``: initial @ P(t) @ rewards."""
    return float(model.sigma @ transition_matrix(model.q, t) @ model.rho)


# ---------------------------------------------------------------------------
# Check helpers
# ---------------------------------------------------------------------------


def _require_collector_for(n: int, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    require_real_collector(v)
    if v.shape[0] != n:
        raise ValueError(f"collector has {v.shape[0]} rows for a {n}-state chain")
    return v


def _distributor_for(v: np.ndarray, distributor, atol: float) -> np.ndarray:
    if distributor is None:
        return canonical_distributor_real(v)
    u = real_matrix(distributor)
    if u.shape != (v.shape[1], v.shape[0]):
        raise ValueError("distributor shape must be collector transposed")
    if max_abs_diff(u @ v, np.eye(v.shape[1])) > atol:
        raise ValueError("UV = I fails: not a distributor")
    if float(np.max(np.abs(u.sum(axis=1) - 1.0))) > atol:
        raise ValueError("U1 = 1 fails: not a distributor")
    return u


def _check_saturated(kind: str, v: np.ndarray, u: np.ndarray, conditions, atol: float) -> CheckReport:
    for name, x in conditions:
        lhs = v @ (u @ x)
        bad = first_real_mismatch(lhs, x, atol)
        if bad is not None:
            i, j, lv, rv = bad
            return CheckReport(kind, False, name, Witness(i, j, lv, rv, abs(lv - rv)))
    return CheckReport(kind, True)


def check_strong_mrc(model: Mrc | MrcFast, v, atol: float = DEFAULT_ATOL, *, distributor=None) -> CheckReport:
    """Ordinary-lumping check.

    On a chain with fast transitions both generators are constrained, in the
    same way the strong transition-system check constrains visible and
    internal steps separately.
    """
    v = _require_collector_for(model.num_states, v)
    u = _distributor_for(v, distributor, atol)
    rho = model.rho.reshape(-1, 1)
    if isinstance(model, MrcFast):
        conditions = (
            ("VUρ = ρ", rho),
            ("VUQsV = QsV", model.qs @ v),
            ("VUQfV = QfV", model.qf @ v),
        )
    else:
        conditions = (("VUρ = ρ", rho), ("VUQV = QV", model.q @ v))
    return _check_saturated("strong", v, u, conditions, atol)


def lump_strong_mrc(model: Mrc | MrcFast, v, atol: float = DEFAULT_ATOL, *, distributor=None):
    """Quotient chain under ordinary lumping; distributor choice is immaterial."""
    report = check_strong_mrc(model, v, atol, distributor=distributor)
    if not report.passed:
        raise CheckFailed(report)
    v = _require_collector_for(model.num_states, v)
    u = _distributor_for(v, distributor, atol)
    if isinstance(model, MrcFast):
        return MrcFast(model.sigma @ v, u @ model.qs @ v, u @ model.qf @ v, u @ model.rho)
    return Mrc(model.sigma @ v, u @ model.q @ v, u @ model.rho)


# ---------------------------------------------------------------------------
# Ergodic projection
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ErgodicProjection:
    """Long-run occupation operator of a fast generator.

    ``pi`` is stochastic and idempotent, annihilates the generator on both
    sides, and its rows mix the stationary vectors of the recurrent classes
    according to trapping probabilities.
    """

    pi: np.ndarray
    recurrent_classes: tuple[tuple[int, ...], ...]
    transient: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pi", _freeze(real_matrix(self.pi)))


def ergodic_projection(qf, *, atol: float = DEFAULT_ATOL, edge_tol: float = EDGE_TOL) -> ErgodicProjection:
    """Structural long-run projection of a generator.

    Recurrent classes are the strongly connected components without outgoing
    rates; each gets a stationary vector, transient states get trapping
    probabilities, and rows are assembled from those pieces.  Rates at or
    below ``edge_tol`` do not count as edges, which keeps numerically-zero
    generators (such as certified lumped fast parts) structurally still.
    """
    q = validate_generator(qf, atol=atol)
    n = q.shape[0]
    adj = q > edge_tol
    np.fill_diagonal(adj, False)
    n_comp, labels = connected_components(csr_matrix(adj), directed=True, connection="strong")
    comp_states = [np.flatnonzero(labels == c) for c in range(n_comp)]
    has_exit = [False] * n_comp
    for i, j in zip(*np.nonzero(adj)):
        if labels[i] != labels[j]:
            has_exit[labels[i]] = True
    rec_comps = sorted(
        (c for c in range(n_comp) if not has_exit[c]), key=lambda c: int(comp_states[c][0])
    )
    recurrent = tuple(tuple(int(s) for s in comp_states[c]) for c in rec_comps)
    rec_set = {s for cls in recurrent for s in cls}
    transient = tuple(s for s in range(n) if s not in rec_set)

    pi = np.zeros((n, n))
    stationary = []
    for cls in recurrent:
        idx = list(cls)
        if len(idx) == 1:
            mu = np.ones(1)
        else:
            a = q[np.ix_(idx, idx)].T.copy()
            a[-1, :] = 1.0
            b = np.zeros(len(idx))
            b[-1] = 1.0
            mu = solve_linear(a, b)
            mu = np.clip(mu, 0.0, None)
            mu /= mu.sum()
        stationary.append(mu)
        for s in idx:
            pi[s, idx] = mu

    if transient:
        tr = list(transient)
        a_tt = q[np.ix_(tr, tr)]
        b = np.column_stack([-q[np.ix_(tr, list(cls))].sum(axis=1) for cls in recurrent])
        trap = solve_linear(a_tt, b).reshape(len(tr), len(recurrent))
        trap = np.clip(trap, 0.0, None)
        trap /= trap.sum(axis=1, keepdims=True)
        for row, s in enumerate(tr):
            for k, cls in enumerate(recurrent):
                pi[s, list(cls)] += trap[row, k] * stationary[k]

    return ErgodicProjection(pi, recurrent, transient)


# ---------------------------------------------------------------------------
# Weak bisimulation and the certified distributor
# ---------------------------------------------------------------------------


def check_weak_mrc(model: Mrc | MrcFast, v, atol: float = DEFAULT_ATOL) -> CheckReport:
    """Weak check: conditions on the projection-smoothed chain."""
    fast = as_fast_chain(model)
    v = _require_collector_for(fast.num_states, v)
    u = canonical_distributor_real(v)
    pi = ergodic_projection(fast.qf, atol=atol).pi
    conditions = (
        ("VUΠρ = Πρ", pi @ fast.rho.reshape(-1, 1)),
        ("VUΠV = ΠV", pi @ v),
        ("VUΠQsΠV = ΠQsΠV", pi @ fast.qs @ pi @ v),
    )
    return _check_saturated("weak", v, u, conditions, atol)


def tau_distributor_residuals(model: Mrc | MrcFast, v, w, *, atol: float = DEFAULT_ATOL) -> dict[str, float]:
    """Residuals of the four distributor-certification identities.

    An invalid lumped fast generator shows up as an infinite residual on
    the projection identity.
    """
    fast = as_fast_chain(model)
    v = _require_collector_for(fast.num_states, v)
    w = real_matrix(w)
    if w.shape != (v.shape[1], v.shape[0]):
        raise ValueError("distributor shape must be collector transposed")
    pi = ergodic_projection(fast.qf, atol=atol).pi
    pvw = pi @ v @ w
    out = {
        "W1 = 1": float(np.max(np.abs(w.sum(axis=1) - 1.0))),
        "WV = I": max_abs_diff(w @ v, np.eye(v.shape[1])),
        "ΠVW = ΠVWΠ": max_abs_diff(pvw, pvw @ pi),
    }
    try:
        proj_hat = ergodic_projection(w @ fast.qf @ v, atol=atol).pi
        out["proj(WQfV) = WΠV"] = max_abs_diff(proj_hat, w @ pi @ v)
    except GeneratorError:
        out["proj(WQfV) = WΠV"] = math.inf
    return out


def default_tau_distributor(model: Mrc | MrcFast, v, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """Distributor candidate ``(UΠV)^-1 UΠ`` with mandatory certification.

    Requires a passing weak check.  Raises :class:`DistributorError` when
    the class-level projection ``UΠV`` is singular to tolerance or when any
    certification identity misses; callers may then supply an external
    distributor instead.
    """
    fast = as_fast_chain(model)
    report = check_weak_mrc(fast, v, atol)
    if not report.passed:
        raise CheckFailed(report)
    v = _require_collector_for(fast.num_states, v)
    u = canonical_distributor_real(v)
    pi = ergodic_projection(fast.qf, atol=atol).pi
    try:
        w = solve_linear(u @ pi @ v, u @ pi)
    except SingularMatrixError as exc:
        raise DistributorError(
            "class-level projection UΠV is singular to tolerance; supply an external distributor"
        ) from exc
    residuals = tau_distributor_residuals(fast, v, w, atol=atol)
    name, worst = max(residuals.items(), key=lambda kv: kv[1])
    if worst > atol:
        raise DistributorError(f"candidate distributor failed certification: {name} residual {worst:g}")
    return w


def lump_weak_mrc(model: Mrc | MrcFast, v, w=None, *, atol: float = DEFAULT_ATOL) -> MrcFast:
    """Quotient chain under weak lumping with a certified distributor."""
    fast = as_fast_chain(model)
    report = check_weak_mrc(fast, v, atol)
    if not report.passed:
        raise CheckFailed(report)
    v = _require_collector_for(fast.num_states, v)
    if w is None:
        w = default_tau_distributor(fast, v, atol)
    else:
        w = real_matrix(w)
        residuals = tau_distributor_residuals(fast, v, w, atol=atol)
        name, worst = max(residuals.items(), key=lambda kv: kv[1])
        if worst > atol:
            raise DistributorError(f"supplied distributor failed certification: {name} residual {worst:g}")
    try:
        qs_hat = validate_generator(w @ fast.qs @ v, atol=atol)
        qf_hat = validate_generator(w @ fast.qf @ v, atol=atol)
    except GeneratorError as exc:
        raise DistributorError(f"lumped generator invalid: {exc}") from exc
    return MrcFast(fast.sigma @ v, qs_hat, qf_hat, w @ fast.rho)


# ---------------------------------------------------------------------------
# Limit chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LimitChain:
    """Discontinuous chain reached when fast transitions become instant.

    ``transition(t)`` equals the projection at ``t = 0`` (not the identity),
    which is the discontinuity.
    """

    pi: np.ndarray
    slow: np.ndarray  # projection-smoothed slow generator
    sigma: np.ndarray
    rho: np.ndarray
    projection: ErgodicProjection

    @property
    def num_states(self) -> int:
        return self.pi.shape[0]

    def transition(self, t: float) -> np.ndarray:
        return self.pi @ transition_matrix(self.slow, t, require_generator=False)


def limit_chain(model: Mrc | MrcFast, *, atol: float = DEFAULT_ATOL) -> LimitChain:
    """Limit of the chain as the fast-transition speed goes to infinity.

    The smoothed slow part has zero row sums but is a generator only after
    aggregation onto the recurrent classes; that restriction is validated
    here.
    """
    fast = as_fast_chain(model)
    proj = ergodic_projection(fast.qf, atol=atol)
    slow = proj.pi @ fast.qs @ proj.pi
    classes = proj.recurrent_classes
    agg = np.empty((len(classes), len(classes)))
    for i, cls in enumerate(classes):
        row = slow[cls[0]]
        for j, other in enumerate(classes):
            agg[i, j] = row[list(other)].sum()
    try:
        validate_generator(agg, atol=max(atol, 1e-12) * max(1, fast.num_states))
    except GeneratorError as exc:
        raise GeneratorError(f"limit generator restricted to recurrent classes is invalid: {exc}") from exc
    return LimitChain(proj.pi, _freeze(slow), fast.sigma, fast.rho, proj)


def check_strong_discontinuous(limit: LimitChain, v, atol: float = DEFAULT_ATOL) -> CheckReport:
    """Ordinary-lumping check on a discontinuous limit chain.

    The projection itself must be class-saturated, in addition to the
    smoothed slow part and rewards.
    """
    v = _require_collector_for(limit.num_states, v)
    u = canonical_distributor_real(v)
    conditions = (
        ("VUΠρ = Πρ", limit.pi @ limit.rho.reshape(-1, 1)),
        ("VUΠV = ΠV", limit.pi @ v),
        ("VU(ΠQsΠ)V = (ΠQsΠ)V", limit.slow @ v),
    )
    return _check_saturated("strong-discontinuous", v, u, conditions, atol)


def verify_limit_commutation(
    model: Mrc | MrcFast,
    v,
    w=None,
    times: Sequence[float] = (0.0, 0.5, 1.0, 2.0),
    *,
    atol: float = DEFAULT_ATOL,
    tolerance: float | None = None,
) -> bool:
    """Taking the fast-speed limit and lumping commute.

    Compares, at each sample time, the limit transition matrix of the
    lumped chain against the lumped limit transition matrix of the original
    chain (both class-level).  Requires a passing weak check and a
    certified distributor.
    """
    fast = as_fast_chain(model)
    tol = 10.0 * atol if tolerance is None else tolerance
    report = check_weak_mrc(fast, v, atol)
    if not report.passed:
        raise CheckFailed(report)
    v = _require_collector_for(fast.num_states, v)
    if w is None:
        w = default_tau_distributor(fast, v, atol)
    else:
        w = real_matrix(w)
        residuals = tau_distributor_residuals(fast, v, w, atol=atol)
        name, worst = max(residuals.items(), key=lambda kv: kv[1])
        if worst > atol:
            raise DistributorError(f"supplied distributor failed certification: {name} residual {worst:g}")
    limit = limit_chain(fast, atol=atol)
    qf_hat = validate_generator(w @ fast.qf @ v, atol=atol)
    proj_hat = ergodic_projection(qf_hat, atol=atol).pi
    g_hat = proj_hat @ (w @ fast.qs @ v) @ proj_hat
    for t in times:
        if t < 0:
            raise ValueError("times must be nonnegative")
        lumped_limit = proj_hat @ transition_matrix(g_hat, t, require_generator=False)
        limit_lumped = w @ limit.transition(t) @ v
        if max_abs_diff(lumped_limit, limit_lumped) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Branching bisimulation
# ---------------------------------------------------------------------------


def adapt_diagonal(qf, v) -> np.ndarray:
    """Restrict fast rates to same-class pairs, repairing the diagonal.

    Cross-class off-diagonal rates are zeroed and each diagonal entry is
    recomputed as the negated sum of the retained rates of its row, the
    minimal change making the restriction a generator again.
    """
    q = validate_generator(qf)
    v = np.asarray(v, dtype=float)
    require_real_collector(v)
    if v.shape[0] != q.shape[0]:
        raise ValueError("collector rows must match generator size")
    keep = q * (v @ v.T)
    np.fill_diagonal(keep, 0.0)
    np.fill_diagonal(keep, -keep.sum(axis=1))
    return keep


def check_branching_mrc(model: Mrc | MrcFast, v, atol: float = DEFAULT_ATOL) -> CheckReport:
    """Branching check: the smoothing projection only follows in-class fast
    steps, so it depends on the candidate partition."""
    fast = as_fast_chain(model)
    v = _require_collector_for(fast.num_states, v)
    u = canonical_distributor_real(v)
    pi_v = ergodic_projection(adapt_diagonal(fast.qf, v), atol=atol).pi
    conditions = (
        ("VUΠ_V ρ = Π_V ρ", pi_v @ fast.rho.reshape(-1, 1)),
        ("VUΠ_V Qf V = Π_V Qf V", pi_v @ fast.qf @ v),
        ("VUΠ_V Qs V = Π_V Qs V", pi_v @ fast.qs @ v),
    )
    return _check_saturated("branching", v, u, conditions, atol)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def parse_mrc(text: str, *, atol: float = DEFAULT_ATOL) -> Mrc | MrcFast:
    """Parse the line-oriented chain format.

    Header: ``mrc <n>``, ``init <i>:<p> ...``, ``reward <r0> ... <r_n-1>``,
    then ``rate <src> <dst> <value>`` (slow) and ``fast <src> <dst> <value>``
    lines.  Diagonals are derived; self-rates are rejected; parallel rate
    lines accumulate.  Without any ``fast`` line the result is a plain chain.
    """
    lines = content_lines(text)
    if len(lines) < 3:
        raise ModelFormatError("expected header lines: mrc, init, reward")
    (ln0, h0), (ln1, h1), (ln2, h2) = lines[:3]
    if h0[0] != "mrc" or len(h0) != 2:
        raise ModelFormatError(f"line {ln0}: expected 'mrc <n>'")
    try:
        n = int(h0[1])
    except ValueError:
        raise ModelFormatError(f"line {ln0}: state count must be an integer") from None
    if n < 1:
        raise ModelFormatError(f"line {ln0}: need at least one state")

    def state(token: str, lineno: int) -> int:
        try:
            i = int(token)
        except ValueError:
            raise ModelFormatError(f"line {lineno}: state index must be an integer, got {token!r}") from None
        if not 0 <= i < n:
            raise ModelFormatError(f"line {lineno}: state {i} out of range 0..{n - 1}")
        return i

    def number(token: str, lineno: int, what: str) -> float:
        try:
            x = float(token)
        except ValueError:
            raise ModelFormatError(f"line {lineno}: {what} must be a number, got {token!r}") from None
        if not math.isfinite(x):
            raise ModelFormatError(f"line {lineno}: {what} must be finite")
        return x

    if h1[0] != "init" or len(h1) < 2:
        raise ModelFormatError(f"line {ln1}: expected 'init <state>:<probability> ...'")
    sigma = np.zeros(n)
    seen: set[int] = set()
    for token in h1[1:]:
        if ":" not in token:
            raise ModelFormatError(f"line {ln1}: expected '<state>:<probability>', got {token!r}")
        idx_tok, p_tok = token.split(":", 1)
        i = state(idx_tok, ln1)
        if i in seen:
            raise ModelFormatError(f"line {ln1}: state {i} appears twice in init")
        seen.add(i)
        p = number(p_tok, ln1, "probability")
        if p < 0:
            raise ModelFormatError(f"line {ln1}: negative probability {p!r}")
        sigma[i] = p
    if abs(sigma.sum() - 1.0) > atol:
        raise ModelFormatError(f"line {ln1}: initial probabilities sum to {sigma.sum()!r}, not 1")

    if h2[0] != "reward" or len(h2) != n + 1:
        raise ModelFormatError(f"line {ln2}: expected 'reward' with {n} values")
    rho = np.array([number(tok, ln2, "reward") for tok in h2[1:]])

    qs = np.zeros((n, n))
    qf = np.zeros((n, n))
    saw_fast = False
    for lineno, tokens in lines[3:]:
        if len(tokens) != 4 or tokens[0] not in ("rate", "fast"):
            raise ModelFormatError(f"line {lineno}: expected 'rate|fast <src> <dst> <value>'")
        src = state(tokens[1], lineno)
        dst = state(tokens[2], lineno)
        if src == dst:
            raise ModelFormatError(f"line {lineno}: self-rates are not allowed")
        value = number(tokens[3], lineno, "rate")
        if value < 0:
            raise ModelFormatError(f"line {lineno}: negative rate {value!r}")
        target = qf if tokens[0] == "fast" else qs
        if tokens[0] == "fast":
            saw_fast = True
        target[src, dst] += value

    np.fill_diagonal(qs, -qs.sum(axis=1))
    np.fill_diagonal(qf, -qf.sum(axis=1))
    if saw_fast:
        return MrcFast(sigma, qs, qf, rho)
    return Mrc(sigma, qs, rho)


def format_mrc(model: Mrc | MrcFast) -> str:
    """Canonical text form; parse/format round-trips exactly."""
    fast = isinstance(model, MrcFast)
    n = model.num_states
    lines = [f"mrc {n}"]
    lines.append("init " + " ".join(f"{i}:{float(model.sigma[i])!r}" for i in range(n) if model.sigma[i] != 0.0))
    lines.append("reward " + " ".join(repr(float(r)) for r in model.rho))
    for name, q in (("rate", model.qs if fast else model.q),) + ((("fast", model.qf),) if fast else ()):
        for i in range(n):
            for j in range(n):
                if i != j and q[i, j] != 0.0:
                    lines.append(f"{name} {i} {j} {float(q[i, j])!r}")
    return "\n".join(lines) + "\n"


def parse_distributor(text: str) -> np.ndarray:
    """Parse an explicit distributor: ``dist <N> <n>`` plus N rows of n reals."""
    lines = content_lines(text)
    if not lines or lines[0][1][0] != "dist":
        raise ModelFormatError("distributor files start with 'dist <N> <n>'")
    ln0, header = lines[0]
    if len(header) != 3:
        raise ModelFormatError(f"line {ln0}: expected 'dist <N> <n>'")
    try:
        big_n, n = int(header[1]), int(header[2])
    except ValueError:
        raise ModelFormatError(f"line {ln0}: dimensions must be integers") from None
    if len(lines) - 1 != big_n:
        raise ModelFormatError(f"expected {big_n} rows, found {len(lines) - 1}")
    rows = []
    for lineno, tokens in lines[1:]:
        if len(tokens) != n:
            raise ModelFormatError(f"line {lineno}: expected {n} values")
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            raise ModelFormatError(f"line {lineno}: values must be numbers") from None
    return real_matrix(rows)


# ---------------------------------------------------------------------------
# Hooks for the coarsest-partition engine
# ---------------------------------------------------------------------------


def check_mrc(model: Mrc | MrcFast, v, kind: str, atol: float = DEFAULT_ATOL) -> CheckReport:
    if kind == "strong":
        return check_strong_mrc(model, v, atol)
    if kind == "weak":
        return check_weak_mrc(model, v, atol)
    if kind == "branching":
        return check_branching_mrc(model, v, atol)
    raise ValueError(f"unknown kind {kind!r}")


def partition_checker(kind: str, *, atol: float = DEFAULT_ATOL) -> Callable[[Mrc | MrcFast, Partition], CheckReport]:
    def checker(model, p: Partition) -> CheckReport:
        return check_mrc(model, p.collector_real(), kind, atol)

    return checker


def _cluster_keys(p: Partition, rows: np.ndarray, atol: float) -> list:
    """Per-state keys splitting each block into tolerance-connected row groups."""
    keys: list = [None] * rows.shape[0]
    for bi, block in enumerate(p.blocks):
        members = list(block)
        parent = list(range(len(members)))

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                if np.max(np.abs(rows[members[a]] - rows[members[b]])) <= atol:
                    parent[find(a)] = find(b)
        for idx, s in enumerate(members):
            keys[s] = (bi, find(idx))
    return keys


def refinement_signatures(model: Mrc | MrcFast, kind: str, *, atol: float = DEFAULT_ATOL) -> Callable[[Partition], list]:
    """Per-state signature rows whose block-constancy is the check."""
    fast = as_fast_chain(model)
    rho_col = fast.rho.reshape(-1, 1)

    if kind == "strong":

        def signatures(p: Partition) -> list:
            v = p.collector_real()
            rows = np.hstack([fast.qs @ v, fast.qf @ v, rho_col])
            return _cluster_keys(p, rows, atol)

        return signatures

    if kind == "weak":
        pi = ergodic_projection(fast.qf, atol=atol).pi
        smoothed_slow = pi @ fast.qs @ pi
        smoothed_rho = pi @ rho_col

        def signatures(p: Partition) -> list:
            v = p.collector_real()
            rows = np.hstack([pi @ v, smoothed_slow @ v, smoothed_rho])
            return _cluster_keys(p, rows, atol)

        return signatures

    if kind == "branching":

        def signatures(p: Partition) -> list:
            v = p.collector_real()
            pi_v = ergodic_projection(adapt_diagonal(fast.qf, v), atol=atol).pi
            rows = np.hstack([pi_v @ fast.qf @ v, pi_v @ fast.qs @ v, pi_v @ rho_col])
            return _cluster_keys(p, rows, atol)

        return signatures

    raise ValueError(f"unknown kind {kind!r}")


def derived_matrices(model: Mrc | MrcFast, v, kind: str, *, atol: float = DEFAULT_ATOL) -> dict[str, np.ndarray]:
    """Matrices a check derives; used for report checksums."""
    fast = as_fast_chain(model)
    v = np.asarray(v, dtype=float)
    if kind == "strong":
        return {"QsV": fast.qs @ v, "QfV": fast.qf @ v}
    if kind == "weak":
        pi = ergodic_projection(fast.qf, atol=atol).pi
        return {"Π": pi, "ΠQsΠV": pi @ fast.qs @ pi @ v, "Πρ": pi @ fast.rho.reshape(-1, 1)}
    if kind == "branching":
        pi_v = ergodic_projection(adapt_diagonal(fast.qf, v), atol=atol).pi
        return {"Π_V": pi_v, "Π_V QsV": pi_v @ fast.qs @ v, "Π_V QfV": pi_v @ fast.qf @ v}
    raise ValueError(f"unknown kind {kind!r}")
