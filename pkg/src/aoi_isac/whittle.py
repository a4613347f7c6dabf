"""Relaxed single-arm problem with an idle subsidy and Whittle-type indices.

Adds a fourth action (stay idle, collect subsidy ``w``) to the two-age model,
computes passive sets, probes indexability, and builds per-state priority
indices either exactly (bisection on the subsidy, one dynamic program per
membership test) or approximately (bisection on the diagonal and right
boundary anchors, linear interpolation inside, one relaxed solve per interior
state). The approximate construction also ships its curvature-based error
bound for diagnostic use.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .mdp_core import (
    IDLE,
    AoiState,
    ArmParams,
    age_arrays,
    check_gamma,
    num_states,
    state_index,
    successor_indices,
)
from .single_source import ConvergenceError, ValueTable


class BracketError(RuntimeError):
    """Bracket expansion failed to straddle the passive/active boundary.

    ``fallback`` carries the last probed subsidy, usable as a heuristic score.
    """

    def __init__(self, message: str, fallback: float):
        super().__init__(message)
        self.fallback = fallback


@dataclass
class PassiveSet:
    """States where idling is optimal at a given subsidy (ties count as passive)."""

    membership: np.ndarray
    subsidy: float

    def at(self, s: AoiState) -> bool:
        return bool(self.membership[state_index(s.monitor_age, s.bs_age)])


@dataclass
class IndexTable:
    """Per-state priority index of one subsystem.

    ``active_action`` caches, per state, the minimizing active action of the
    relaxed problem at that state's own subsidy; the online scheduler applies
    it when the state wins a service slot. Outside the guaranteed-indexable
    regime the values are heuristic priority scores (``indexable`` is False).
    """

    index: np.ndarray
    kind: str  # "exact" or "approximate"
    trunc_a: int
    active_action: np.ndarray
    indexable: bool
    eps: float
    bracket_failures: tuple[int, ...] = ()

    def at(self, s: AoiState) -> float:
        return float(self.index[state_index(s.monitor_age, s.bs_age)])


class RelaxedSolver:
    """Four-action value iteration workspace for one (params, gamma) pair.

    The value buffer is retained between ``solve`` calls so nearby subsidies
    warm-start each other; ``reset`` restores the zero initial guess.
    """

    def __init__(self, params: ArmParams, gamma: float, tol: float, max_iter: int = 1_000_000):
        check_gamma(gamma)
        if tol <= 0:
            raise ValueError(f"tol must be positive, got {tol}")
        self.params = params
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.succ = successor_indices(params.trunc_a)
        self.m, _ = age_arrays(params.trunc_a)
        self.v = np.zeros(params.n_states)
        self._stop = tol * (1.0 - gamma) / (2.0 * gamma)

    def reset(self) -> None:
        self.v[:] = 0.0

    def q_values(self, v: np.ndarray, w: float):
        p, g = self.params, self.gamma
        v_up = v[self.succ.up]
        q0 = self.m + p.c0 + g * (p.lam0 * v[self.succ.sense_ok] + (1.0 - p.lam0) * v_up)
        q1 = self.m + p.c1 + g * (p.lam1 * v[self.succ.comm_ok] + (1.0 - p.lam1) * v_up)
        q2 = self.m + p.c2 + g * (p.lam2 * v[self.succ.joint_ok] + (1.0 - p.lam2) * v_up)
        q3 = self.m - w + g * v_up
        return q0, q1, q2, q3

    def solve(self, w: float) -> np.ndarray:
        """Iterate to the fixed point at subsidy ``w``; returns the value buffer."""
        v = self.v
        for _ in range(self.max_iter):
            q0, q1, q2, q3 = self.q_values(v, w)
            tv = np.minimum(np.minimum(q0, q1), np.minimum(q2, q3))
            diff = float(np.max(np.abs(tv - v)))
            v = tv
            if diff <= self._stop:
                self.v = v
                return v
        raise ConvergenceError(
            f"relaxed value iteration at subsidy {w} exceeded {self.max_iter} sweeps"
        )

    def policy(self, v: np.ndarray, w: float) -> np.ndarray:
        """Minimizing action per state; exact ties go to the lowest action number."""
        q = np.stack(self.q_values(v, w))
        return np.argmin(q, axis=0).astype(np.int8)

    def deltas(self, v: np.ndarray, w: float):
        """Active-vs-idle differences (one per active action)."""
        p, g = self.params, self.gamma
        v_up = v[self.succ.up]
        d03 = p.c0 + w - g * p.lam0 * (v_up - v[self.succ.sense_ok])
        d13 = p.c1 + w - g * p.lam1 * (v_up - v[self.succ.comm_ok])
        d23 = p.c2 + w - g * p.lam2 * (v_up - v[self.succ.joint_ok])
        return d03, d13, d23

    def membership(self, w: float, tol_check: float = 1e-8) -> np.ndarray:
        v = self.solve(w)
        d03, d13, d23 = self.deltas(v, w)
        return (d03 >= -tol_check) & (d13 >= -tol_check) & (d23 >= -tol_check)

    def active_argmin(self, v: np.ndarray, w: float, s_idx: int) -> int:
        q0, q1, q2, _ = self.q_values(v, w)
        return int(np.argmin([q0[s_idx], q1[s_idx], q2[s_idx]]))

    def index_update(self, v: np.ndarray) -> np.ndarray:
        """Right-hand side of the index fixed-point relation, evaluated from ``v``."""
        p, g = self.params, self.gamma
        v_up = v[self.succ.up]
        cand = np.stack(
            [
                g * p.lam0 * (v_up - v[self.succ.sense_ok]) - p.c0,
                g * p.lam1 * (v_up - v[self.succ.comm_ok]) - p.c1,
                g * p.lam2 * (v_up - v[self.succ.joint_ok]) - p.c2,
            ]
        )
        return cand.max(axis=0)


def relaxed_value_iteration(
    params: ArmParams,
    gamma: float,
    w: float,
    tol: float = 1e-8,
    max_iter: int = 1_000_000,
    v0: np.ndarray | None = None,
):
    """Solve the subsidized four-action problem at subsidy ``w``.

    Returns the value table and the minimizing policy over {sense, comm,
    joint, idle}, ties resolved toward the lowest action number.
    """
    solver = RelaxedSolver(params, gamma, tol, max_iter)
    if v0 is not None:
        solver.v = np.array(v0, dtype=float)
    v = solver.solve(w)
    pol = solver.policy(v, w)
    return ValueTable(v.copy(), params.trunc_a), pol


def active_idle_differences(values: ValueTable, params: ArmParams, gamma: float, w: float):
    """Active-vs-idle differences computed from a converged relaxed value table."""
    solver = RelaxedSolver(params, gamma, tol=1.0)
    return solver.deltas(values.values, w)


def passive_set(
    params: ArmParams,
    gamma: float,
    w: float,
    tol: float = 1e-8,
    tol_check: float = 1e-8,
    v0: np.ndarray | None = None,
) -> PassiveSet:
    """States where idling is optimal at subsidy ``w``.

    Membership uses the nonnegativity of all three active-vs-idle differences;
    a difference within ``tol_check`` of zero counts as passive.
    """
    solver = RelaxedSolver(params, gamma, tol)
    if v0 is not None:
        solver.v = np.array(v0, dtype=float)
    return PassiveSet(solver.membership(w, tol_check), w)


def indexable_sufficient(params: ArmParams, gamma: float) -> bool:
    """Closed-form sufficient condition for indexability: gamma <= 1/(1+lam1)."""
    check_gamma(gamma)
    return gamma <= 1.0 / (1.0 + params.lam1)


def _bracket_scale(params: ArmParams, gamma: float) -> float:
    # The index magnitude cannot exceed the best one-step advantage scaled by
    # the value-range bound, so this initial bracket almost always straddles.
    return params.c2 + params.trunc_a / (1.0 - gamma)


def _expand_bracket(solver: RelaxedSolver, s_idx: int, tol_check: float, max_doublings: int = 40):
    scale = _bracket_scale(solver.params, solver.gamma)
    lo, hi = -scale, scale
    for _ in range(max_doublings):
        if not solver.membership(lo, tol_check)[s_idx]:
            break
        lo *= 2.0
    else:
        raise BracketError(f"state {s_idx} stayed passive down to subsidy {lo}", lo)
    for _ in range(max_doublings):
        if solver.membership(hi, tol_check)[s_idx]:
            break
        hi *= 2.0
    else:
        raise BracketError(f"state {s_idx} stayed active up to subsidy {hi}", hi)
    return lo, hi


def _bisect_index(
    solver: RelaxedSolver, s_idx: int, eps: float, k_max: int, tol_check: float
) -> float:
    lo, hi = _expand_bracket(solver, s_idx, tol_check)
    for _ in range(k_max):
        mid = 0.5 * (lo + hi)
        if solver.membership(mid, tol_check)[s_idx]:
            hi = mid
        else:
            lo = mid
        if hi - lo < eps:
            break
    return 0.5 * (lo + hi)


def whittle_index_bisection(
    params: ArmParams,
    gamma: float,
    s: AoiState,
    eps: float = 1e-6,
    k_max: int = 200,
    dp_tol: float | None = None,
    tol_check: float = 1e-8,
) -> float:
    """Subsidy at which ``s`` switches from active to passive, located by bisection.

    Every membership test solves the relaxed problem at the midpoint subsidy;
    the solver tolerance defaults to eps/10 so value noise cannot flip
    membership at the final bracket width. Outside the indexable regime the
    returned value is the crossing the bisection converges to, a heuristic
    score rather than a well-defined index.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    solver = RelaxedSolver(params, gamma, tol=eps / 10.0 if dp_tol is None else dp_tol)
    return _bisect_index(solver, state_index(s.monitor_age, s.bs_age), eps, k_max, tol_check)


def _build_table(
    params: ArmParams,
    gamma: float,
    eps: float,
    k_max: int,
    dp_tol: float | None,
    tol_check: float,
    kind: str,
):
    solver = RelaxedSolver(params, gamma, tol=eps / 10.0 if dp_tol is None else dp_tol)
    n = params.n_states
    table = IndexTable(
        index=np.full(n, np.nan),
        kind=kind,
        trunc_a=params.trunc_a,
        active_action=np.zeros(n, dtype=np.int8),
        indexable=indexable_sufficient(params, gamma),
        eps=eps,
    )
    if not table.indexable:
        warnings.warn(
            "sufficient indexability condition not met; indices are heuristic scores",
            stacklevel=3,
        )
    return solver, table


def _index_one_state(solver, table, s_idx: int, eps: float, k_max: int, tol_check: float):
    """Bisection for one state with a fresh workspace; records bracket failures.

    Resetting the value buffer keeps every state's bisection path independent
    of visit order, so exact and approximate builds agree bit-for-bit on
    shared states.
    """
    solver.reset()
    try:
        w = _bisect_index(solver, s_idx, eps, k_max, tol_check)
    except BracketError as exc:
        table.bracket_failures = table.bracket_failures + (s_idx,)
        w = exc.fallback
    table.index[s_idx] = w
    v = solver.solve(w)
    table.active_action[s_idx] = solver.active_argmin(v, w, s_idx)


def exact_index_table(
    params: ArmParams,
    gamma: float,
    eps: float = 1e-6,
    k_max: int = 200,
    dp_tol: float | None = None,
    tol_check: float = 1e-8,
) -> IndexTable:
    """Bisection index for every reachable state."""
    solver, table = _build_table(params, gamma, eps, k_max, dp_tol, tol_check, "exact")
    for s_idx in range(params.n_states):
        _index_one_state(solver, table, s_idx, eps, k_max, tol_check)
    return table


def approx_index_table(
    params: ArmParams,
    gamma: float,
    eps: float = 1e-6,
    k_max: int = 200,
    dp_tol: float | None = None,
    tol_check: float = 1e-8,
) -> IndexTable:
    """Anchor bisection plus interpolation-and-update for interior states.

    Anchors are the diagonal states (a, a) and the right boundary (A, b); they
    carry their bisection values unchanged. Every interior (a, b) receives the
    linear interpolation between its row anchors, then one relaxed solve at
    that subsidy refreshes it through the index fixed-point relation. Rows
    whose anchors failed to bracket keep the raw interpolation.
    """
    a_cap = params.trunc_a
    solver, table = _build_table(params, gamma, eps, k_max, dp_tol, tol_check, "approximate")
    diag_idx = state_index(np.arange(1, a_cap + 1), np.arange(1, a_cap + 1))
    right_idx = state_index(a_cap, np.arange(1, a_cap + 1))
    anchor_idx = sorted(set(diag_idx.tolist()) | set(np.atleast_1d(right_idx).tolist()))
    for s_idx in anchor_idx:
        _index_one_state(solver, table, s_idx, eps, k_max, tol_check)

    failed = set(table.bracket_failures)
    solver.reset()
    for b in range(1, a_cap):
        w_diag = table.index[state_index(b, b)]
        w_right = table.index[state_index(a_cap, b)]
        row_ok = state_index(b, b) not in failed and state_index(a_cap, b) not in failed
        for a in range(b + 1, a_cap):
            s_idx = state_index(a, b)
            w_hat = w_diag + (a - b) / (a_cap - b) * (w_right - w_diag)
            v = solver.solve(w_hat)
            if row_ok:
                table.index[s_idx] = solver.index_update(v)[s_idx]
            else:
                table.index[s_idx] = w_hat
            table.active_action[s_idx] = solver.active_argmin(v, w_hat, s_idx)
    return table


@dataclass
class CurvatureBound:
    """Row-curvature diagnostic of the interpolated index.

    ``h_row[b]`` is the largest absolute second difference of the exact index
    along row b (rows with fewer than three states are skipped), and ``bound``
    holds factor * h_row[b] * (a-b) * (A-a) per state, the a-posteriori cap on
    the interpolation-plus-update error. It vanishes at the anchors and peaks
    at the row midpoint.
    """

    factor: float
    h_row: dict[int, float] = field(default_factory=dict)
    bound: np.ndarray = field(default_factory=lambda: np.empty(0))


def curvature_error_bound(exact: IndexTable, gamma: float, params: ArmParams) -> CurvatureBound:
    """Per-row curvature of an exact index table and the induced error bound."""
    check_gamma(gamma)
    a_cap = exact.trunc_a
    factor = gamma * params.lam_max / (1.0 - gamma)
    out = CurvatureBound(factor=factor, bound=np.full(num_states(a_cap), np.nan))
    for b in range(1, a_cap + 1):
        ms = np.arange(b, a_cap + 1)
        if ms.size < 3:
            continue
        row = exact.index[state_index(ms, b)]
        h = float(np.max(np.abs(row[2:] - 2.0 * row[1:-1] + row[:-2])))
        out.h_row[b] = h
        out.bound[state_index(ms, b)] = factor * h * (ms - b) * (a_cap - ms)
    return out
