"""Single-subsystem solver on the truncated two-age state space.

Solves the discounted three-action problem by value iteration, extracts the
two switching thresholds of the optimal policy, verifies the structural
properties of the converged solution numerically, and provides the
closed-form truncation-level selector together with its error bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mdp_core import (
    COMM,
    JOINT,
    SENSE,
    AoiState,
    ArmParams,
    SuccessorIndices,
    age_arrays,
    assumption1_holds,
    check_gamma,
    num_states,
    state_index,
    successor_indices,
)


class ConvergenceError(RuntimeError):
    """Raised when value iteration exhausts its iteration cap."""


class StructureViolation(ValueError):
    """Raised when a policy row does not follow the ordered sense/joint/comm pattern."""


@dataclass
class ValueTable:
    """Value per reachable state, dense triangular layout."""

    values: np.ndarray
    trunc_a: int

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (num_states(self.trunc_a),):
            raise ValueError(
                f"expected {num_states(self.trunc_a)} values for trunc_a={self.trunc_a}, "
                f"got shape {self.values.shape}"
            )

    def at(self, s: AoiState) -> float:
        return float(self.values[state_index(s.monitor_age, s.bs_age)])


@dataclass
class PolicyTable:
    """Action per reachable state, dense triangular layout."""

    actions: np.ndarray
    trunc_a: int

    def __post_init__(self) -> None:
        self.actions = np.asarray(self.actions, dtype=np.int8)
        if self.actions.shape != (num_states(self.trunc_a),):
            raise ValueError(
                f"expected {num_states(self.trunc_a)} actions for trunc_a={self.trunc_a}, "
                f"got shape {self.actions.shape}"
            )

    def at(self, s: AoiState) -> int:
        return int(self.actions[state_index(s.monitor_age, s.bs_age)])


@dataclass
class ThresholdRow:
    """Switching thresholds of one policy row (fixed base-station age).

    Sense is optimal for monitor_age <= tau1, joint for tau1 < monitor_age
    <= tau2, communicate above tau2. ``math.inf`` marks a region that never
    ends within the truncated range.
    """

    bs_age: int
    tau1: float
    tau2: float


def _q_active(v: np.ndarray, params: ArmParams, gamma: float, succ: SuccessorIndices):
    """Action values of the three active modes under the clipped kernel."""
    m, _ = age_arrays(params.trunc_a)
    v_up = v[succ.up]
    q0 = m + params.c0 + gamma * (params.lam0 * v[succ.sense_ok] + (1.0 - params.lam0) * v_up)
    q1 = m + params.c1 + gamma * (params.lam1 * v[succ.comm_ok] + (1.0 - params.lam1) * v_up)
    q2 = m + params.c2 + gamma * (params.lam2 * v[succ.joint_ok] + (1.0 - params.lam2) * v_up)
    return q0, q1, q2


def _classify(q0: np.ndarray, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    # Minimizer with the fixed tie order: sense when it is no worse than both,
    # else comm when it strictly beats sense and is no worse than joint,
    # else joint.
    sense = (q0 <= q1) & (q0 <= q2)
    comm = (q0 > q1) & (q2 >= q1)
    return np.where(sense, SENSE, np.where(comm, COMM, JOINT)).astype(np.int8)


def bellman_backup(values: ValueTable, params: ArmParams, gamma: float):
    """One sweep of the three-action optimality operator.

    Returns the updated value table and the minimizing action per state.
    """
    check_gamma(gamma)
    if values.trunc_a != params.trunc_a:
        raise ValueError(
            f"value table built for trunc_a={values.trunc_a}, params say {params.trunc_a}"
        )
    succ = successor_indices(params.trunc_a)
    q0, q1, q2 = _q_active(values.values, params, gamma, succ)
    tv = np.minimum(np.minimum(q0, q1), q2)
    pol = _classify(q0, q1, q2)
    return ValueTable(tv, params.trunc_a), PolicyTable(pol, params.trunc_a)


def value_iteration(
    params: ArmParams,
    gamma: float,
    tol: float = 1e-6,
    max_iter: int = 1_000_000,
    v0: np.ndarray | None = None,
):
    """Iterate the optimality operator from zero until the value is tol-accurate.

    Stops once the sup-norm sweep difference drops below tol*(1-gamma)/(2*gamma),
    which bounds the distance to the fixed point by tol. Returns the final
    value table, the policy of the last sweep, and the sweep count.
    """
    check_gamma(gamma)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    n = params.n_states
    succ = successor_indices(params.trunc_a)
    m, _ = age_arrays(params.trunc_a)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"v0 must have shape ({n},), got {v.shape}")
    stop = tol * (1.0 - gamma) / (2.0 * gamma)
    for it in range(1, max_iter + 1):
        q0, q1, q2 = _q_active(v, params, gamma, succ)
        tv = np.minimum(np.minimum(q0, q1), q2)
        diff = float(np.max(np.abs(tv - v)))
        v = tv
        if diff <= stop:
            pol = _classify(q0, q1, q2)
            return ValueTable(v, params.trunc_a), PolicyTable(pol, params.trunc_a), it
    raise ConvergenceError(
        f"value iteration did not reach sweep difference {stop:g} in {max_iter} sweeps"
    )


def action_differences(values: ValueTable, s: AoiState, params: ArmParams, gamma: float):
    """Pairwise action-value differences (sense-comm, sense-joint, joint-comm) at ``s``.

    The third difference is derived from the first two so the telescoping
    identity d01 = d02 + d21 holds exactly in floating point.
    """
    d01, d02, d21 = action_difference_tables(values, params, gamma)
    i = state_index(s.monitor_age, s.bs_age)
    return float(d01[i]), float(d02[i]), float(d21[i])


def action_difference_tables(values: ValueTable, params: ArmParams, gamma: float):
    """Vectorized action differences over the whole table."""
    check_gamma(gamma)
    succ = successor_indices(params.trunc_a)
    q0, q1, q2 = _q_active(values.values, params, gamma, succ)
    d01 = q0 - q1
    d02 = q0 - q2
    return d01, d02, d01 - d02


def extract_thresholds(policy: PolicyTable) -> list[ThresholdRow]:
    """Per-row switching thresholds of an ordered policy.

    Each row (fixed bs_age) must consist of a sense block, then a joint
    block, then a comm block, any of which may be empty; otherwise a
    StructureViolation is raised naming the row and offending positions.
    """
    a = policy.trunc_a
    rows = []
    for b in range(1, a + 1):
        ms = np.arange(b, a + 1)
        acts = policy.actions[state_index(ms, b)]
        # Ordered pattern check: actions must be nonincreasing in the rank
        # sense(0) -> joint(2) -> comm(1).
        rank = np.array([0, 2, 1])[acts]
        bad = np.nonzero(np.diff(rank) < 0)[0]
        if bad.size:
            pos = [(int(ms[i]), int(ms[i + 1])) for i in bad]
            raise StructureViolation(
                f"row bs_age={b} is not ordered sense->joint->comm; "
                f"offending monitor-age pairs {pos}, actions {acts.tolist()}"
            )
        sense_ms = ms[acts == SENSE]
        comm_present = bool(np.any(acts == COMM))
        if not comm_present and not np.any(acts == JOINT):
            # Row never leaves the sense region within the truncation.
            tau1: float = math.inf
            tau2: float = math.inf
        else:
            tau1 = float(sense_ms.max()) if sense_ms.size else float(b - 1)
            if comm_present:
                no_comm_ms = ms[acts != COMM]
                tau2 = float(no_comm_ms.max()) if no_comm_ms.size else float(b - 1)
            else:
                tau2 = math.inf
        rows.append(ThresholdRow(bs_age=b, tau1=tau1, tau2=tau2))
    return rows


@dataclass
class CheckResult:
    """Outcome of one structural check."""

    name: str
    passed: bool
    n_checked: int
    n_failed: int
    worst_violation: float
    asserted: bool = True
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "asserted": self.asserted,
            "n_checked": self.n_checked,
            "n_failed": self.n_failed,
            "worst_violation": self.worst_violation,
            "note": self.note,
        }


@dataclass
class StructureReport:
    """Bundle of structural check outcomes for one converged solution."""

    checks: list[CheckResult] = field(default_factory=list)
    assumption1: bool = True
    tol: float = 1e-8
    trunc_a: int = 0

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    def by_name(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "trunc_a": self.trunc_a,
            "tol": self.tol,
            "assumption1": self.assumption1,
            "all_passed": self.all_passed,
            "checks": [c.as_dict() for c in self.checks],
        }


def _dense_grid(values: ValueTable) -> np.ndarray:
    """(A+1, A+1) matrix view of the triangle, NaN outside, 1-based ages."""
    a = values.trunc_a
    grid = np.full((a + 1, a + 1), np.nan)
    m, b = age_arrays(a)
    grid[m, b] = values.values
    return grid


def _tally(name: str, violation: np.ndarray, tol: float, asserted: bool = True, note: str = "") -> CheckResult:
    """Summarize an array of signed violations (positive = bad) into a result."""
    violation = violation[np.isfinite(violation)]
    n = int(violation.size)
    failed = int(np.count_nonzero(violation > tol))
    worst = float(violation.max()) if n else float("-inf")
    return CheckResult(
        name=name,
        passed=failed == 0,
        n_checked=n,
        n_failed=failed,
        worst_violation=worst,
        asserted=asserted,
        note=note,
    )


def boundary_margin_horizontal(gamma: float, params: ArmParams, tol: float) -> int:
    """Depth below the age cap where clipping can still flatten horizontal increments.

    In the communicate region the untruncated increments sit exactly at the
    lower bound 1/(1-gamma+gamma*lam1), and the clipped model undershoots it by
    x^k/(1-x) at distance k from the cap, with x = gamma*(1-lam1). The check
    must therefore stay at least ceil(log(tol*(1-x))/log(x)) layers inside.
    """
    x = gamma * (1.0 - params.lam1)
    if x <= 0.0:
        return 2
    k = math.ceil(math.log(tol * (1.0 - x)) / math.log(x))
    return max(2, k)


def verify_structure(
    values: ValueTable,
    policy: PolicyTable,
    params: ArmParams,
    gamma: float,
    tol: float = 1e-8,
) -> StructureReport:
    """Run every structural check of the converged solution and report margins.

    Checks that the clipped operator preserves exactly (monotonicity, row
    concavity, the local increment cap, the diagonal action) run on the full
    table. Difference checks proven on the unbounded model exclude states
    whose one-step reads are clipped (monitor age above A-2), and the
    horizontal lower bound additionally stays clear of the flattened layers
    near the cap (see ``boundary_margin_horizontal``). Failures are report
    entries, never exceptions.
    """
    check_gamma(gamma)
    a = params.trunc_a
    grid = _dense_grid(values)
    m_ages, b_ages = age_arrays(a)
    report = StructureReport(assumption1=assumption1_holds(gamma, params), tol=tol, trunc_a=a)

    np_err = np.seterr(invalid="ignore")  # NaN padding outside the triangle
    dh = grid[2:, :] - grid[1:-1, :]  # dh[k, b] = V(k+2, b) - V(k+1, b)
    dv = grid[:, 2:] - grid[:, 1:-1]

    # (i) coordinatewise nondecreasing in both ages.
    report.checks.append(
        _tally("monotone_values", np.concatenate([(-dh).ravel(), (-dv).ravel()]), tol)
    )

    # (ii) discrete concavity along monitor age, per row.
    d2 = grid[2:, :] - 2.0 * grid[1:-1, :] + grid[:-2, :]
    report.checks.append(_tally("row_concavity", d2.ravel(), tol))

    # (iii) horizontal increments bounded below, away from the flattened cap layers.
    k3 = boundary_margin_horizontal(gamma, params, tol)
    lower = 1.0 / (1.0 - gamma + gamma * params.lam1)
    dh_margin = dh[: max(a - k3, 0), :]  # pairs with monitor_age <= A - k3
    worst_full = float(np.nanmax(lower - dh)) if np.isfinite(dh).any() else float("-inf")
    report.checks.append(
        _tally(
            "horizontal_increment_lower",
            (lower - dh_margin).ravel(),
            tol,
            note=f"checked monitor_age <= {a - k3}; full-range worst {worst_full:.3e}",
        )
    )

    # (iv) every one-step increment capped by 1/(1-gamma); holds on the clipped model too.
    upper = 1.0 / (1.0 - gamma)
    ddiag = grid[2:, 2:] - grid[1:-1, 1:-1]
    report.checks.append(
        _tally(
            "local_increment_upper",
            np.concatenate([(dh - upper).ravel(), (dv - upper).ravel(), (ddiag - upper).ravel()]),
            tol,
        )
    )

    # (v) sensing is optimal on the diagonal.
    diag_idx = state_index(np.arange(1, a + 1), np.arange(1, a + 1))
    diag_bad = policy.actions[diag_idx] != SENSE
    report.checks.append(
        CheckResult(
            name="diagonal_sense",
            passed=not bool(diag_bad.any()),
            n_checked=a,
            n_failed=int(diag_bad.sum()),
            worst_violation=float(diag_bad.any()),
        )
    )

    # (vi) diagonal-vs-boundary increment gap strictly below 1/(gamma*lam0).
    bs = np.arange(1, a - 1)  # needs V(b+2, 1) and V(b+1, b+1)
    if bs.size:
        a_inc = grid[bs + 2, 1] - grid[bs + 1, 1]
        b_inc = grid[bs + 1, bs + 1] - grid[bs, bs]
        gap_violation = (b_inc - a_inc) - 1.0 / (gamma * params.lam0)
    else:
        gap_violation = np.empty(0)
    report.checks.append(_tally("diagonal_gap_bound", gap_violation, tol))

    # (vii) vertical increments dominated by the shifted diagonal increment.
    viol = []
    for b in range(1, a - 1):
        ms = np.arange(b + 1, a - 1)  # keep reads at monitor age <= A-1, one layer inside
        if not ms.size:
            continue
        c_inc = grid[ms + 1, b + 2] - grid[ms + 1, b + 1]
        b_next = grid[b + 2, b + 2] - grid[b + 1, b + 1]
        viol.append(c_inc - b_next)
    report.checks.append(
        _tally(
            "vertical_vs_diagonal",
            np.concatenate(viol) if viol else np.empty(0),
            tol,
        )
    )

    # Action differences on states with unclipped reads (monitor age <= A-1).
    d01, d02, d21 = action_difference_tables(values, params, gamma)
    dgrid = {}
    for name, arr in (("d01", d01), ("d02", d02), ("d21", d21)):
        g = np.full((a + 1, a + 1), np.nan)
        g[m_ages, b_ages] = arr
        g[a, :] = np.nan  # reads at the cap are clipped
        dgrid[name] = g

    # (viii) differences nondecreasing in monitor age (needs the discount regime).
    viol_m = [
        (dgrid[name][1:-1, :] - dgrid[name][2:, :]).ravel() for name in ("d01", "d02", "d21")
    ]
    note8 = "" if report.assumption1 else "assumption not satisfied; reported, not asserted"
    report.checks.append(
        _tally(
            "differences_nondecreasing_in_monitor_age",
            np.concatenate(viol_m),
            tol,
            asserted=report.assumption1,
            note=note8,
        )
    )

    # (ix) sense-vs-other differences nonincreasing in bs age.
    viol_b = [
        (dgrid[name][:, 2:] - dgrid[name][:, 1:-1]).ravel() for name in ("d01", "d02")
    ]
    report.checks.append(
        _tally("differences_nonincreasing_in_bs_age", np.concatenate(viol_b), tol)
    )

    np.seterr(**np_err)

    # (x) lower threshold nondecreasing across rows.
    try:
        rows = extract_thresholds(policy)
        tau1 = np.array([r.tau1 for r in rows])
        with np.errstate(invalid="ignore"):  # inf - inf pairs compare as fine
            n_bad = int(np.count_nonzero(np.diff(tau1) < 0))
        report.checks.append(
            CheckResult(
                name="tau1_nondecreasing",
                passed=n_bad == 0,
                n_checked=len(rows) - 1,
                n_failed=n_bad,
                worst_violation=float(n_bad > 0),
            )
        )
    except StructureViolation as exc:
        report.checks.append(
            CheckResult(
                name="tau1_nondecreasing",
                passed=False,
                n_checked=0,
                n_failed=1,
                worst_violation=math.inf,
                note=str(exc),
            )
        )
    return report


def truncation_level(gamma: float, eps_hat: float) -> int:
    """Smallest age cap whose truncation error stays below the per-slot tolerance.

    Inverts the error bound gamma^A/(1-gamma)^2 <= eps_hat/(1-gamma), i.e.
    A = ceil(log(eps_hat*(1-gamma))/log(gamma)), floored at 1.
    """
    check_gamma(gamma)
    if eps_hat <= 0:
        raise ValueError(f"eps_hat must be positive, got {eps_hat}")
    x = math.log(eps_hat * (1.0 - gamma)) / math.log(gamma)
    # Snap near-integer ratios before ceiling so exact cells are not bumped up
    # by representation error.
    if abs(x - round(x)) < 1e-9:
        x = round(x)
    return max(1, math.ceil(x))


def truncation_error_bound(gamma: float, trunc_a: int) -> float:
    """Upper bound on the total discounted value lost to clipping at ``trunc_a``."""
    check_gamma(gamma)
    if trunc_a < 1:
        raise ValueError(f"trunc_a must be >= 1, got {trunc_a}")
    return gamma**trunc_a / (1.0 - gamma) ** 2
