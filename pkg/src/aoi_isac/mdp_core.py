"""Core model of the two-age sensing/communication scheduling problem.

A base station serves a remote monitor. Each slot it can sense the source
(refresh its own copy), communicate (forward its copy to the monitor), or do
both at once; each mode succeeds with its own probability and carries its own
cost. Freshness is tracked by two ages: ``monitor_age`` (age of the monitor's
information) and ``bs_age`` (age of the base station's information). This
module defines the state space, the stochastic transition kernel, stage costs,
and the triangular truncated state enumeration shared by every solver.

All operations here are pure functions on immutable value data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# Action encoding. Idle only exists in the relaxed / multi-arm setting; the
# single-source problem restricts to the three active modes.
SENSE = 0
COMM = 1
JOINT = 2
IDLE = 3

ACTIVE_ACTIONS = (SENSE, COMM, JOINT)
ACTION_NAMES = ("sense", "comm", "joint", "idle")


class AoiState(NamedTuple):
    """Pair of ages, in slots. Reachable states satisfy 1 <= bs_age <= monitor_age."""

    monitor_age: int
    bs_age: int


@dataclass(frozen=True)
class ArmParams:
    """Success probabilities, action costs, and truncation level of one subsystem.

    ``lam0``, ``lam1``, ``lam2`` are the success probabilities of sense,
    communicate, and joint sense-and-communicate. Communication is assumed the
    most reliable mode and the joint mode the least: 0 < lam2 <= lam0 <= lam1 < 1.
    Costs are ordered the other way around: 0 <= c0 <= c1 <= c2. ``trunc_a``
    caps both age coordinates; out-of-range transitions are clipped back.
    """

    lam0: float
    lam1: float
    lam2: float
    c0: float
    c1: float
    c2: float
    trunc_a: int

    def __post_init__(self) -> None:
        if not (0.0 < self.lam2 <= self.lam0 <= self.lam1 < 1.0):
            raise ValueError(
                "success probabilities must satisfy 0 < lam2 <= lam0 <= lam1 < 1, "
                f"got ({self.lam0}, {self.lam1}, {self.lam2})"
            )
        if not (0.0 <= self.c0 <= self.c1 <= self.c2):
            raise ValueError(
                f"costs must satisfy 0 <= c0 <= c1 <= c2, got ({self.c0}, {self.c1}, {self.c2})"
            )
        if int(self.trunc_a) != self.trunc_a or self.trunc_a < 1:
            raise ValueError(f"trunc_a must be an integer >= 1, got {self.trunc_a}")

    @property
    def lam(self) -> np.ndarray:
        return np.array([self.lam0, self.lam1, self.lam2])

    @property
    def costs(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2])

    @property
    def lam_max(self) -> float:
        return max(self.lam0, self.lam1, self.lam2)

    @property
    def n_states(self) -> int:
        return num_states(self.trunc_a)


def check_gamma(gamma: float) -> None:
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"discount factor must lie in (0, 1), got {gamma}")


def num_states(trunc_a: int) -> int:
    """Size of the truncated triangle {(m, b) : 1 <= b <= m <= trunc_a}."""
    return trunc_a * (trunc_a + 1) // 2


def state_index(monitor_age, bs_age):
    """Row-major triangular index of (monitor_age, bs_age); O(1), vectorizable."""
    m = np.asarray(monitor_age)
    b = np.asarray(bs_age)
    idx = (m - 1) * m // 2 + (b - 1)
    return int(idx) if idx.ndim == 0 else idx


def age_arrays(trunc_a: int) -> tuple[np.ndarray, np.ndarray]:
    """Monitor and base-station age vectors, aligned with the triangular index."""
    if trunc_a < 1:
        raise ValueError(f"trunc_a must be >= 1, got {trunc_a}")
    m = np.repeat(np.arange(1, trunc_a + 1), np.arange(1, trunc_a + 1))
    b = np.concatenate([np.arange(1, k + 1) for k in range(1, trunc_a + 1)])
    return m, b


def reachable_states(trunc_a: int) -> list[AoiState]:
    """All reachable states of the truncated model, in triangular-index order."""
    m, b = age_arrays(trunc_a)
    return [AoiState(int(mi), int(bi)) for mi, bi in zip(m, b)]


class SuccessorIndices(NamedTuple):
    """Triangular indices of the clipped successor states, one entry per state.

    ``up`` is the shared failure/idle successor (both ages + 1); the other
    three are the success arrivals of sense, communicate, and joint.
    """

    up: np.ndarray
    sense_ok: np.ndarray
    comm_ok: np.ndarray
    joint_ok: np.ndarray


def successor_indices(trunc_a: int) -> SuccessorIndices:
    """Precomputed clipped transition targets used by the vectorized solvers."""
    m, b = age_arrays(trunc_a)
    mp = np.minimum(m + 1, trunc_a)
    bp = np.minimum(b + 1, trunc_a)
    return SuccessorIndices(
        up=state_index(mp, bp),
        sense_ok=state_index(mp, 1),
        comm_ok=state_index(bp, bp),
        joint_ok=state_index(bp, 1),
    )


def success_prob(action: int, params: ArmParams) -> float:
    """Success probability of an active action. Idle has no success event."""
    if action == IDLE:
        raise ValueError("idle has no success event")
    if action not in ACTIVE_ACTIONS:
        raise ValueError(f"unknown action {action}")
    return (params.lam0, params.lam1, params.lam2)[action]


def _check_state(s: AoiState, trunc_a: int) -> None:
    if not (1 <= s.bs_age <= s.monitor_age <= trunc_a):
        raise ValueError(f"state {s} outside the reachable triangle with cap {trunc_a}")


def transition(s: AoiState, action: int, success: bool, trunc_a: int) -> AoiState:
    """One-slot state update, then coordinate-wise clipping at ``trunc_a``.

    On success, sensing resets the base-station age, communicating copies the
    base-station age to the monitor, and the joint mode does both. Any failure
    (and the idle action, which has no success event) simply ages both sides
    by one slot.
    """
    _check_state(s, trunc_a)
    if action not in (SENSE, COMM, JOINT, IDLE):
        raise ValueError(f"unknown action {action}")
    m, b = s
    if action != IDLE and success:
        if action == SENSE:
            nxt = (m + 1, 1)
        elif action == COMM:
            nxt = (b + 1, b + 1)
        else:
            nxt = (b + 1, 1)
    else:
        nxt = (m + 1, b + 1)
    return AoiState(min(nxt[0], trunc_a), min(nxt[1], trunc_a))


def stage_cost(s: AoiState, action: int, params: ArmParams) -> float:
    """Per-slot cost: the monitor age plus the chosen action's cost (idle is free)."""
    _check_state(s, params.trunc_a)
    if action == IDLE:
        return float(s.monitor_age)
    if action not in ACTIVE_ACTIONS:
        raise ValueError(f"unknown action {action}")
    return float(s.monitor_age) + float((params.c0, params.c1, params.c2)[action])


def assumption1_holds(gamma: float, params: ArmParams) -> bool:
    """Discount regime under which the action-difference monotonicity is proven.

    True iff gamma <= lam2 / (lam0 * lam1 + lam2 * (1 - lam1)). Outside this
    regime the threshold shape is still typically observed, but the structural
    checks that rely on it are only reported, not asserted.
    """
    check_gamma(gamma)
    rhs = params.lam2 / (params.lam0 * params.lam1 + params.lam2 * (1.0 - params.lam1))
    return gamma <= rhs
