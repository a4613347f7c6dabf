"""Fleet scheduling of many two-age subsystems under an activation budget.

At most ``m_active`` of the N subsystems may take an active mode per slot;
everyone else idles and ages. This module provides the online priority
schedulers (index-based, greedy, random, fixed), a reproducible Monte Carlo
estimator of the discounted cost per source, and, for small fleets, the exact
joint dynamic program on the product state space alongside exact evaluation
of deterministic scheduling policies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .mdp_core import (
    IDLE,
    AoiState,
    ArmParams,
    age_arrays,
    check_gamma,
    state_index,
    successor_indices,
)
from .single_source import PolicyTable, value_iteration
from .whittle import IndexTable, approx_index_table, exact_index_table


class JointBudgetError(RuntimeError):
    """Raised when the product state space exceeds the configured memory budget."""


@dataclass
class ArmSpec:
    """One subsystem of the fleet; ``index_table`` may be precomputed offline."""

    arm_id: int
    params: ArmParams
    index_table: IndexTable | None = None


@dataclass
class FleetState:
    """Per-arm age pairs at one instant."""

    states: tuple[AoiState, ...]


@dataclass
class SimConfig:
    """Monte Carlo run configuration.

    ``m_active`` may equal the fleet size (the budget is then non-binding);
    the interesting regime is m_active < N. One independent random stream is
    derived per replication from (seed, replication index).
    """

    gamma: float
    horizon: int
    replications: int
    m_active: int
    seed: int
    policy: str
    fixed_action: int = IDLE

    def __post_init__(self) -> None:
        check_gamma(self.gamma)
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.m_active < 1:
            raise ValueError(f"m_active must be >= 1, got {self.m_active}")
        if self.policy not in ("wip", "awip", "greedy", "random", "fixed"):
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass
class SimResult:
    """Estimated average discounted cost per source with its 99% half-width."""

    mean_j: float
    ci_half_width_99: float
    replications: int
    policy: str
    seed: int
    diagnostics: dict = field(default_factory=dict)


def build_fleet(classes: list[ArmParams], n_arms: int) -> list[ArmSpec]:
    """Assign arms round-robin to the given parameter classes."""
    if not classes:
        raise ValueError("need at least one parameter class")
    return [ArmSpec(arm_id=i, params=classes[i % len(classes)]) for i in range(n_arms)]


class _ArmKernel:
    """Per-arm lookup tables: ages, clipped successors, probabilities, costs."""

    def __init__(self, params: ArmParams):
        self.params = params
        self.n = params.n_states
        m, _ = age_arrays(params.trunc_a)
        self.m = m.astype(float)
        succ = successor_indices(params.trunc_a)
        self.up = succ.up.astype(np.int32)
        # Success arrival per action; idle has no success branch, mapped to the
        # shared aging successor with probability zero.
        self.next_succ = np.stack(
            [succ.sense_ok, succ.comm_ok, succ.joint_ok, succ.up], axis=1
        ).astype(np.int32)
        self.lam4 = np.array([params.lam0, params.lam1, params.lam2, 0.0])
        self.cost4 = np.array([params.c0, params.c1, params.c2, 0.0])


def top_m_mask(priorities: np.ndarray, m_active: int) -> np.ndarray:
    """Boolean mask of the m largest entries per row; ties go to lower arm ids."""
    order = np.argsort(-priorities, axis=1, kind="stable")
    mask = np.zeros(priorities.shape, dtype=bool)
    rows = np.arange(priorities.shape[0])[:, None]
    mask[rows, order[:, :m_active]] = True
    return mask


class Scheduler:
    """Maps batched per-arm state indices to per-arm actions."""

    name = "scheduler"
    deterministic = True
    needs_rank_uniforms = False

    def batch_actions(self, states: np.ndarray, m_active: int, rank_u=None) -> np.ndarray:
        raise NotImplementedError

    def actions(self, fleet: FleetState, m_active: int, rng=None) -> list[int]:
        """Single-fleet convenience wrapper around the batched rule."""
        states = np.array(
            [[state_index(s.monitor_age, s.bs_age) for s in fleet.states]], dtype=np.int32
        )
        rank_u = None
        if self.needs_rank_uniforms:
            if rng is None:
                raise ValueError(f"{self.name} scheduler requires an rng")
            rank_u = rng.random((1, len(fleet.states)))
        return [int(u) for u in self.batch_actions(states, m_active, rank_u)[0]]


class _PriorityScheduler(Scheduler):
    """Top-m selection on a per-arm priority, then a per-arm active action."""

    def _priorities(self, states: np.ndarray, rank_u) -> np.ndarray:
        raise NotImplementedError

    def _slot_actions(self, states: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch_actions(self, states, m_active, rank_u=None):
        mask = top_m_mask(self._priorities(states, rank_u), m_active)
        return np.where(mask, self._slot_actions(states), IDLE).astype(np.int8)


class IndexScheduler(_PriorityScheduler):
    """Serve the arms whose current states carry the largest priority indices.

    Selected arms apply the active action cached in their index table (the
    relaxed-problem minimizer at the state's own subsidy).
    """

    def __init__(self, tables: list[IndexTable], name: str | None = None):
        self.tables = tables
        kinds = {t.kind for t in tables}
        self.name = name or ("wip" if kinds == {"exact"} else "awip")

    def _priorities(self, states, rank_u):
        return np.stack(
            [t.index[states[:, i]] for i, t in enumerate(self.tables)], axis=1
        )

    def _slot_actions(self, states):
        return np.stack(
            [t.active_action[states[:, i]] for i, t in enumerate(self.tables)], axis=1
        )


class _LocalActionScheduler(_PriorityScheduler):
    """Shared machinery for baselines that act with the single-source optimum."""

    def __init__(self, arms: list[ArmSpec], policies: list[PolicyTable]):
        self.kernels = [_ArmKernel(a.params) for a in arms]
        self.policies = policies

    def _slot_actions(self, states):
        return np.stack(
            [p.actions[states[:, i]] for i, p in enumerate(self.policies)], axis=1
        )


class GreedyScheduler(_LocalActionScheduler):
    """Serve the arms with the largest monitor ages."""

    name = "greedy"

    def _priorities(self, states, rank_u):
        return np.stack(
            [k.m[states[:, i]] for i, k in enumerate(self.kernels)], axis=1
        )


class RandomScheduler(_LocalActionScheduler):
    """Serve a uniformly random subset of the arms."""

    name = "random"
    deterministic = False
    needs_rank_uniforms = True

    def _priorities(self, states, rank_u):
        if rank_u is None:
            raise ValueError("random scheduler needs one uniform draw per arm")
        # The m smallest of N iid uniforms form a uniform m-subset; negate so
        # the top-m selection picks them.
        return -np.asarray(rank_u)


class FixedScheduler(Scheduler):
    """Apply one fixed action everywhere (idle: nobody acts; active: first m arms)."""

    name = "fixed"

    def __init__(self, action: int = IDLE):
        if action not in (0, 1, 2, 3):
            raise ValueError(f"unknown action {action}")
        self.action = action

    def batch_actions(self, states, m_active, rank_u=None):
        acts = np.full(states.shape, IDLE, dtype=np.int8)
        if self.action != IDLE:
            acts[:, : min(m_active, states.shape[1])] = self.action
        return acts


def single_source_policies(
    arms: list[ArmSpec], gamma: float, tol: float = 1e-8
) -> list[PolicyTable]:
    """Per-arm three-action optimal policies, solved once per distinct parameter set."""
    cache: dict[ArmParams, PolicyTable] = {}
    out = []
    for arm in arms:
        if arm.params not in cache:
            _, pol, _ = value_iteration(arm.params, gamma, tol)
            cache[arm.params] = pol
        out.append(cache[arm.params])
    return out


def index_tables(
    arms: list[ArmSpec], gamma: float, kind: str, eps: float = 1e-6, k_max: int = 200
) -> list[IndexTable]:
    """Per-arm index tables of the requested kind, reusing precomputed/shared ones."""
    builder = exact_index_table if kind == "exact" else approx_index_table
    cache: dict[ArmParams, IndexTable] = {}
    out = []
    for arm in arms:
        if arm.index_table is not None and arm.index_table.kind == kind:
            out.append(arm.index_table)
            continue
        if arm.params not in cache:
            cache[arm.params] = builder(arm.params, gamma, eps=eps, k_max=k_max)
        out.append(cache[arm.params])
    return out


def make_scheduler(
    cfg_policy: str,
    arms: list[ArmSpec],
    gamma: float,
    eps: float = 1e-6,
    fixed_action: int = IDLE,
    tol: float = 1e-8,
) -> Scheduler:
    """Construct the scheduler named by a SimConfig policy string."""
    if cfg_policy == "wip":
        return IndexScheduler(index_tables(arms, gamma, "exact", eps), name="wip")
    if cfg_policy == "awip":
        return IndexScheduler(index_tables(arms, gamma, "approximate", eps), name="awip")
    if cfg_policy == "greedy":
        return GreedyScheduler(arms, single_source_policies(arms, gamma, tol))
    if cfg_policy == "random":
        return RandomScheduler(arms, single_source_policies(arms, gamma, tol))
    if cfg_policy == "fixed":
        return FixedScheduler(fixed_action)
    raise ValueError(f"unknown policy {cfg_policy!r}")


def schedule_index(fleet: FleetState, tables: list[IndexTable], m_active: int) -> list[int]:
    """Top-m selection by stored index; ties go to the smaller arm id."""
    return IndexScheduler(tables).actions(fleet, m_active)


def schedule_greedy(
    fleet: FleetState, arms: list[ArmSpec], policies: list[PolicyTable], m_active: int
) -> list[int]:
    """Top-m selection by monitor age; active arms use the single-source optimum."""
    return GreedyScheduler(arms, policies).actions(fleet, m_active)


def schedule_random(
    fleet: FleetState,
    arms: list[ArmSpec],
    policies: list[PolicyTable],
    m_active: int,
    rng: np.random.Generator,
) -> list[int]:
    """Uniform m-subset selection; active arms use the single-source optimum."""
    return RandomScheduler(arms, policies).actions(fleet, m_active, rng=rng)


def simulate(
    arms: list[ArmSpec],
    cfg: SimConfig,
    scheduler: Scheduler,
    chunk_size: int = 4096,
) -> SimResult:
    """Monte Carlo estimate of the discounted cost per source under a scheduler.

    Every replication starts with all arms at (1, 1), runs ``horizon`` slots,
    and accumulates (1-gamma)/N * sum_k gamma^k * sum_i cost. Replication r
    draws from the stream seeded by (seed, r): one uniform per arm per slot
    for the success outcomes (consumed in ascending arm order), then, for the
    random policy only, one ranking uniform per arm per slot. Results are
    bit-reproducible for a fixed (seed, config) regardless of chunking.
    """
    n_arms = len(arms)
    if not (1 <= cfg.m_active <= n_arms):
        raise ValueError(f"m_active must lie in [1, {n_arms}], got {cfg.m_active}")
    kernels = [_ArmKernel(a.params) for a in arms]
    gamma = cfg.gamma
    disc = gamma ** np.arange(cfg.horizon)
    j_per_rep = np.empty(cfg.replications)
    needs_rank = scheduler.needs_rank_uniforms

    for lo in range(0, cfg.replications, chunk_size):
        hi = min(lo + chunk_size, cfg.replications)
        rc = hi - lo
        u_out = np.empty((rc, cfg.horizon, n_arms))
        u_rank = np.empty((rc, cfg.horizon, n_arms)) if needs_rank else None
        for j in range(rc):
            rng = np.random.default_rng([cfg.seed, lo + j])
            u_out[j] = rng.random((cfg.horizon, n_arms))
            if needs_rank:
                u_rank[j] = rng.random((cfg.horizon, n_arms))
        states = np.zeros((rc, n_arms), dtype=np.int32)  # all arms at (1, 1)
        acc = np.zeros(rc)
        for k in range(cfg.horizon):
            acts = scheduler.batch_actions(
                states, cfg.m_active, u_rank[:, k, :] if needs_rank else None
            )
            if int((acts != IDLE).sum(axis=1).max(initial=0)) > cfg.m_active:
                raise RuntimeError("scheduler violated the activation budget")
            g = np.zeros(rc)
            for i, ker in enumerate(kernels):
                s = states[:, i]
                u = acts[:, i]
                g += ker.m[s] + ker.cost4[u]
                success = u_out[:, k, i] < ker.lam4[u]
                states[:, i] = np.where(success, ker.next_succ[s, u], ker.up[s])
            acc += disc[k] * g
        j_per_rep[lo:hi] = acc * ((1.0 - gamma) / n_arms)

    mean = float(j_per_rep.mean())
    ci = (
        2.576 * float(j_per_rep.std(ddof=1)) / math.sqrt(cfg.replications)
        if cfg.replications > 1
        else 0.0
    )
    return SimResult(
        mean_j=mean,
        ci_half_width_99=ci,
        replications=cfg.replications,
        policy=scheduler.name,
        seed=cfg.seed,
        diagnostics={"horizon": cfg.horizon, "m_active": cfg.m_active, "n_arms": n_arms},
    )


# ---------------------------------------------------------------------------
# Exact joint dynamic program and exact policy evaluation (small fleets).
#
# The activation budget is fully used: joint actions assign an active mode to
# exactly m_active arms and idle to the rest, matching the online schedulers,
# which always serve a full top-m set. With m_active = N this reduces to
# independent single-source problems.
# ---------------------------------------------------------------------------


def _joint_guard(arms: list[ArmSpec], n_tensors: int, max_bytes: float) -> tuple:
    n = len(arms)
    if n > 4 or any(a.params.trunc_a > 15 for a in arms):
        raise JointBudgetError(
            "joint solvers support at most 4 arms with trunc_a <= 15 each"
        )
    shape = tuple(a.params.n_states for a in arms)
    est = float(np.prod(shape)) * 8.0 * n_tensors
    if est > max_bytes:
        raise JointBudgetError(
            f"estimated working set {est / 1e9:.2f} GB exceeds budget {max_bytes / 1e9:.2f} GB"
        )
    return shape


def _strides(shape: tuple) -> np.ndarray:
    # C-order flat strides, matching ndarray.ravel().
    strides = np.ones(len(shape), dtype=np.int64)
    for i in range(len(shape) - 2, -1, -1):
        strides[i] = strides[i + 1] * shape[i + 1]
    return strides


def _allowed_combos(n_arms: int, m_active: int) -> np.ndarray:
    combos = [
        c
        for c in itertools.product(range(4), repeat=n_arms)
        if sum(1 for u in c if u != IDLE) == m_active
    ]
    return np.array(combos, dtype=np.int8)


@dataclass
class JointPolicy:
    """Deterministic joint policy on the product space (one combo id per state)."""

    combo_ids: np.ndarray  # int16, flat C-order over the product space
    combos: np.ndarray  # (n_combos, n_arms)
    shape: tuple
    m_active: int
    name: str = "joint-dp"
    deterministic: bool = True
    needs_rank_uniforms: bool = False

    def batch_actions(self, states: np.ndarray, m_active: int, rank_u=None) -> np.ndarray:
        strides = _strides(self.shape)
        flat = (states.astype(np.int64) * strides).sum(axis=1)
        return self.combos[self.combo_ids[flat]]


class JointEvalContext:
    """Shared per-fleet tables for exact policy evaluation on the product space.

    Building the state grid and the action-independent successor offsets once
    lets several policies be evaluated on the same fleet cheaply.
    """

    def __init__(self, arms: list[ArmSpec], max_bytes: float = 6e9):
        self.arms = arms
        self.shape = _joint_guard(arms, n_tensors=14, max_bytes=max_bytes)
        self.kernels = [_ArmKernel(a.params) for a in arms]
        self.strides = _strides(self.shape)
        self.total = int(np.prod(self.shape))
        n = len(arms)
        self.states = np.empty((self.total, n), dtype=np.int32)
        for i, s in enumerate(self.shape):
            pattern = np.repeat(np.arange(s, dtype=np.int32), self.strides[i])
            self.states[:, i] = np.tile(pattern, self.total // (s * int(self.strides[i])))
        # Aging (all-fail / idle) successor and the age part of the stage cost
        # do not depend on the action.
        self.fail_flat = np.zeros(self.total, dtype=np.int64)
        self.m_sum = np.zeros(self.total)
        for i, ker in enumerate(self.kernels):
            s = self.states[:, i]
            self.fail_flat += self.strides[i] * ker.up[s]
            self.m_sum += ker.m[s]

    def transition_tables(self, actions: np.ndarray, m_active: int):
        """Stage cost and (successor index, probability) pairs for a fixed policy."""
        n_active = (actions != IDLE).sum(axis=1)
        max_act = int(n_active.max(initial=0))
        if max_act > m_active:
            raise RuntimeError("scheduler violated the activation budget")
        g = self.m_sum.copy()
        slot_delta = [np.zeros(self.total, dtype=np.int64) for _ in range(max_act)]
        slot_p = [np.zeros(self.total) for _ in range(max_act)]
        cum = np.zeros(self.total, dtype=np.int8)
        for i, ker in enumerate(self.kernels):
            s = self.states[:, i]
            u = actions[:, i]
            g += ker.cost4[u]
            delta = self.strides[i] * (
                ker.next_succ[s, u].astype(np.int64) - ker.up[s].astype(np.int64)
            )
            p = ker.lam4[u]
            act = u != IDLE
            for j in range(max_act):
                pick = act & (cum == j)
                slot_delta[j][pick] = delta[pick]
                slot_p[j][pick] = p[pick]
            cum += act
        idx_c, prob_c = [], []
        small = self.total < 2**31
        for pattern in itertools.product((0, 1), repeat=max_act):
            idx = self.fail_flat.copy()
            prob = np.ones(self.total)
            for j, bit in enumerate(pattern):
                if bit:
                    idx += slot_delta[j]
                    prob *= slot_p[j]
                else:
                    prob *= 1.0 - slot_p[j]
            idx_c.append(idx.astype(np.int32) if small else idx)
            prob_c.append(prob)
        return g, idx_c, prob_c

    def evaluate(
        self,
        actions: np.ndarray,
        m_active: int,
        gamma: float,
        tol: float,
        v0: np.ndarray | None = None,
        max_iter: int = 100_000,
    ) -> np.ndarray:
        """Fixed point of the policy's expected-cost operator, flat C-order."""
        g, idx_c, prob_c = self.transition_tables(actions, m_active)
        v = np.zeros(self.total) if v0 is None else np.array(v0, dtype=float)
        acc = np.empty(self.total)
        buf = np.empty(self.total)
        stop = tol * (1.0 - gamma) / (2.0 * gamma)
        for _ in range(max_iter):
            acc.fill(0.0)
            for idx, prob in zip(idx_c, prob_c):
                np.take(v, idx, out=buf)
                buf *= prob
                acc += buf
            acc *= gamma
            acc += g
            np.subtract(acc, v, out=buf)
            np.abs(buf, out=buf)
            diff = float(buf.max())
            v, acc = acc, v
            if diff <= stop:
                return v
        raise JointBudgetError(f"policy evaluation did not converge in {max_iter} sweeps")


def _decoupled_warm_start(arms: list[ArmSpec], gamma: float, shape: tuple) -> np.ndarray:
    v = np.zeros(shape)
    for i, arm in enumerate(arms):
        vt, _, _ = value_iteration(arm.params, gamma, tol=1e-6)
        view = [1] * len(shape)
        view[i] = shape[i]
        v = v + vt.values.reshape(view)
    return v


def _apply_arm_op(dst, src, kernel: _ArmKernel, u: int, axis: int, tmp) -> None:
    """dst <- expected src over arm ``axis`` taking action ``u`` (clipped kernel)."""
    if u == IDLE:
        np.take(src, kernel.up, axis=axis, out=dst)
        return
    lam = kernel.lam4[u]
    np.take(src, kernel.next_succ[:, u], axis=axis, out=dst)
    dst *= lam
    np.take(src, kernel.up, axis=axis, out=tmp)
    tmp *= 1.0 - lam
    dst += tmp


class _JointSweeper:
    """Optimality-operator sweeps over the product space, single precision.

    Shares the partial expectation over a suffix of the arms across every
    joint action with the same suffix assignment (depth-first with one buffer
    per axis). The leaf recursion enforces exactly ``m_active`` active arms.
    """

    def __init__(self, kernels, shape, m_active: int, gamma: float, combos):
        self.kernels = kernels
        self.m_active = m_active
        self.gamma = gamma
        self.n_arms = len(shape)
        self.base_m = np.zeros(shape, dtype=np.float32)
        for i, ker in enumerate(kernels):
            view = [1] * self.n_arms
            view[i] = shape[i]
            self.base_m += ker.m.reshape(view).astype(np.float32)
        self.bufs = [np.empty(shape, dtype=np.float32) for _ in range(self.n_arms)]
        self.tmp = np.empty(shape, dtype=np.float32)
        self.combo_key = {tuple(int(x) for x in c): j for j, c in enumerate(combos)}
        self.mask = None

    def _actions_at(self, axis: int, n_act: int):
        out = []
        if n_act < self.m_active:
            out.extend((0, 1, 2))
        if axis >= self.m_active - n_act:  # enough arms left to fill the budget
            out.append(IDLE)
        return out

    def min_sweep(self, v32: np.ndarray, out: np.ndarray) -> None:
        out.fill(np.inf)
        tmp, gamma = self.tmp, self.gamma

        def rec(axis, src, n_act, cost):
            if axis < 0:
                np.multiply(src, gamma, out=tmp)
                np.add(tmp, cost, out=tmp)
                np.minimum(out, tmp, out=out)
                return
            for u in self._actions_at(axis, n_act):
                _apply_arm_op(self.bufs[axis], src, self.kernels[axis], u, axis, tmp)
                rec(
                    axis - 1,
                    self.bufs[axis],
                    n_act + (u != IDLE),
                    cost + self.kernels[axis].cost4[u],
                )

        rec(self.n_arms - 1, v32, 0, 0.0)
        out += self.base_m

    def argmin_sweep(self, v32: np.ndarray, best: np.ndarray, ids: np.ndarray) -> None:
        best.fill(np.inf)
        if self.mask is None:
            self.mask = np.empty(best.shape, dtype=bool)
        tmp, mask, gamma = self.tmp, self.mask, self.gamma

        def rec(axis, src, n_act, cost, picked):
            if axis < 0:
                np.multiply(src, gamma, out=tmp)
                np.add(tmp, cost, out=tmp)
                np.less(tmp, best, out=mask)
                np.copyto(best, tmp, where=mask)
                np.copyto(ids, self.combo_key[picked], where=mask)
                return
            for u in self._actions_at(axis, n_act):
                _apply_arm_op(self.bufs[axis], src, self.kernels[axis], u, axis, tmp)
                rec(
                    axis - 1,
                    self.bufs[axis],
                    n_act + (u != IDLE),
                    cost + self.kernels[axis].cost4[u],
                    (u,) + picked,
                )

        rec(self.n_arms - 1, v32, 0, 0.0, ())


def exact_joint_dp(
    arms: list[ArmSpec],
    m_active: int,
    gamma: float,
    tol: float = 1e-8,
    max_bytes: float = 6e9,
    vi_diff: float = 1e-3,
    max_rounds: int = 12,
):
    """Globally optimal cost of a small fleet, with exactly ``m_active`` served per slot.

    Runs single-precision value-iteration sweeps from a decoupled warm start
    until the sweep difference falls below ``vi_diff``, then alternates policy
    extraction with exact double-precision policy evaluation until the policy
    is stable. Returns (normalized cost (1-gamma)*V(all ones)/N, policy
    handle); the cost comes from the exact evaluation of the final policy.
    """
    check_gamma(gamma)
    n_arms = len(arms)
    if not (1 <= m_active <= n_arms):
        raise ValueError(f"m_active must lie in [1, {n_arms}], got {m_active}")
    shape = _joint_guard(arms, n_tensors=8, max_bytes=max_bytes)
    kernels = [_ArmKernel(a.params) for a in arms]
    combos = _allowed_combos(n_arms, m_active)
    sweeper = _JointSweeper(kernels, shape, m_active, gamma, combos)

    warm = _decoupled_warm_start(arms, gamma, shape)
    v32 = warm.astype(np.float32)
    v_next = np.empty_like(v32)
    for _ in range(200):
        sweeper.min_sweep(v32, v_next)
        diff = float(np.max(np.abs(v_next - v32)))
        v32, v_next = v_next, v32
        if diff <= vi_diff:
            break

    context = JointEvalContext(arms, max_bytes=max_bytes)
    ids = np.empty(shape, dtype=np.int16)
    prev_ids = None
    v64 = warm.ravel().copy()
    j = None
    for _ in range(max_rounds):
        sweeper.argmin_sweep(v32, v_next, ids)
        if prev_ids is not None and np.array_equal(ids, prev_ids):
            break
        prev_ids = ids.copy()
        actions = combos[ids.ravel()]
        v64 = context.evaluate(actions, m_active, gamma, tol=tol, v0=v64)
        j_new = float((1.0 - gamma) / n_arms * v64[0])
        if j is not None and j - j_new <= 1e-10:
            j = min(j, j_new)
            break
        j = j_new
        v32 = v64.reshape(shape).astype(np.float32)
    else:
        raise JointBudgetError(f"policy iteration did not stabilize in {max_rounds} rounds")

    policy = JointPolicy(
        combo_ids=prev_ids.ravel(), combos=combos, shape=shape, m_active=m_active
    )
    return j, policy


def evaluate_policy_exact(
    arms: list[ArmSpec],
    m_active: int,
    gamma: float,
    scheduler,
    tol: float = 1e-8,
    max_bytes: float = 6e9,
    context: JointEvalContext | None = None,
) -> float:
    """Fixed-point evaluation of a deterministic scheduler on the product space.

    Returns the normalized cost (1-gamma)/N * V(all ones). Stochastic
    schedulers are rejected; estimate those with ``simulate``. Pass a shared
    ``JointEvalContext`` to evaluate several policies on one fleet cheaply.
    """
    check_gamma(gamma)
    if not getattr(scheduler, "deterministic", False):
        raise ValueError("exact evaluation needs a deterministic scheduler")
    n_arms = len(arms)
    if not (1 <= m_active <= n_arms):
        raise ValueError(f"m_active must lie in [1, {n_arms}], got {m_active}")
    if context is None:
        context = JointEvalContext(arms, max_bytes=max_bytes)
    actions = scheduler.batch_actions(context.states, m_active)
    v = context.evaluate(actions, m_active, gamma, tol=tol)
    return float((1.0 - gamma) / n_arms * v[0])
