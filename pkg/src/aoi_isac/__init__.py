"""Age-of-information optimal sensing/communication scheduling.

Library layout:

- ``mdp_core``: two-age states, actions, transition kernel, stage costs.
- ``single_source``: truncated value iteration, threshold extraction,
  structural verification, truncation-level selection.
- ``whittle``: relaxed problem with idle subsidy, passive sets, exact and
  interpolated priority indices.
- ``rmab``: fleet schedulers, Monte Carlo evaluation, exact joint solvers.
- ``cli``: config-driven command line front end (``aoi-isac``).
"""

__version__ = "0.1.0"

from .mdp_core import (  # noqa: F401
    ACTION_NAMES,
    ACTIVE_ACTIONS,
    COMM,
    IDLE,
    JOINT,
    SENSE,
    AoiState,
    ArmParams,
    assumption1_holds,
    reachable_states,
    stage_cost,
    success_prob,
    transition,
)
from .single_source import (  # noqa: F401
    PolicyTable,
    StructureReport,
    ThresholdRow,
    ValueTable,
    bellman_backup,
    extract_thresholds,
    truncation_error_bound,
    truncation_level,
    value_iteration,
    verify_structure,
)
from .whittle import (  # noqa: F401
    IndexTable,
    PassiveSet,
    approx_index_table,
    curvature_error_bound,
    exact_index_table,
    indexable_sufficient,
    passive_set,
    relaxed_value_iteration,
    whittle_index_bisection,
)
from .rmab import (  # noqa: F401
    ArmSpec,
    FleetState,
    SimConfig,
    SimResult,
    build_fleet,
    evaluate_policy_exact,
    exact_joint_dp,
    make_scheduler,
    schedule_greedy,
    schedule_index,
    schedule_random,
    simulate,
)
