"""Config-driven command line front end.

Subcommands: ``solve-single``, ``truncation-table``, ``whittle``, ``awip``,
``simulate``, ``exact-dp``, ``verify``. Each reads a JSON configuration,
writes CSV/JSON artifacts plus a run manifest (config echo, tool version,
per-phase wall-clock, output digests) into the output directory, and exits 0
on success. Validation failures produce a machine-readable error report and a
nonzero exit code. See the README for the configuration schema.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .io_utils import digest_key, sha256_file, write_csv, write_json
from .mdp_core import IDLE, ArmParams, age_arrays
from .rmab import (
    ArmSpec,
    SimConfig,
    build_fleet,
    evaluate_policy_exact,
    exact_joint_dp,
    make_scheduler,
    simulate,
)
from .single_source import (
    extract_thresholds,
    truncation_level,
    value_iteration,
    verify_structure,
)
from .whittle import IndexTable, approx_index_table, exact_index_table

MODES = (
    "solve-single",
    "truncation-table",
    "whittle",
    "awip",
    "simulate",
    "exact-dp",
    "verify",
)

# Default grid of the truncation-level table (discounts x per-slot tolerances).
DEFAULT_GAMMAS = (0.50, 0.70, 0.85, 0.90, 0.95)
DEFAULT_EPS_HATS = (1.0, 5e-1, 1e-1, 5e-2, 1e-2, 5e-3, 1e-3)


class ConfigError(ValueError):
    """Carries every validation error found in a configuration."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass
class ExperimentConfig:
    mode: str
    data: dict
    path: str | None = None


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _parse_arm(obj, errors: list[str], where: str) -> ArmParams | None:
    if not isinstance(obj, dict):
        errors.append(f"{where}: expected an object with lambdas/costs/trunc_a")
        return None
    lam = obj.get("lambdas")
    costs = obj.get("costs")
    trunc_a = obj.get("trunc_a")
    if not (isinstance(lam, list) and len(lam) == 3):
        errors.append(f"{where}.lambdas: expected a list of 3 probabilities")
        return None
    if not (isinstance(costs, list) and len(costs) == 3):
        errors.append(f"{where}.costs: expected a list of 3 costs")
        return None
    if not isinstance(trunc_a, int):
        errors.append(f"{where}.trunc_a: expected an integer")
        return None
    try:
        return ArmParams(
            lam0=float(lam[0]),
            lam1=float(lam[1]),
            lam2=float(lam[2]),
            c0=float(costs[0]),
            c1=float(costs[1]),
            c2=float(costs[2]),
            trunc_a=trunc_a,
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"{where}: {exc}")
        return None


def _need_gamma(data, errors) -> float | None:
    gamma = data.get("gamma")
    if not isinstance(gamma, (int, float)) or not (0.0 < gamma < 1.0):
        errors.append("gamma: expected a number in (0, 1)")
        return None
    return float(gamma)


def _positive(data, key, errors, default=None):
    val = data.get(key, default)
    if val is None:
        errors.append(f"{key}: required positive number")
        return None
    if not isinstance(val, (int, float)) or val <= 0:
        errors.append(f"{key}: expected a positive number, got {val!r}")
        return None
    return val


def _as_int_list(val):
    if isinstance(val, int):
        return [val]
    return list(val)


def _parse_fleet(data, errors) -> list[ArmParams] | None:
    """Returns the parameter classes; explicit arms become one class each."""
    if "arms" in data:
        arms = data["arms"]
        if not isinstance(arms, list) or not arms:
            errors.append("arms: expected a non-empty list of arm objects")
            return None
        parsed = [_parse_arm(a, errors, f"arms[{i}]") for i, a in enumerate(arms)]
        return None if any(p is None for p in parsed) else parsed
    if "classes" in data:
        classes = data["classes"]
        if not isinstance(classes, list) or not classes:
            errors.append("classes: expected a non-empty list of arm objects")
            return None
        parsed = [_parse_arm(c, errors, f"classes[{i}]") for i, c in enumerate(classes)]
        return None if any(p is None for p in parsed) else parsed
    errors.append("fleet: expected either 'arms' or 'classes'")
    return None


def validate_config(data: dict, mode: str | None = None) -> ExperimentConfig:
    errors: list[str] = []
    cfg_mode = data.get("mode", mode)
    if cfg_mode not in MODES:
        raise ConfigError([f"mode: expected one of {MODES}, got {cfg_mode!r}"])
    if mode is not None and cfg_mode != mode:
        raise ConfigError([f"mode: config says {cfg_mode!r} but the {mode!r} subcommand was invoked"])

    if cfg_mode in ("solve-single", "whittle", "awip", "verify"):
        _parse_arm(data.get("arm"), errors, "arm")
        _need_gamma(data, errors)
        if cfg_mode == "solve-single" or cfg_mode == "verify":
            _positive(data, "tol", errors, default=1e-6)
        else:
            _positive(data, "eps", errors, default=1e-6)
    elif cfg_mode == "truncation-table":
        gammas = data.get("gammas", list(DEFAULT_GAMMAS))
        eps_hats = data.get("eps_hats", list(DEFAULT_EPS_HATS))
        if not all(isinstance(g, (int, float)) and 0 < g < 1 for g in gammas):
            errors.append("gammas: every entry must lie in (0, 1)")
        if not all(isinstance(e, (int, float)) and e > 0 for e in eps_hats):
            errors.append("eps_hats: every entry must be positive")
    elif cfg_mode in ("simulate", "exact-dp"):
        classes = _parse_fleet(data, errors)
        gamma = _need_gamma(data, errors)
        n_list = _as_int_list(data.get("n_arms", len(data.get("arms", [])) or 0))
        m_list = _as_int_list(data.get("m_active", 0))
        if len(m_list) == 1 and len(n_list) > 1:
            m_list = m_list * len(n_list)
        if len(m_list) != len(n_list):
            errors.append("m_active: give one value, or one per n_arms entry")
        for n, m in zip(n_list, m_list):
            if n < 1:
                errors.append(f"n_arms: expected >= 1, got {n}")
            if not (1 <= m < n):
                errors.append(f"m_active: need 1 <= m_active < n_arms, got M={m}, N={n}")
        if cfg_mode == "simulate":
            policies = data.get("policy", "wip")
            policies = [policies] if isinstance(policies, str) else list(policies)
            for p in policies:
                if p not in ("wip", "awip", "greedy", "random", "fixed"):
                    errors.append(f"policy: unknown policy {p!r}")
            if not isinstance(data.get("replications", 1), int) or data.get("replications", 1) < 1:
                errors.append("replications: expected an integer >= 1")
            if not isinstance(data.get("horizon", 200), int) or data.get("horizon", 200) < 1:
                errors.append("horizon: expected an integer >= 1")
        else:
            for p in data.get("policies", []):
                if p not in ("wip", "awip", "greedy", "random"):
                    errors.append(f"policies: unknown policy {p!r}")
            if classes is not None and gamma is not None and len(n_list) == 1:
                if n_list[0] > 4:
                    errors.append("exact-dp: at most 4 arms are supported")
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(mode=cfg_mode, data=data)


def parse_config(path: str, mode: str | None = None) -> ExperimentConfig:
    """Load and validate a JSON configuration; raises ConfigError listing all problems."""
    if not os.path.exists(path):
        raise ConfigError([f"config file not found: {path}"])
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"]) from exc
    cfg = validate_config(data, mode)
    cfg.path = path
    return cfg


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


class _Run:
    """Collects artifacts and timings, then writes the manifest."""

    def __init__(self, out_dir: str, cfg: ExperimentConfig):
        self.out_dir = out_dir
        self.cfg = cfg
        self.timings: dict[str, float] = {}
        self.outputs: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def record(self, name: str) -> None:
        self.outputs.append(name)

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.path(name), header, rows)
        self.record(name)

    def json(self, name: str, obj) -> None:
        write_json(self.path(name), obj)
        self.record(name)

    def finish(self) -> None:
        manifest = {
            "mode": self.cfg.mode,
            "tool_version": __version__,
            "config": self.cfg.data,
            "timings_sec": self.timings,
            "outputs": [
                {"path": name, "sha256": sha256_file(self.path(name))}
                for name in self.outputs
            ],
        }
        write_json(self.path("manifest.json"), manifest)


class _phase:
    def __init__(self, run: _Run, name: str):
        self.run, self.name = run, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.run.timings[self.name] = self.run.timings.get(self.name, 0.0) + (
            time.perf_counter() - self.t0
        )
        return False


def _threshold_rows_jsonable(rows, trunc_a: int):
    out = []
    for r in rows:
        out.append(
            {
                "bs_age": r.bs_age,
                "tau1": trunc_a + 1 if math.isinf(r.tau1) else int(r.tau1),
                "tau1_inf": bool(math.isinf(r.tau1)),
                "tau2": trunc_a + 1 if math.isinf(r.tau2) else int(r.tau2),
                "tau2_inf": bool(math.isinf(r.tau2)),
            }
        )
    return out


def _arm_jsonable(p: ArmParams) -> dict:
    return {
        "lambdas": [p.lam0, p.lam1, p.lam2],
        "costs": [p.c0, p.c1, p.c2],
        "trunc_a": p.trunc_a,
    }


def _state_rows(trunc_a: int, *columns):
    m, b = age_arrays(trunc_a)
    for i in range(m.size):
        yield (int(m[i]), int(b[i])) + tuple(col[i] for col in columns)


# ---------------------------------------------------------------------------
# Mode runners
# ---------------------------------------------------------------------------


def _run_solve_single(cfg: ExperimentConfig, run: _Run) -> int:
    data = cfg.data
    params = _parse_arm(data["arm"], [], "arm")
    gamma = float(data["gamma"])
    tol = float(data.get("tol", 1e-6))
    with _phase(run, "solve"):
        values, policy, iters = value_iteration(params, gamma, tol)
    with _phase(run, "verify"):
        report = verify_structure(values, policy, params, gamma, tol=data.get("tol_check", 1e-8))
        thresholds = extract_thresholds(policy)
    with _phase(run, "write"):
        run.csv(
            "values.csv",
            ["monitor_age", "bs_age", "value"],
            _state_rows(params.trunc_a, [float(v) for v in values.values]),
        )
        run.csv(
            "policy.csv",
            ["monitor_age", "bs_age", "action"],
            _state_rows(params.trunc_a, [int(a) for a in policy.actions]),
        )
        run.json(
            "thresholds.json",
            {
                "arm": _arm_jsonable(params),
                "gamma": gamma,
                "tol": tol,
                "iterations": iters,
                "thresholds": _threshold_rows_jsonable(thresholds, params.trunc_a),
                "verification": report.as_dict(),
            },
        )
    return 0


def _run_truncation_table(cfg: ExperimentConfig, run: _Run) -> int:
    gammas = cfg.data.get("gammas", list(DEFAULT_GAMMAS))
    eps_hats = cfg.data.get("eps_hats", list(DEFAULT_EPS_HATS))
    with _phase(run, "table"):
        rows = [
            (float(e), float(g), truncation_level(float(g), float(e)))
            for e in eps_hats
            for g in gammas
        ]
    with _phase(run, "write"):
        run.csv("truncation_levels.csv", ["eps_hat", "gamma", "trunc_a"], rows)
    return 0


def _cache_paths(data: dict) -> tuple[str | None, bool]:
    cache = data.get("cache", {})
    return cache.get("dir"), bool(cache.get("reuse", False))


def _save_index_cache(path: str, table: IndexTable) -> None:
    meta = {
        "kind": table.kind,
        "trunc_a": table.trunc_a,
        "indexable": table.indexable,
        "eps": table.eps,
        "bracket_failures": list(table.bracket_failures),
    }
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".npz")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(
                fh,
                index=table.index,
                active_action=table.active_action,
                meta=json.dumps(meta),
            )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_index_cache(path: str) -> IndexTable:
    with np.load(path) as d:
        meta = json.loads(str(d["meta"]))
        return IndexTable(
            index=d["index"],
            kind=meta["kind"],
            trunc_a=meta["trunc_a"],
            active_action=d["active_action"],
            indexable=meta["indexable"],
            eps=meta["eps"],
            bracket_failures=tuple(meta["bracket_failures"]),
        )


def _run_index(cfg: ExperimentConfig, run: _Run, kind: str) -> int:
    data = cfg.data
    params = _parse_arm(data["arm"], [], "arm")
    gamma = float(data["gamma"])
    eps = float(data.get("eps", 1e-6))
    k_max = int(data.get("k_max", 200))
    cache_dir, reuse = _cache_paths(data)
    key = digest_key(
        {
            "arm": _arm_jsonable(params),
            "gamma": gamma,
            "eps": eps,
            "k_max": k_max,
            "algorithm": kind,
            "version": __version__,
        }
    )
    cache_file = os.path.join(cache_dir, f"index-{key}.npz") if cache_dir else None
    cache_hit = False
    if cache_file and reuse and os.path.exists(cache_file):
        with _phase(run, "build_index"):
            table = _load_index_cache(cache_file)
        cache_hit = True
    else:
        builder = exact_index_table if kind == "exact" else approx_index_table
        with _phase(run, "build_index"):
            table = builder(params, gamma, eps=eps, k_max=k_max)
        if cache_file:
            _save_index_cache(cache_file, table)
    with _phase(run, "write"):
        run.csv(
            "index.csv",
            ["monitor_age", "bs_age", "index", "kind"],
            _state_rows(
                params.trunc_a,
                [float(x) for x in table.index],
                [table.kind] * params.n_states,
            ),
        )
        run.json(
            "index_meta.json",
            {
                "arm": _arm_jsonable(params),
                "gamma": gamma,
                "eps": eps,
                "k_max": k_max,
                "kind": table.kind,
                "indexable": table.indexable,
                "bracket_failures": list(table.bracket_failures),
                "offline_seconds": run.timings.get("build_index", 0.0),
                "cache_hit": cache_hit,
                "cache_key": key if cache_file else None,
            },
        )
    return 0


def _fleet_for(classes: list[ArmParams], data: dict, n: int) -> list[ArmSpec]:
    if "arms" in data:
        if n != len(classes):
            raise ConfigError(
                [f"n_arms={n} does not match the {len(classes)} explicit arm entries"]
            )
        return [ArmSpec(arm_id=i, params=p) for i, p in enumerate(classes)]
    return build_fleet(classes, n)


def _run_simulate(cfg: ExperimentConfig, run: _Run, seed_override: int | None) -> int:
    data = cfg.data
    classes = _parse_fleet(data, [])
    gamma = float(data["gamma"])
    n_list = _as_int_list(data.get("n_arms", len(data.get("arms", []))))
    m_list = _as_int_list(data["m_active"])
    if len(m_list) == 1:
        m_list = m_list * len(n_list)
    policies = data.get("policy", "wip")
    policies = [policies] if isinstance(policies, str) else list(policies)
    seed = int(data.get("seed", 0)) if seed_override is None else seed_override
    horizon = int(data.get("horizon", 200))
    reps = int(data.get("replications", 10_000))
    eps = float(data.get("eps", 1e-6))
    rows = []
    for n, m in zip(n_list, m_list):
        arms = _fleet_for(classes, data, n)
        for pol in policies:
            with _phase(run, f"tables[{pol}]"):
                sched = make_scheduler(
                    pol, arms, gamma, eps=eps, fixed_action=int(data.get("fixed_action", IDLE))
                )
            sim_cfg = SimConfig(
                gamma=gamma,
                horizon=horizon,
                replications=reps,
                m_active=m,
                seed=seed,
                policy=pol,
                fixed_action=int(data.get("fixed_action", IDLE)),
            )
            with _phase(run, f"simulate[{pol}]"):
                res = simulate(arms, sim_cfg, sched)
            rows.append(
                (pol, n, m, gamma, res.mean_j, res.ci_half_width_99, reps, seed)
            )
    with _phase(run, "write"):
        run.csv(
            "sim_results.csv",
            ["policy", "n_arms", "m_active", "gamma", "mean_j", "ci99", "replications", "seed"],
            rows,
        )
    return 0


def _run_exact_dp(cfg: ExperimentConfig, run: _Run, seed_override: int | None) -> int:
    data = cfg.data
    classes = _parse_fleet(data, [])
    gamma = float(data["gamma"])
    n = _as_int_list(data.get("n_arms", len(data.get("arms", []))))[0]
    m = _as_int_list(data["m_active"])[0]
    tol = float(data.get("tol", 1e-6))
    eps = float(data.get("eps", 1e-6))
    policies = data.get("policies", ["wip", "awip", "greedy", "random"])
    seed = int(data.get("seed", 0)) if seed_override is None else seed_override
    arms = _fleet_for(classes, data, n)
    with _phase(run, "joint_dp"):
        j_dp, _handle = exact_joint_dp(arms, m, gamma, tol=tol)
    rows = [("optimal", j_dp, 0.0, "exact-dp", 0.0)]
    for pol in policies:
        if pol == "random":
            sim_cfg = SimConfig(
                gamma=gamma,
                horizon=int(data.get("horizon", 200)),
                replications=int(data.get("random_replications", 100_000)),
                m_active=m,
                seed=seed,
                policy="random",
            )
            with _phase(run, "random_mc"):
                sched = make_scheduler("random", arms, gamma, eps=eps)
                res = simulate(arms, sim_cfg, sched)
            j, ci = res.mean_j, res.ci_half_width_99
            method = "monte-carlo"
        else:
            with _phase(run, f"evaluate[{pol}]"):
                sched = make_scheduler(pol, arms, gamma, eps=eps)
                j = evaluate_policy_exact(arms, m, gamma, sched, tol=tol)
            ci = 0.0
            method = "exact-eval"
        rows.append((pol, j, 100.0 * (j - j_dp) / j_dp, method, ci))
    with _phase(run, "write"):
        run.csv(
            "exact_dp.csv",
            ["policy", "j", "gap_pct", "method", "ci99"],
            rows,
        )
    return 0


def _run_verify(cfg: ExperimentConfig, run: _Run) -> int:
    data = cfg.data
    params = _parse_arm(data["arm"], [], "arm")
    gamma = float(data["gamma"])
    tol = float(data.get("tol", 1e-6))
    tol_check = float(data.get("tol_check", 1e-8))
    with _phase(run, "solve"):
        values, policy, iters = value_iteration(params, gamma, tol)
    with _phase(run, "verify"):
        report = verify_structure(values, policy, params, gamma, tol=tol_check)
    with _phase(run, "write"):
        run.json(
            "verify_report.json",
            {
                "arm": _arm_jsonable(params),
                "gamma": gamma,
                "tol": tol,
                "tol_check": tol_check,
                "iterations": iters,
                "report": report.as_dict(),
            },
        )
    if not report.all_passed:
        run.json(
            "error_report.json",
            {
                "error": "structural checks failed",
                "failed_checks": [
                    c.name for c in report.checks if c.asserted and not c.passed
                ],
            },
        )
        return 1
    return 0


def run(cfg: ExperimentConfig, out_dir: str, seed_override: int | None = None, threads: int | None = None) -> int:
    """Execute a validated configuration; writes artifacts and the manifest."""
    runner = _Run(out_dir, cfg)
    if threads is not None:
        runner.timings["threads_requested"] = float(threads)
    try:
        if cfg.mode == "solve-single":
            code = _run_solve_single(cfg, runner)
        elif cfg.mode == "truncation-table":
            code = _run_truncation_table(cfg, runner)
        elif cfg.mode == "whittle":
            code = _run_index(cfg, runner, "exact")
        elif cfg.mode == "awip":
            code = _run_index(cfg, runner, "approximate")
        elif cfg.mode == "simulate":
            code = _run_simulate(cfg, runner, seed_override)
        elif cfg.mode == "exact-dp":
            code = _run_exact_dp(cfg, runner, seed_override)
        elif cfg.mode == "verify":
            code = _run_verify(cfg, runner)
        else:  # pragma: no cover - guarded by validate_config
            raise ConfigError([f"unknown mode {cfg.mode!r}"])
    except ConfigError as exc:
        runner.json("error_report.json", {"errors": exc.errors})
        runner.finish()
        return 2
    except Exception as exc:  # propagate details, keep the artifact contract
        runner.json(
            "error_report.json", {"error": str(exc), "type": type(exc).__name__}
        )
        runner.finish()
        return 1
    runner.finish()
    return code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="aoi-isac",
        description="Two-age scheduling experiments: solvers, indices, simulations.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument(
            "--config",
            required=mode != "truncation-table",
            help="JSON configuration file (optional for truncation-table)",
        )
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="recorded in the manifest; solvers in this build are single-threaded",
        )
    args = parser.parse_args(argv)
    try:
        if args.config is None:
            cfg = validate_config({"mode": args.mode}, args.mode)
        else:
            cfg = parse_config(args.config, args.mode)
    except ConfigError as exc:
        os.makedirs(args.out, exist_ok=True)
        write_json(os.path.join(args.out, "error_report.json"), {"errors": exc.errors})
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    return run(cfg, args.out, seed_override=args.seed, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
