"""Command line front end: configs, artifacts, manifests, caching."""

import json
import os

import pytest

from aoi_isac.cli import ConfigError, main, parse_config, run, validate_config
from aoi_isac.io_utils import sha256_file


def write_config(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


SMALL_ARM = {"lambdas": [0.75, 0.95, 0.65], "costs": [5, 5.5, 6], "trunc_a": 8}
CLASSES = [
    {"lambdas": [0.95, 0.98, 0.90], "costs": [7, 7, 7], "trunc_a": 5},
    {"lambdas": [0.60, 0.80, 0.55], "costs": [5, 5, 5], "trunc_a": 5},
]


class TestParseConfig:
    def test_missing_file(self):
        with pytest.raises(ConfigError, match="not found"):
            parse_config("/nonexistent/cfg.json")

    def test_minimal_solve_single_parses(self, tmp_path):
        path = write_config(
            tmp_path, "c.json", {"mode": "solve-single", "arm": SMALL_ARM, "gamma": 0.85}
        )
        cfg = parse_config(path)
        assert cfg.mode == "solve-single"

    def test_probability_ordering_rejected_with_reason(self):
        bad = {"lambdas": [0.5, 0.9, 0.6], "costs": [1, 2, 3], "trunc_a": 5}
        with pytest.raises(ConfigError, match="lam2 <= lam0"):
            validate_config({"mode": "solve-single", "arm": bad, "gamma": 0.5})

    def test_m_not_below_n_rejected(self):
        with pytest.raises(ConfigError, match="m_active"):
            validate_config(
                {
                    "mode": "simulate",
                    "classes": CLASSES,
                    "gamma": 0.5,
                    "n_arms": 4,
                    "m_active": 4,
                    "policy": "greedy",
                }
            )

    def test_all_errors_collected(self):
        try:
            validate_config(
                {
                    "mode": "simulate",
                    "classes": CLASSES,
                    "gamma": 1.5,
                    "n_arms": 2,
                    "m_active": 3,
                    "policy": "nope",
                    "replications": 0,
                }
            )
        except ConfigError as exc:
            assert len(exc.errors) >= 3
        else:
            pytest.fail("expected ConfigError")

    def test_subcommand_mode_mismatch(self, tmp_path):
        path = write_config(
            tmp_path, "c.json", {"mode": "verify", "arm": SMALL_ARM, "gamma": 0.85}
        )
        with pytest.raises(ConfigError, match="subcommand"):
            parse_config(path, mode="solve-single")


class TestRunArtifacts:
    def test_truncation_table_defaults_match_selector(self, tmp_path):
        out = tmp_path / "out"
        code = main(["truncation-table", "--out", str(out)])
        assert code == 0
        rows = (out / "truncation_levels.csv").read_text().strip().splitlines()
        assert rows[0] == "eps_hat,gamma,trunc_a"
        assert len(rows) == 1 + 35
        cells = {}
        for line in rows[1:]:
            e, g, a = line.split(",")
            cells[(float(e), float(g))] = int(a)
        assert cells[(0.1, 0.85)] == 26 and cells[(0.001, 0.95)] == 194

    def test_solve_single_writes_and_reruns_byte_identical(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "c.json",
            {"mode": "solve-single", "arm": SMALL_ARM, "gamma": 0.85, "tol": 1e-8},
        )
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["solve-single", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["solve-single", "--config", cfg, "--out", str(out2)]) == 0
        for name in ("values.csv", "policy.csv", "thresholds.json"):
            assert sha256_file(str(out1 / name)) == sha256_file(str(out2 / name))
        manifest = json.loads((out1 / "manifest.json").read_text())
        for entry in manifest["outputs"]:
            assert sha256_file(str(out1 / entry["path"])) == entry["sha256"]

    def test_verify_mode_passes_on_admissible_config(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "c.json",
            {"mode": "verify", "arm": SMALL_ARM, "gamma": 0.85, "tol": 1e-9},
        )
        out = tmp_path / "v"
        assert main(["verify", "--config", cfg, "--out", str(out)]) == 0
        report = json.loads((out / "verify_report.json").read_text())
        assert report["report"]["all_passed"]

    def test_invalid_config_exits_2_with_report(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "bad.json",
            {
                "mode": "solve-single",
                "arm": {"lambdas": [0.5, 0.9, 0.6], "costs": [1, 2, 3], "trunc_a": 5},
                "gamma": 0.5,
            },
        )
        out = tmp_path / "bad"
        assert main(["solve-single", "--config", cfg, "--out", str(out)]) == 2
        report = json.loads((out / "error_report.json").read_text())
        assert any("lam2" in e for e in report["errors"])

    def test_index_cache_round_trip(self, tmp_path):
        arm = {"lambdas": [0.60, 0.80, 0.55], "costs": [5, 5, 5], "trunc_a": 5}
        cfg = write_config(
            tmp_path,
            "w.json",
            {
                "mode": "whittle",
                "arm": arm,
                "gamma": 0.5,
                "eps": 1e-5,
                "cache": {"dir": str(tmp_path / "cache"), "reuse": True},
            },
        )
        out1, out2 = tmp_path / "w1", tmp_path / "w2"
        assert main(["whittle", "--config", cfg, "--out", str(out1)]) == 0
        assert main(["whittle", "--config", cfg, "--out", str(out2)]) == 0
        m1 = json.loads((out1 / "index_meta.json").read_text())
        m2 = json.loads((out2 / "index_meta.json").read_text())
        assert not m1["cache_hit"] and m2["cache_hit"]
        assert (out1 / "index.csv").read_text() == (out2 / "index.csv").read_text()

    def test_awip_mode_writes_approximate_kind(self, tmp_path):
        arm = {"lambdas": [0.60, 0.80, 0.55], "costs": [5, 5, 5], "trunc_a": 5}
        cfg = write_config(tmp_path, "a.json", {"mode": "awip", "arm": arm, "gamma": 0.5, "eps": 1e-5})
        out = tmp_path / "a"
        assert main(["awip", "--config", cfg, "--out", str(out)]) == 0
        body = (out / "index.csv").read_text()
        assert ",approximate" in body and ",exact" not in body

    def test_simulate_mode_sweeps_policies(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "s.json",
            {
                "mode": "simulate",
                "classes": CLASSES,
                "gamma": 0.5,
                "n_arms": 2,
                "m_active": 1,
                "policy": ["greedy", "random"],
                "horizon": 30,
                "replications": 50,
                "seed": 5,
            },
        )
        out = tmp_path / "s"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "sim_results.csv").read_text().strip().splitlines()
        assert len(lines) == 3 and lines[1].startswith("greedy,2,1,")

    def test_exact_dp_mode_reports_gaps(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "e.json",
            {
                "mode": "exact-dp",
                "classes": CLASSES,
                "gamma": 0.5,
                "n_arms": 2,
                "m_active": 1,
                "tol": 1e-7,
                "policies": ["wip"],
                "eps": 1e-5,
            },
        )
        out = tmp_path / "e"
        assert main(["exact-dp", "--config", cfg, "--out", str(out)]) == 0
        lines = (out / "exact_dp.csv").read_text().strip().splitlines()
        assert lines[1].startswith("optimal,")
        wip_row = [l for l in lines if l.startswith("wip,")][0]
        gap = abs(float(wip_row.split(",")[2]))
        assert gap < 0.5  # near-optimal on this tiny fleet

    def test_seed_override_changes_random_results(self, tmp_path):
        base = {
            "mode": "simulate",
            "classes": CLASSES,
            "gamma": 0.5,
            "n_arms": 2,
            "m_active": 1,
            "policy": "random",
            "horizon": 20,
            "replications": 40,
            "seed": 5,
        }
        cfg = write_config(tmp_path, "s.json", base)
        outa, outb = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", cfg, "--out", str(outa)]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(outb), "--seed", "99"]) == 0
        ja = (outa / "sim_results.csv").read_text().splitlines()[1].split(",")[4]
        jb = (outb / "sim_results.csv").read_text().splitlines()[1].split(",")[4]
        assert ja != jb
