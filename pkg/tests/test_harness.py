import csv
import io
from pathlib import Path

import numpy as np
import pytest

from markov_monitor.chain import sample_path
from markov_monitor.errors import ConfigError
from markov_monitor.harness import cli
from markov_monitor.harness.config import config_from_dict, load_config
from markov_monitor.harness.experiments import (COST_SWEEP_COLUMNS, build_policies, evaluate_policies,
                                                run_absorbing_replication, run_uniform_sweep)
from markov_monitor.harness.simulate import TrajectoryRecord, episode_rng, simulate, simulate_path
from markov_monitor.policies import HOLD_LAST, GreedyPolicy, PolicyConfig, UniformPolicy

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestSimulate:
    def test_query_every_slot(self, five):
        pol = UniformPolicy(PolicyConfig(1.7, 10, interval=1), HOLD_LAST)
        ledger, _ = simulate(five, pol, 1.7, 10, 5000, episode_rng(0))
        assert ledger.average == pytest.approx(1.7, abs=1e-12)
        assert ledger.queries == 5000

    @pytest.mark.parametrize("name", ["optimal", "greedy", "stationary", "uniform", "uniform-np", "psgd-greedy"])
    def test_ledger_identity(self, five, name):
        N, c, H = 10, 1.4, 3000
        pol = build_policies((name,), five, c, N)[name]
        ledger, rec = simulate(five, pol, c, N, H, episode_rng(3), trace=True)
        losses = sum(r[4] for r in rec.rows)
        queries = sum(r[2] == "query" for r in rec.rows)
        assert queries == ledger.queries
        assert ledger.total == pytest.approx(losses + c * queries, abs=1e-9)
        assert rec.rows[-1][5] == pytest.approx(ledger.total, abs=1e-9)
        assert H // N <= queries <= H
        # gaps between queries never exceed N
        qt = [r[0] for r in rec.rows if r[2] == "query"]
        assert qt[0] == 0 and max(np.diff(qt), default=0) <= N
        # realized losses are the loss-matrix entries of (truth, prediction)
        for t, x, kind, k, loss, _ in rec.rows:
            if kind == "predict":
                assert loss == five.loss[x, k]

    def test_trace_columns(self):
        assert TrajectoryRecord.COLUMNS == ("t", "state", "action", "predicted", "loss", "cumulative")

    def test_common_random_numbers(self, five):
        pols = build_policies(("greedy", "uniform"), five, 1.4, 10)
        recs = [simulate(five, p, 1.4, 10, 500, episode_rng(11, 0), trace=True)[1] for p in pols.values()]
        np.testing.assert_array_equal([r[1] for r in recs[0].rows], [r[1] for r in recs[1].rows])

    def test_path_independent_of_policy(self, five):
        path = sample_path(five, 0, 1000, episode_rng(5, 1))
        a, _ = simulate_path(path, five.loss, GreedyPolicy(five.table(10), five.loss, PolicyConfig(1.0)), 1.0, 10)
        b, _ = simulate(five, GreedyPolicy(five.table(10), five.loss, PolicyConfig(1.0)), 1.0, 10, 1000,
                        episode_rng(5, 1))
        assert a == b

    def test_empty_horizon(self, five):
        with pytest.raises(ValueError):
            simulate_path([], five.loss, GreedyPolicy(five.table(10), five.loss, PolicyConfig(1.0)), 1.0, 10)


class TestExperiments:
    def test_estimates_deterministic(self, five):
        pols = build_policies(("greedy", "optimal"), five, 1.4, 10)
        a = evaluate_policies(five, pols, 1.4, 10, 2000, 4, 9)
        b = evaluate_policies(five, pols, 1.4, 10, 2000, 4, 9)
        for k in a:
            np.testing.assert_array_equal(a[k].gammas, b[k].gammas)

    def test_workers_match_serial(self, five):
        pols = build_policies(("greedy", "uniform"), five, 1.4, 10)
        a = evaluate_policies(five, pols, 1.4, 10, 2000, 4, 9)
        b = evaluate_policies(five, pols, 1.4, 10, 2000, 4, 9, workers=2)
        for k in a:
            np.testing.assert_array_equal(a[k].gammas, b[k].gammas)

    def test_unknown_policy(self, five):
        with pytest.raises(ConfigError):
            build_policies(("nope",), five, 1.0, 10)

    def test_stationary_skipped_on_reducible(self, absorbing):
        assert "stationary" not in build_policies(("greedy", "stationary"), absorbing, 1.0, 10)

    def test_uniform_sweep_rows(self):
        cfg = config_from_dict({"chain": {"preset": "five-state"}, "horizon": 2000, "episodes": 2,
                                "delta_grid": [1, 2, 3]})
        rows = run_uniform_sweep(cfg)
        assert [(r["delta"], r["variant"]) for r in rows[:6]] == [
            (1, "uniform"), (1, "uniform-np"), (2, "uniform"), (2, "uniform-np"), (3, "uniform"), (3, "uniform-np")]
        assert rows[0]["gamma"] == pytest.approx(1.4)
        assert {r["variant"] for r in rows[6:]} == {"optimal", "greedy", "stationary"}

    def test_absorbing_replication(self):
        g, t = run_absorbing_replication(episodes=200, horizon=100, long_horizon=1000)
        assert abs(g["gamma"] - 0.5) < 0.1
        assert t["gamma"] == pytest.approx(2 / 1000)


class TestConfig:
    def test_shipped_configs_load(self):
        for path in CONFIGS.glob("*.yaml"):
            load_config(path)

    def test_five_state_grid(self):
        cfg = load_config(CONFIGS / "five_state.yaml")
        cs = cfg.costs()
        assert cs[0] == 0.1 and cs[-1] == 3.0 and len(cs) == 59
        np.testing.assert_array_equal(cfg.loss_matrix(), np.abs(np.subtract.outer(range(5), range(5))))

    def test_random_source(self):
        cfg = load_config(CONFIGS / "random_study.yaml")
        assert cfg.random.states == 5 and cfg.random.count == 30

    @pytest.mark.parametrize("raw", [
        {},
        {"chain": {}},
        {"chain": {"preset": "nope"}},
        {"chain": {"preset": "absorbing"}, "bogus": 1},
        {"chain": {"transition": [[0.5, 0.6], [0.5, 0.5]]}},
        {"chain": {"preset": "absorbing"}, "policies": ["bogus"]},
    ])
    def test_bad_configs(self, raw):
        with pytest.raises(ConfigError):
            config_from_dict(raw)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.yaml")

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("chain: [unclosed")
        with pytest.raises(ConfigError):
            load_config(p)


class TestCli:
    def test_plan_absorbing(self, capsys):
        assert cli.main(["plan", "--config", str(CONFIGS / "absorbing.yaml")]) == 0
        out = capsys.readouterr().out
        assert "thresholds (1, 10, 10)" in out and "gain 0.1" in out

    def test_plan_csv(self, tmp_path):
        out = tmp_path / "plan.csv"
        assert cli.main(["plan", "--config", str(CONFIGS / "absorbing.yaml"), "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert [r["threshold"] for r in rows] == ["1", "10", "10"]

    def test_missing_config(self, tmp_path, capsys):
        assert cli.main(["plan", "--config", str(tmp_path / "missing.yaml")]) == 1
        assert "error" in capsys.readouterr().err

    def test_no_config(self):
        assert cli.main(["sweep-cost"]) == 1

    def test_numeric_failure(self, tmp_path):
        p = tmp_path / "multi.yaml"
        p.write_text("chain:\n  transition:\n    - [0, 0.5, 0.5, 0]\n    - [0, 1, 0, 0]\n"
                     "    - [0, 0, 0.5, 0.5]\n    - [0, 0, 0.5, 0.5]\nloss: unit\nquery_cost: 1.0\n")
        assert cli.main(["plan", "--config", str(p)]) == 2

    def test_sweep_cost_header_and_determinism(self, tmp_path):
        args = ["sweep-cost", "--config", str(CONFIGS / "five_state.yaml"), "--horizon", "1000",
                "--episodes", "2", "--seed", "4"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(args + ["--out", str(a)]) == 0
        assert cli.main(args + ["--out", str(b)]) == 0
        text = a.read_text()
        assert text.splitlines()[0] == ",".join(COST_SWEEP_COLUMNS)
        assert text == b.read_text()
        assert len(text.splitlines()) == 1 + 59 * 5

    def test_sweep_uniform_header(self, capsys):
        assert cli.main(["sweep-uniform", "--config", str(CONFIGS / "five_state.yaml"), "--horizon", "500",
                         "--episodes", "2"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "delta,variant,gamma,stderr"

    def test_random_study_header(self, tmp_path):
        p = tmp_path / "r.yaml"
        p.write_text("chain:\n  random: {states: 3, count: 2, seed: 1}\npolicies: [optimal, greedy]\n"
                     "horizon: 500\nepisodes: 2\n")
        out = tmp_path / "r.csv"
        assert cli.main(["random-study", "--config", str(p), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "trial,policy,gamma" and len(lines) == 5

    def test_learn(self, capsys):
        assert cli.main(["learn", "--config", str(CONFIGS / "five_state.yaml"), "--gap", "2",
                         "--updates", "3000", "--every", "1000"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "update,frobenius_dist,eta" and len(lines) == 4

    def test_simulate_trace(self, tmp_path):
        out = tmp_path / "t.csv"
        assert cli.main(["simulate", "--config", str(CONFIGS / "five_state.yaml"), "--policy", "greedy",
                         "--horizon", "50", "--trace", "--out", str(out)]) == 0
        rows = list(csv.reader(io.StringIO(out.read_text())))
        assert rows[0] == list(TrajectoryRecord.COLUMNS) and len(rows) == 51

    def test_simulate_summary(self, capsys):
        assert cli.main(["simulate", "--config", str(CONFIGS / "five_state.yaml"), "--policy", "uniform",
                         "-c", "2.0", "--horizon", "200", "--episodes", "2"]) == 0
        assert capsys.readouterr().out.startswith("policy,c,gamma,stderr,queries_per_slot\nuniform,2.0,")

    def test_thm1(self, capsys):
        assert cli.main(["thm1", "--episodes", "100"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "policy,horizon,gamma,stderr"
