import csv
import json
from pathlib import Path

import pytest

from fairliq.cli import (
    BASELINE_COLUMNS,
    EVAL_COLUMNS,
    FIG1_COLUMNS,
    FIG2_COLUMNS,
    apply_overrides,
    main,
)
from fairliq.experiment import Scenario, ScenarioError, desk_scenario

TINY_OVERRIDES = [
    "train.episodes=2",
    "train.minibatch_size=16",
    "train.buffer_capacity=200",
    "train.hidden_sizes=[8,8]",
    "metrics_window=2",
]


@pytest.fixture
def tiny_scenario_file(tmp_path):
    sc = desk_scenario()
    data = sc.to_dict()
    # two small agents keep the runtime negligible
    data["agents"] = data["agents"][2:4]
    path = tmp_path / "tiny.json"
    sc = Scenario.from_dict(data)
    sc.save(path)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestOverrides:
    def test_dotted_paths(self):
        data = desk_scenario().to_dict()
        apply_overrides(data, ["train.episodes=7", "market.eta=1e-4", "name=\"x\""])
        assert data["train"]["episodes"] == 7
        assert data["market"]["eta"] == 1e-4
        assert data["name"] == "x"

    def test_list_indexing(self):
        data = desk_scenario().to_dict()
        apply_overrides(data, ["agents.0.risk_aversion=0.0"])
        assert data["agents"][0]["risk_aversion"] == 0.0

    def test_unknown_key_rejected(self):
        data = desk_scenario().to_dict()
        with pytest.raises(ScenarioError, match="unknown override"):
            apply_overrides(data, ["train.warp_speed=1"])

    def test_malformed_pair_rejected(self):
        with pytest.raises(ScenarioError, match="key=value"):
            apply_overrides({}, ["loose-string"])


class TestEmitScenario:
    def test_writes_loadable_scenario(self, tmp_path):
        out = tmp_path / "desk.json"
        assert main(["emit-scenario", "desk", "--out", str(out)]) == 0
        sc = Scenario.load(out)
        assert sc.name == "desk"
        assert sc.to_dict() == desk_scenario().to_dict()

    def test_override_applies(self, tmp_path):
        out = tmp_path / "desk.json"
        assert main(["emit-scenario", "desk", "--out", str(out), "--set", "train.episodes=42"]) == 0
        assert Scenario.load(out).train.episodes == 42


class TestTrainCommand:
    def run_train(self, scenario_file, out, extra=()):
        argv = ["train", scenario_file, "--fairness", "off", "--seed", "1", "--out", str(out)]
        for item in TINY_OVERRIDES:
            argv += ["--set", item]
        argv += list(extra)
        return main(argv)

    def test_run_directory_contents(self, tiny_scenario_file, tmp_path):
        out = tmp_path / "run"
        assert self.run_train(tiny_scenario_file, out) == 0
        assert (out / "log.jsonl").exists()
        assert (out / "checkpoint.json").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seed"] == 1
        assert manifest["scenario"]["train"]["episodes"] == 2
        assert "reward_scales" in manifest

    def test_byte_identical_reruns(self, tiny_scenario_file, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        assert self.run_train(tiny_scenario_file, out1) == 0
        assert self.run_train(tiny_scenario_file, out2) == 0
        for name in ("log.jsonl", "checkpoint.json", "manifest.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_single_episode_gives_one_record_per_agent(self, tiny_scenario_file, tmp_path):
        out = tmp_path / "run"
        assert self.run_train(
            tiny_scenario_file, out, extra=["--set", "train.episodes=1", "--set", "metrics_window=1"]
        ) == 0
        lines = (out / "log.jsonl").read_text().strip().splitlines()
        assert len(lines) == 2  # J agents, one episode

    def test_malformed_scenario_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        out = tmp_path / "run"
        assert main(["train", str(bad), "--out", str(out)]) == 2
        assert "line" in capsys.readouterr().err

    def test_unknown_override_exits_2(self, tiny_scenario_file, tmp_path):
        assert (
            main(
                [
                    "train",
                    tiny_scenario_file,
                    "--out",
                    str(tmp_path / "x"),
                    "--set",
                    "nope=1",
                ]
            )
            == 2
        )

    def test_missing_scenario_exits_2(self, tmp_path):
        assert main(["train", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x")]) == 2


class TestBaselineCommand:
    def test_csv_schema_and_determinism(self, tiny_scenario_file, tmp_path):
        out1, out2 = tmp_path / "b1", tmp_path / "b2"
        assert main(["baseline", tiny_scenario_file, "--out", str(out1)]) == 0
        assert main(["baseline", tiny_scenario_file, "--out", str(out2)]) == 0
        rows = read_csv(out1 / "baseline_metrics.csv")
        assert rows[0] == BASELINE_COLUMNS
        assert len(rows) == 3  # header + 2 agents
        assert (out1 / "baseline_metrics.csv").read_bytes() == (
            out2 / "baseline_metrics.csv"
        ).read_bytes()

    def test_single_agent_risk_neutral_matches_uniform_formula(self, tmp_path):
        sc = desk_scenario()
        data = sc.to_dict()
        data["agents"] = [{"initial_shares": 3000.0, "risk_aversion": 0.0, "label": "solo"}]
        f = tmp_path / "solo.json"
        Scenario.from_dict(data).save(f)
        out = tmp_path / "b"
        assert main(["baseline", str(f), "--out", str(out)]) == 0
        rows = read_csv(out / "baseline_metrics.csv")
        header, row = rows[0], rows[1]
        per_share = float(row[header.index("per_share_shortfall")])
        p = sc.market
        n_per_step = 3000.0 / p.num_trades
        # uniform selling: within-step cost eps + (eta/tau) n, plus the
        # triangular permanent-impact drag, per share
        want_total = (
            p.epsilon * 3000.0
            + (p.eta / p.tau) * n_per_step * 3000.0
            + p.gamma * n_per_step * n_per_step * (p.num_trades - 1) * p.num_trades / 2.0
        )
        assert per_share == pytest.approx(want_total / 3000.0, rel=1e-9)


class TestCompareCommand:
    def test_outputs_and_schemas(self, tiny_scenario_file, tmp_path):
        out = tmp_path / "cmp"
        argv = ["compare", tiny_scenario_file, "--seeds", "1,2", "--out", str(out)]
        for item in TINY_OVERRIDES:
            argv += ["--set", item]
        assert main(argv) == 0

        report = json.loads((out / "report.json").read_text())
        assert len(report["runs"]) == 4

        fig1 = read_csv(out / "fig1_convergence.csv")
        assert fig1[0] == FIG1_COLUMNS
        assert len(fig1) == 1 + 4 * 2  # 4 runs x 2 episodes

        fig2 = read_csv(out / "fig2_distribution.csv")
        assert fig2[0] == FIG2_COLUMNS
        assert len(fig2) == 1 + 4 * 2  # one row per run per agent
        variants = {row[0] for row in fig2[1:]}
        assert variants == {"plain", "ggi"}


class TestEvaluateCommand:
    def test_eval_after_train(self, tiny_scenario_file, tmp_path):
        run_dir = tmp_path / "run"
        argv = ["train", tiny_scenario_file, "--fairness", "off", "--seed", "1", "--out", str(run_dir)]
        for item in TINY_OVERRIDES:
            argv += ["--set", item]
        assert main(argv) == 0
        out = tmp_path / "eval"
        assert main(["evaluate", str(run_dir), "--episodes", "3", "--seed", "5", "--out", str(out)]) == 0
        rows = read_csv(out / "eval_metrics.csv")
        assert rows[0] == EVAL_COLUMNS
        assert len(rows) == 1 + 3 * 2  # episodes x agents

    def test_missing_manifest_exits_2(self, tmp_path):
        assert main(["evaluate", str(tmp_path), "--out", str(tmp_path / "e")]) == 2
