import json

import pytest
from click.testing import CliRunner

from tweezerlab.cli import _parse_durations, main
from tweezerlab.protocols import load_protocol


@pytest.fixture()
def runner():
    return CliRunner()


class TestParseDurations:
    def test_comma_list(self):
        assert _parse_durations("0.1,0.16") == [0.1, 0.16]

    def test_range_inclusive(self):
        assert _parse_durations("0.10:0.02:0.14") == [0.10, 0.12, 0.14]


class TestSeedCommand:
    def test_writes_valid_protocol(self, runner, tmp_path):
        out = tmp_path / "seed.json"
        result = runner.invoke(main, ["seed", "--kind", "cubic",
                                      "--duration", "0.1", "--out", str(out)])
        assert result.exit_code == 0, result.output
        p = load_protocol(out)
        assert p.n_steps == 40
        assert p.positions[0] == pytest.approx(0.55)

    def test_kinds(self, runner, tmp_path):
        for kind in ("cubic", "linear", "uniform", "kass"):
            out = tmp_path / f"{kind}.json"
            result = runner.invoke(main, ["seed", "--kind", kind,
                                          "--duration", "0.1",
                                          "--out", str(out)])
            assert result.exit_code == 0, result.output
            load_protocol(out)


class TestScoreCommand:
    def test_outputs_fidelity_json(self, runner, tmp_path):
        seed = tmp_path / "p.json"
        runner.invoke(main, ["seed", "--kind", "cubic", "--duration", "0.02",
                             "--out", str(seed)])
        result = runner.invoke(main, ["score", "--protocol", str(seed),
                                      "--grid", "64"])
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        assert 0.0 <= doc["fidelity"] <= 1.0
        assert doc["qsl_pass"] is False


class TestSaCommand:
    def test_runs_and_writes_records(self, runner, tmp_path):
        out = tmp_path / "runs.jsonl"
        result = runner.invoke(main, ["sa", "--duration", "0.02", "--steps", "8",
                                      "--positions", "8", "--grid", "64",
                                      "--seeds", "2", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "best fidelity" in result.output
        lines = out.read_text(encoding="utf-8").strip().split("\n")
        assert len(lines) == 2


class TestGradientCommands:
    def test_grape_smoke(self, runner, tmp_path):
        out = tmp_path / "runs.jsonl"
        result = runner.invoke(main, ["grape", "--duration", "0.02",
                                      "--steps", "8", "--schedule", "32",
                                      "--restarts", "1", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert out.exists()

    def test_krotov_smoke(self, runner, tmp_path):
        out = tmp_path / "runs.jsonl"
        result = runner.invoke(main, ["krotov", "--duration", "0.02",
                                      "--steps", "8", "--schedule", "32",
                                      "--restarts", "1", "--out", str(out)])
        assert result.exit_code == 0, result.output

    def test_file_init(self, runner, tmp_path):
        seed = tmp_path / "seed.json"
        runner.invoke(main, ["seed", "--kind", "linear", "--duration", "0.02",
                             "--steps", "8", "--out", str(seed)])
        out = tmp_path / "runs.jsonl"
        result = runner.invoke(main, ["grape", "--duration", "0.02",
                                      "--steps", "8", "--schedule", "32",
                                      "--init", f"file:{seed}",
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output


class TestHeatmapCommand:
    def test_csv_and_ridge(self, runner, tmp_path):
        runs = tmp_path / "runs.jsonl"
        runner.invoke(main, ["sa", "--duration", "0.02", "--steps", "8",
                             "--positions", "8", "--grid", "64",
                             "--seeds", "3", "--out", str(runs)])
        heat = tmp_path / "heat.csv"
        ridge = tmp_path / "ridge.json"
        result = runner.invoke(main, ["heatmap", "--runs", str(runs),
                                      "--top", "2", "--out", str(heat),
                                      "--ridge", str(ridge)])
        assert result.exit_code == 0, result.output
        assert heat.read_text(encoding="utf-8").startswith(
            "step,bin_low,bin_high,count,channel")
        assert load_protocol(ridge).n_steps == 8

    def test_empty_runs_file(self, runner, tmp_path):
        runs = tmp_path / "runs.jsonl"
        runs.write_text("", encoding="utf-8")
        result = runner.invoke(main, ["heatmap", "--runs", str(runs),
                                      "--out", str(tmp_path / "h.csv")])
        assert result.exit_code != 0


class TestSweepAndQsl:
    def test_sweep_then_qsl(self, runner, tmp_path):
        store = tmp_path / "store"
        result = runner.invoke(main, ["sweep", "--algo", "grape",
                                      "--durations", "0.02",
                                      "--restarts", "1", "--store", str(store),
                                      "--schedule", "32,64"])
        assert result.exit_code == 0, result.output
        assert "T=0.02" in result.output
        assert "QSL: not reached" in result.output
        result = runner.invoke(main, ["qsl", "--store", str(store),
                                      "--algo", "grape", "--grid", "64"])
        assert result.exit_code == 0, result.output
        assert "not reached" in result.output

    def test_qsl_empty_store(self, runner, tmp_path):
        store = tmp_path / "store"
        store.mkdir()
        result = runner.invoke(main, ["qsl", "--store", str(store),
                                      "--algo", "sa"])
        assert result.exit_code != 0


class TestExciteCommand:
    def test_writes_csv(self, runner, tmp_path):
        seed = tmp_path / "p.json"
        runner.invoke(main, ["seed", "--kind", "cubic", "--duration", "0.02",
                             "--steps", "8", "--out", str(seed)])
        out = tmp_path / "ex.csv"
        result = runner.invoke(main, ["excite", "--protocol", str(seed),
                                      "--levels", "5", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = out.read_text(encoding="utf-8").strip().split("\n")
        assert lines[0] == "step,level,population"
        assert len(lines) == 1 + 9 * 5
