"""Command-line contract: exit codes, flags, environment seed override."""

import pytest
from click.testing import CliRunner

from plotwright.cli import main

from .conftest import FIXTURES

KAKTUS = str(FIXTURES / "kaktus.plot")


@pytest.fixture()
def runner():
    return CliRunner()


class TestCompile:
    def test_clean_compile_exits_zero(self, runner, tmp_path):
        out = tmp_path / "dump.txt"
        result = runner.invoke(main, ["compile", KAKTUS, "--minimize", "hopcroft", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert "states 9 -> 9" in result.output
        assert out.read_text().startswith("start q1")

    def test_brzozowski_choice(self, runner):
        result = runner.invoke(main, ["compile", KAKTUS, "--minimize", "brzozowski"])
        assert result.exit_code == 0
        assert "states 9 -> 9" in result.output

    def test_lint_error_exits_one(self, runner, tmp_path, kaktus_text):
        bad = tmp_path / "bad.plot"
        bad.write_text(
            kaktus_text.replace("scene u1 undesirable kernel", "scene u1 undesirable end kernel")
        )
        result = runner.invoke(main, ["compile", str(bad)])
        assert result.exit_code == 1
        assert "E1" in result.output

    def test_parse_error_exits_two(self, runner, tmp_path):
        bad = tmp_path / "bad.plot"
        bad.write_text("not a scenario")
        result = runner.invoke(main, ["compile", str(bad)])
        assert result.exit_code == 2

    def test_missing_file_exits_two(self, runner):
        result = runner.invoke(main, ["compile", "/nonexistent/x.plot"])
        assert result.exit_code == 2

    def test_dot_output(self, runner, tmp_path):
        dot = tmp_path / "graph.dot"
        result = runner.invoke(main, ["compile", KAKTUS, "--dump-dot", str(dot), "--out", str(tmp_path / "d.txt")])
        assert result.exit_code == 0
        assert dot.read_text().startswith("digraph")


class TestSimulate:
    def test_basic_run(self, runner):
        result = runner.invoke(
            main,
            ["simulate", KAKTUS, "--runs", "5", "--seed", "7", "--policy", "random",
             "--horizon", "12", "--tsv"],
        )
        assert result.exit_code == 0, result.output
        assert "unrecovered 0" in result.output
        tsv_lines = [l for l in result.output.splitlines() if l and l[0].isdigit()]
        assert len(tsv_lines) == 5

    def test_zero_runs_is_empty_report(self, runner):
        result = runner.invoke(main, ["simulate", KAKTUS, "--runs", "0"])
        assert result.exit_code == 0
        assert "runs: 0" in result.output

    def test_env_seed_override(self, runner):
        with_flag = runner.invoke(
            main,
            ["simulate", KAKTUS, "--runs", "1", "--seed", "3", "--policy", "random", "--tsv"],
        )
        with_env = runner.invoke(
            main,
            ["simulate", KAKTUS, "--runs", "1", "--seed", "99", "--policy", "random", "--tsv"],
            env={"PLOT_SEED": "3"},
        )
        line = lambda r: [l for l in r.output.splitlines() if l and l[0].isdigit()][0]
        assert line(with_flag) == line(with_env)

    def test_no_anticipator_flag(self, runner):
        result = runner.invoke(
            main,
            ["simulate", KAKTUS, "--runs", "10", "--seed", "0", "--policy", "random",
             "--no-anticipator"],
        )
        assert result.exit_code == 0
        assert "anticipator: off" in result.output


class TestBench:
    def test_geometric_growth_visible(self, runner):
        result = runner.invoke(main, ["bench", "--scenes", "16", "--depth", "4"])
        assert result.exit_code == 0
        nodes = [int(l.split()[-1]) for l in result.output.splitlines() if "nodes" in l]
        assert nodes == [1, 4, 13, 40, 121]
        beats = [int(l.split()[-1]) for l in result.output.splitlines() if "beats" in l]
        assert beats == [1, 2, 3, 4]

    def test_tiny_bench(self, runner):
        result = runner.invoke(main, ["bench", "--scenes", "2", "--depth", "2", "--branching", "1"])
        assert result.exit_code == 0
