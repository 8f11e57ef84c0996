"""Tests for the command-line entry point."""

import copy
import os
from unittest.mock import Mock, patch

import pytest

from EmbodySim.app import (
    EXIT_DETERMINISM,
    EXIT_ENVIRONMENT,
    EXIT_OK,
    EXIT_USAGE,
    build_parser,
    cmd_eval,
    cmd_serve,
    cmd_validate,
    main,
    run_command,
)
from EmbodySim.config import DEFAULT_CONFIG, RunConfig
from EmbodySim.errors import DatasetError, DeterminismError, SceneValidationError
from EmbodySim.services.replay import DatasetAudit


@pytest.fixture
def run():
    return RunConfig(**copy.deepcopy(DEFAULT_CONFIG))


@pytest.fixture(autouse=True)
def no_log_file():
    with patch("EmbodySim.app.setup_logging", return_value=None) as mock_setup:
        yield mock_setup


class TestParser:
    """Test cases for argument parsing."""

    def test_usage_error_exits_1(self, capsys):
        """Test that a bad argument exits with the usage code."""
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["gen", "--scenes", "many"])
        assert excinfo.value.code == EXIT_USAGE
        assert "invalid int value" in capsys.readouterr().err

    def test_command_required(self):
        """Test that running without a command is a usage error."""
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args([])
        assert excinfo.value.code == EXIT_USAGE

    def test_eval_policies_repeat(self):
        """Test that --policy can be given more than once."""
        args = build_parser().parse_args(
            ["eval", "--policy", "no_interaction", "--policy", "interactive_trained"]
        )
        assert args.policy == ["no_interaction", "interactive_trained"]
        assert args.benchmark == "twin_retrieval"


class TestRunCommand:
    """Test cases for override resolution and dispatch."""

    def test_gen_overrides(self, run):
        """Test that gen flags land in their config sections."""
        args = build_parser().parse_args(
            ["gen", "--scenes", "3", "--seed", "5", "--tasks-per-scene", "2"]
        )
        with patch("EmbodySim.app.RunConfig.from_config", return_value=run) as from_config:
            with patch("EmbodySim.app.cmd_gen", return_value=EXIT_OK) as cmd_gen:
                assert run_command(args) == EXIT_OK
        overrides = from_config.call_args[0][1]
        assert overrides["generation.scenes"] == 3
        assert overrides["generation.seed"] == 5
        assert overrides["generation.workers"] is None
        assert overrides["taskgen.tasks_per_scene"] == 2
        cmd_gen.assert_called_once_with(run)

    def test_serve_dispatch(self, run):
        """Test that serve passes the stdio flag through."""
        args = build_parser().parse_args(["serve", "--stdio", "--port", "9000"])
        with patch("EmbodySim.app.RunConfig.from_config", return_value=run) as from_config:
            with patch("EmbodySim.app.cmd_serve", return_value=EXIT_OK) as serve:
                run_command(args)
        assert from_config.call_args[0][1]["server.port"] == 9000
        serve.assert_called_once_with(run, True)

    def test_replay_dispatch(self, run):
        """Test that replay gets the dataset and episode id."""
        args = build_parser().parse_args(["replay", "d.jsonl", "s00000-t00"])
        with patch("EmbodySim.app.RunConfig.from_config", return_value=run):
            with patch("EmbodySim.app.cmd_replay", return_value=EXIT_OK) as replay:
                run_command(args)
        replay.assert_called_once_with("d.jsonl", "s00000-t00")


class TestExitCodes:
    """Test cases for error-to-exit-code mapping in main."""

    @pytest.mark.parametrize(
        "error,code",
        [
            (DatasetError("catalog hash mismatch"), EXIT_USAGE),
            (SceneValidationError("generation.seed must be an explicit integer"), EXIT_USAGE),
            (DeterminismError("s0: stream differs"), EXIT_DETERMINISM),
            (PermissionError("read-only"), EXIT_ENVIRONMENT),
        ],
    )
    def test_errors(self, error, code, capsys):
        """Test each error class against its exit code."""
        with patch("EmbodySim.app.run_command", side_effect=error):
            assert main(["validate", "d.jsonl"]) == code
        assert str(error) in capsys.readouterr().err

    def test_success(self):
        """Test that a clean run returns 0."""
        with patch("EmbodySim.app.run_command", return_value=EXIT_OK):
            assert main(["replay", "d.jsonl", "x"]) == EXIT_OK

    def test_debug_flag_enables_file_logging(self, no_log_file):
        """Test that -d turns on file logging."""
        with patch("EmbodySim.app.run_command", return_value=EXIT_OK):
            main(["-d", "replay", "d.jsonl", "x"])
        no_log_file.assert_called_once_with(True)

    def test_config_flag_sets_environment(self, tmp_path, monkeypatch):
        """Test that --config is handed on through EMBODYSIM_CONFIG."""
        monkeypatch.delenv("EMBODYSIM_CONFIG", raising=False)
        path = tmp_path / "EmbodySim.yaml"
        with patch("EmbodySim.app.run_command", return_value=EXIT_OK):
            main(["--config", str(path), "replay", "d.jsonl", "x"])
        assert os.environ["EMBODYSIM_CONFIG"] == str(path)


class TestCommands:
    """Test cases for the command functions."""

    def test_validate_with_problems(self, capsys):
        """Test that validation problems exit with 3 and are printed."""
        audit = DatasetAudit(episodes=2, problems=["s0: bad"])
        with patch("EmbodySim.services.replay.validate_dataset", return_value=audit):
            assert cmd_validate("d.jsonl", replay=False) == EXIT_DETERMINISM
        out = capsys.readouterr().out
        assert "s0: bad" in out
        assert "2 episodes, 1 problems" in out

    def test_validate_clean(self):
        """Test that a clean dataset exits with 0."""
        with patch(
            "EmbodySim.services.replay.validate_dataset",
            return_value=DatasetAudit(episodes=4),
        ):
            assert cmd_validate("d.jsonl", replay=True) == EXIT_OK

    def test_bind_failure(self, run, capsys):
        """Test that a taken port exits with 2."""
        with patch("EmbodySim.services.protocol_server.build_server", return_value=Mock()):
            with patch(
                "EmbodySim.services.protocol_server.bind_tcp",
                side_effect=OSError("Address already in use"),
            ):
                assert cmd_serve(run) == EXIT_ENVIRONMENT
        assert "cannot bind" in capsys.readouterr().err

    def test_eval_unknown_benchmark(self, run, capsys):
        """Test that an unknown benchmark is a usage error."""
        assert cmd_eval(run, "juggling", None, False) == EXIT_USAGE
        assert "unknown benchmark" in capsys.readouterr().err
