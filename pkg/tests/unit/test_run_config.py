import pytest
import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'backend', 'evolution'))

from evolution_errors import (
    EXIT_FALSE,
    EXIT_UNKNOWN,
    EXIT_USAGE,
    AbsorptionFailed,
    AmalgamationFailed,
    BudgetExceeded,
    ConfigError,
    IllegalMove,
    InvalidMatch,
    NoNormalizedObject,
)
from run_config import RunConfig, default_budget, log_level, sanitize_log_input


class TestSanitizeLogInput:
    def test_strips_control_characters(self):
        assert sanitize_log_input("line1\nline2\r\tend") == "line1line2end"

    def test_strips_escape_and_c1_characters(self):
        assert sanitize_log_input("a\x00b\x1b[31mc\x7fd\x85e") == "ab[31mcde"

    def test_keeps_composition_labels(self):
        assert sanitize_log_input("s∘h") == "s∘h"

    def test_truncates(self):
        assert len(sanitize_log_input("x" * 500)) == 200
        assert sanitize_log_input("abcdef", max_length=3) == "abc"

    def test_non_strings(self):
        assert sanitize_log_input(42) == "42"


class TestEnvironmentDefaults:
    def test_budget_from_environment(self, monkeypatch):
        monkeypatch.setenv("EVOLVE_BUDGET_DEFAULT", "40")
        assert default_budget() == 40
        assert RunConfig().budget == 40

    def test_empty_variable_uses_default(self, monkeypatch):
        monkeypatch.setenv("EVOLVE_BUDGET_DEFAULT", "")
        assert default_budget() == 16

    def test_bad_integer(self, monkeypatch):
        monkeypatch.setenv("EVOLVE_SEED", "seven")
        with pytest.raises(ConfigError):
            RunConfig()

    def test_log_level(self, monkeypatch):
        monkeypatch.setenv("EVOLVE_LOG_LEVEL", "debug")
        assert log_level() == "DEBUG"


class TestRunConfig:
    def test_defaults_validate(self):
        config = RunConfig().validate()
        assert config.system == "graph"
        assert config.strict_equality

    @pytest.mark.parametrize("overrides", [
        {"budget": 0},
        {"depth": -1},
        {"node_cap": 0},
        {"max_size": -1},
        {"system": "tensor"},
        {"report_format": "xml"},
    ])
    def test_validation(self, overrides):
        with pytest.raises(ConfigError):
            RunConfig(**overrides).validate()

    def test_merged_skips_none(self):
        config = RunConfig(budget=8).merged(budget=None, depth=5, system="chain")
        assert config.budget == 8
        assert config.depth == 5
        assert config.system == "chain"

    def test_as_dict_echo(self):
        assert RunConfig(seed=3).as_dict()["seed"] == 3


class TestFromYaml:
    def test_loads_mapping(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("system: linorder\ndepth: 5\n")
        config = RunConfig.from_yaml(str(path))
        assert config.system == "linorder"
        assert config.depth == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_yaml(str(tmp_path / "absent.yaml"))

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("system: [unclosed\n")
        with pytest.raises(ConfigError):
            RunConfig.from_yaml(str(path))

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- graph\n- chain\n")
        with pytest.raises(ConfigError):
            RunConfig.from_yaml(str(path))

    def test_unknown_keys(self, tmp_path):
        path = tmp_path / "typo.yaml"
        path.write_text("sytem: graph\n")
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_yaml(str(path))
        assert excinfo.value.details["keys"] == ["sytem"]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert RunConfig.from_yaml(str(path)).system == "graph"


class TestErrors:
    @pytest.mark.parametrize("error,code", [
        (ConfigError("bad"), EXIT_USAGE),
        (InvalidMatch("bad"), EXIT_USAGE),
        (BudgetExceeded("depth", 4), EXIT_UNKNOWN),
        (AmalgamationFailed("open"), EXIT_FALSE),
        (AbsorptionFailed("open", 2), EXIT_FALSE),
        (IllegalMove("cheat", player="odd"), EXIT_FALSE),
        (NoNormalizedObject("none"), EXIT_FALSE),
    ])
    def test_exit_codes(self, error, code):
        assert error.exit_code == code

    def test_budget_to_dict(self):
        data = BudgetExceeded("transition_budget", 16).to_dict()
        assert data["error"] == "BudgetExceeded"
        assert data["budget"] == {"name": "transition_budget", "limit": 16}
        assert data["message"] == "transition_budget exhausted at 16"

    def test_details_are_kept(self):
        error = AbsorptionFailed("nothing absorbs", 3, stage=7)
        assert error.round_index == 3
        assert error.details == {"round": 3, "stage": 7}
