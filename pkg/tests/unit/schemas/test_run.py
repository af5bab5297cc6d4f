import math

import pytest
from pydantic import ValidationError

from app.core.errors import InvalidExponentError
from app.schemas.run import Command, OutputFormat, RunConfig, parse_g_strategy


def make_config(**overrides) -> RunConfig:
    fields = {
        "command": Command.BOUND,
        "problem_path": "pt.json",
        "s_grid": ["1", "inf"],
        "eta_grid": ["2"],
        "tol": 1e-8,
    }
    fields.update(overrides)
    return RunConfig(**fields)


def test_parse_g_strategy():
    """Test auto, inv_r and positive constants"""
    assert parse_g_strategy("auto") == "auto"
    assert parse_g_strategy(" inv_r ") == "inv_r"
    assert parse_g_strategy("c=2.5") == 2.5

    for text in ["c=0", "c=-1", "c=abc", "g=1"]:
        with pytest.raises(ValueError):
            parse_g_strategy(text)


def test_run_config():
    """Test a valid configuration"""
    config = make_config(g_strategy="c=4")

    assert config.s_grid == [1.0, math.inf]
    assert config.g_strategy == 4.0
    assert config.format == OutputFormat.JSON
    assert config.trials is None


def test_run_config_rejects_bad_values():
    """Test tolerance, grids, g and command requirements"""
    with pytest.raises(ValidationError):
        make_config(tol=0)
    with pytest.raises(ValidationError):
        make_config(s_grid=[])
    with pytest.raises(ValidationError):
        make_config(g_strategy="c=0")
    with pytest.raises(ValidationError):
        make_config(problem_path=None)
    with pytest.raises(ValidationError):
        make_config(command=Command.SWEEP, format=OutputFormat.TEXT)
    with pytest.raises(InvalidExponentError):
        make_config(s_grid=["1/2"])


def test_catalogue_needs_no_problem():
    """Test that the catalogue command runs without --problem"""
    config = make_config(command=Command.CATALOGUE, problem_path=None)
    assert config.problem_path is None
