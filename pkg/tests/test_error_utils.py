import json

import pytest

from modules.error_utils import (
    EXIT_INVALID_INPUT,
    EXIT_IO_FAILURE,
    EXIT_VIOLATIONS,
    ImpossibleObservation,
    ImpossibleObservationForAll,
    InvalidConfig,
    MalformedTrace,
    ModelValidationError,
    NoSafeAction,
    classify_error,
    exit_code_for,
    is_invalid_input_error,
    is_io_error,
)


@pytest.mark.unit
@pytest.mark.parametrize(
    "exc, category",
    [
        (NoSafeAction("none safe"), "SAFETY_DEADLOCK"),
        (ImpossibleObservation(0.0), "IMPOSSIBLE_OBSERVATION"),
        (ImpossibleObservationForAll("all zero"), "IMPOSSIBLE_OBSERVATION"),
        (FileNotFoundError("missing.json"), "IO_FAILURE"),
        (PermissionError("Permission denied"), "IO_FAILURE"),
        (InvalidConfig("Scenario missing required field: grid"), "INVALID_INPUT"),
        (MalformedTrace("empty"), "INVALID_INPUT"),
        (ModelValidationError(["transition row (q=0, a=0) sums to 0.5"]), "INVALID_INPUT"),
        (json.JSONDecodeError("bad", "{", 0), "INVALID_INPUT"),
        (RuntimeError("boom"), "UNKNOWN"),
    ],
)
def test_classify_error(exc, category):
    assert classify_error(exc) == category


@pytest.mark.unit
@pytest.mark.parametrize(
    "exc, code",
    [
        (InvalidConfig("bad"), EXIT_INVALID_INPUT),
        (FileNotFoundError("missing"), EXIT_IO_FAILURE),
        (NoSafeAction("none"), EXIT_VIOLATIONS),
        (RuntimeError("boom"), EXIT_VIOLATIONS),
    ],
)
def test_exit_code_for(exc, code):
    assert exit_code_for(exc) == code


@pytest.mark.unit
def test_io_error_heuristic_on_message():
    assert is_io_error(RuntimeError("No such file or directory: 'x'"))
    assert not is_io_error(RuntimeError("something else"))


@pytest.mark.unit
def test_invalid_input_heuristic():
    assert is_invalid_input_error(ValueError("alpha0 must lie in (0, 1)"))
    assert is_invalid_input_error(RuntimeError("Scenario missing required field: truth"))
    assert not is_invalid_input_error(RuntimeError("boom"))


@pytest.mark.unit
def test_invalid_config_is_value_error():
    assert issubclass(InvalidConfig, ValueError)
    assert issubclass(MalformedTrace, InvalidConfig)


@pytest.mark.unit
def test_model_validation_error_keeps_violations():
    violations = [f"violation {i}" for i in range(5)]
    exc = ModelValidationError(violations)
    assert exc.violations == violations
    assert "5 violation(s)" in str(exc)
    assert "(+2 more)" in str(exc)


@pytest.mark.unit
def test_no_safe_action_keeps_candidates():
    exc = NoSafeAction("none", candidates=[1, 2])
    assert exc.candidates == (1, 2)
    assert NoSafeAction("none").candidates == ()


@pytest.mark.unit
def test_impossible_observation_message():
    exc = ImpossibleObservation(1e-15, "a=3, z=1")
    assert exc.likelihood == 1e-15
    assert "a=3, z=1" in str(exc)
