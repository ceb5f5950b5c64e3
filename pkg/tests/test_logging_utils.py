import logging
import sys
from datetime import datetime, timezone
from logging.handlers import RotatingFileHandler
from pathlib import Path

import pytest

from modules import logging_utils

@pytest.fixture(autouse=True)
def reset_logging_state(isolated_logging, monkeypatch):
    monkeypatch.delenv("MPOMDP_LOG_ROOT", raising=False)
    monkeypatch.delenv("MPOMDP_OUTPUT_DIR", raising=False)
    logging_utils._resolve_log_directory.cache_clear()
    yield isolated_logging

def bare_root(monkeypatch) -> logging.Logger:
    """Root logger without pytest's capture handlers; call inside the test body."""
    root_logger = logging.getLogger()
    monkeypatch.setattr(root_logger, "handlers", [])
    return root_logger


@pytest.mark.unit
def test_log_root_resolution_order(monkeypatch, tmp_path):
    assert logging_utils._resolve_log_directory() == Path("outputs") / "logs"

    monkeypatch.setenv("MPOMDP_OUTPUT_DIR", str(tmp_path / "runs"))
    logging_utils._resolve_log_directory.cache_clear()
    assert logging_utils._resolve_log_directory() == tmp_path / "runs" / "logs"

    monkeypatch.setenv("MPOMDP_LOG_ROOT", str(tmp_path / "override"))
    logging_utils._resolve_log_directory.cache_clear()
    assert logging_utils._resolve_log_directory() == tmp_path / "override" / "logs"

@pytest.mark.unit
def test_log_file_name():
    when = datetime(2025, 3, 9, 14, 5, 0, tzinfo=timezone.utc)
    assert logging_utils.log_file_name("mission_compare", when) == "mission_compare_20250309T140500Z.log"
    assert logging_utils.log_file_name(None, when) == "mission_run_20250309T140500Z.log"


@pytest.mark.unit
def test_configure_logging_writes_under_log_root(tmp_path, monkeypatch):
    monkeypatch.setenv("MPOMDP_LOG_ROOT", str(tmp_path))
    root_logger = bare_root(monkeypatch)
    log_file = logging_utils.configure_logging(run_name="mission_verify", enable_console_logging=False)

    assert log_file.parent == tmp_path / "logs"
    assert log_file.name.startswith("mission_verify_")
    assert [type(h) for h in root_logger.handlers] == [RotatingFileHandler]

    logging.getLogger("modules.planner").info("[MISSION] seed=0 outcome=Success")
    root_logger.handlers[0].flush()
    assert "[INFO] modules.planner - [MISSION] seed=0 outcome=Success" in log_file.read_text(encoding="utf-8")

@pytest.mark.unit
def test_configure_logging_is_configured_once(tmp_path, monkeypatch):
    monkeypatch.setenv("MPOMDP_LOG_ROOT", str(tmp_path))
    root_logger = bare_root(monkeypatch)
    first = logging_utils.configure_logging(run_name="mission_run", enable_console_logging=False)
    second = logging_utils.configure_logging(
        run_name="mission_other", enable_console_logging=False, log_level=logging.DEBUG
    )

    assert first == second
    assert len(root_logger.handlers) == 1
    assert root_logger.level == logging.DEBUG

@pytest.mark.unit
def test_console_echo_added_later_goes_to_stderr(tmp_path, monkeypatch):
    monkeypatch.setenv("MPOMDP_LOG_ROOT", str(tmp_path))
    root_logger = bare_root(monkeypatch)

    logging_utils.configure_logging(enable_console_logging=False)
    assert logging_utils._console_handlers(root_logger) == []

    logging_utils.configure_logging(enable_console_logging=True)
    logging_utils.configure_logging(enable_console_logging=True)
    consoles = logging_utils._console_handlers(root_logger)
    assert len(consoles) == 1
    assert consoles[0].stream is sys.stderr

@pytest.mark.unit
@pytest.mark.parametrize(
    "message, max_length, expected",
    [
        (None, 10, None),
        ("", 10, None),
        ("short", 10, "short"),
        ("x" * 25, 10, "x" * 10 + "... [+15 chars]"),
    ],
)
def test_truncate_error_message(message, max_length, expected):
    assert logging_utils.truncate_error_message(message, max_length) == expected
