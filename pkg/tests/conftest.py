import logging
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays


# Ensure project root is importable when running tests without installing the package
PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from config import ADVERSARIAL_SCENARIO, DEFAULT_SCENARIO, TOY_MODEL  # noqa: E402
from modules import logging_utils  # noqa: E402
from modules.config_utils import load_model  # noqa: E402
from modules.model_utils import MpomdpModel  # noqa: E402


@pytest.fixture
def default_scenario_path() -> Path:
    return DEFAULT_SCENARIO


@pytest.fixture
def adversarial_scenario_path() -> Path:
    return ADVERSARIAL_SCENARIO


@pytest.fixture
def toy_model_path() -> Path:
    return TOY_MODEL


@pytest.fixture
def toy_model() -> MpomdpModel:
    """Two-agent corridor with a hazard state and noisy per-agent alarms."""
    return load_model(str(TOY_MODEL))


def corridor_model(success_reward: float = 1.0) -> MpomdpModel:
    """
    Single agent walking a -> b -> c with a 'jump' into an absorbing pit.

    Observations are uninformative, so beliefs follow the deterministic
    transitions exactly.
    """
    n_states, n_actions = 4, 3
    transition = np.zeros((n_states, n_actions, n_states))
    for q in range(n_states):
        transition[q, 0, q] = 1.0
        transition[q, 1, 3 if q == 3 else min(q + 1, 2)] = 1.0
        transition[q, 2, 3] = 1.0
    reward = np.zeros((n_states, n_actions))
    reward[:, 1] = success_reward
    reward[:, 2] = 5.0
    return MpomdpModel(
        agents=("walker",),
        states=("a", "b", "c", "pit"),
        initial_belief=np.array([1.0, 0.0, 0.0, 0.0]),
        actions_per_agent=(("stay", "right", "jump"),),
        observations_per_agent=(("none",),),
        transition=transition,
        observation_fn=np.ones((n_states, n_actions, 1)),
        reward=reward,
    )


@pytest.fixture
def corridor() -> MpomdpModel:
    return corridor_model()


@pytest.fixture
def isolated_logging(monkeypatch, tmp_path):
    """Route log files into tmp_path and restore the root logger afterwards."""
    monkeypatch.setenv("MPOMDP_LOG_ROOT", str(tmp_path / "logroot"))
    logging_utils._resolve_log_directory.cache_clear()
    for attr in ["_configured", "_log_file"]:
        if hasattr(logging_utils.configure_logging, attr):
            delattr(logging_utils.configure_logging, attr)

    root_logger = logging.getLogger()
    existing_handlers = list(root_logger.handlers)
    existing_level = root_logger.level
    yield existing_handlers

    logging_utils._resolve_log_directory.cache_clear()
    for attr in ["_configured", "_log_file"]:
        if hasattr(logging_utils.configure_logging, attr):
            delattr(logging_utils.configure_logging, attr)

    for handler in [h for h in root_logger.handlers if h not in existing_handlers]:
        root_logger.removeHandler(handler)
        handler.close()
    root_logger.setLevel(existing_level)


def _normalized(raw: np.ndarray) -> np.ndarray:
    return raw / raw.sum(axis=-1, keepdims=True)


@st.composite
def small_models(draw):
    """Random valid MPOMDPs with |Q| <= 6, <= 2 agents, |A_i| <= 3, |Z_i| <= 3."""
    n_agents = draw(st.integers(1, 2))
    action_sizes = [draw(st.integers(1, 3)) for _ in range(n_agents)]
    observation_sizes = [draw(st.integers(1, 3)) for _ in range(n_agents)]
    n_q = draw(st.integers(1, 6))
    n_a = int(np.prod(action_sizes))
    n_z = int(np.prod(observation_sizes))
    positive = st.floats(0.01, 1.0, allow_nan=False, allow_infinity=False)

    transition = _normalized(draw(arrays(np.float64, (n_q, n_a, n_q), elements=positive)))
    observation_fn = _normalized(draw(arrays(np.float64, (n_q, n_a, n_z), elements=positive)))
    p0 = _normalized(draw(arrays(np.float64, (n_q,), elements=positive)))
    reward = draw(arrays(np.float64, (n_q, n_a), elements=st.floats(-10, 10, allow_nan=False)))

    return MpomdpModel(
        agents=tuple(f"agent{i}" for i in range(n_agents)),
        states=tuple(f"q{i}" for i in range(n_q)),
        initial_belief=p0,
        actions_per_agent=tuple(tuple(f"a{j}" for j in range(k)) for k in action_sizes),
        observations_per_agent=tuple(tuple(f"z{j}" for j in range(k)) for k in observation_sizes),
        transition=transition,
        observation_fn=observation_fn,
        reward=reward,
    )
