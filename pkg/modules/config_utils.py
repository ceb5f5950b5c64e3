"""
Configuration Utilities for Models and Scenarios

Provides configuration management for missions:
- Flat MPOMDP model files (loading + validation)
- Grid world scenario files
- Declarative barrier specs and nominal policies
- Planner settings with command-line overrides
- Mission setups bundling everything a run needs
"""

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from modules import gridworld
from modules.constants import (
    ALGORITHMS,
    DEADLOCK_POLICIES,
    DEFAULT_ALGORITHM,
    DEFAULT_ALPHA0,
    DEFAULT_HORIZON,
)
from modules.dtbf_utils import BarrierSpec, Composition, ConstantKappa
from modules.error_utils import InvalidConfig, ModelValidationError
from modules.model_utils import MpomdpModel, check_belief, validate_model
from modules.planner import (
    AgentBarrier,
    BeliefModel,
    FlatBeliefModel,
    FlatWorld,
    Outcome,
    NominalPolicy,
    World,
)

logger = logging.getLogger(__name__)

MODEL_REQUIRED_FIELDS = (
    "agents",
    "states",
    "initial_belief",
    "actions",
    "observations",
    "transition",
    "observation_fn",
    "reward",
)
SCENARIO_REQUIRED_FIELDS = ("grid", "agents", "truth")
BARRIER_TYPES = ("linear-threshold", "weighted-probability")


def read_json(path: str) -> Dict[str, Any]:
    """
    Read a JSON configuration document.

    Raises:
        FileNotFoundError: If the file doesn't exist
        InvalidConfig: If the file is not valid JSON or not an object
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")

    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path} is not valid JSON: {exc}") from exc

    if not isinstance(document, dict):
        raise InvalidConfig(f"{path} must contain a JSON object")
    return document


def is_model_document(document: Mapping[str, Any]) -> bool:
    """Flat model files carry a transition table; scenario files don't."""
    return "transition" in document


# ============================================================================
# FLAT MODELS
# ============================================================================

def model_from_dict(document: Mapping[str, Any]) -> MpomdpModel:
    """
    Build and validate an MpomdpModel from its JSON form.

    Raises:
        InvalidConfig: If a required field is missing or an array is malformed
        ModelValidationError: If validate_model reports violations
    """
    for name in MODEL_REQUIRED_FIELDS:
        if name not in document:
            raise InvalidConfig(f"Model missing required field: {name}")

    try:
        model = MpomdpModel(
            agents=tuple(document["agents"]),
            states=tuple(document["states"]),
            initial_belief=np.asarray(document["initial_belief"], dtype=np.float64),
            actions_per_agent=tuple(tuple(a) for a in document["actions"]),
            observations_per_agent=tuple(tuple(z) for z in document["observations"]),
            transition=np.asarray(document["transition"], dtype=np.float64),
            observation_fn=np.asarray(document["observation_fn"], dtype=np.float64),
            reward=np.asarray(document["reward"], dtype=np.float64),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(f"Model arrays are malformed: {exc}") from exc

    violations = validate_model(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def load_model(path: str) -> MpomdpModel:
    """Load a flat model file and reject it on any validation violation."""
    model = model_from_dict(read_json(path))
    logger.info(
        f"✓ Loaded model {path}: {model.n_states} states, "
        f"{model.n_joint_actions} joint actions, {model.n_joint_observations} joint observations"
    )
    return model


def _state_weights(entry: Mapping[str, Any], n_states: int, label: str) -> np.ndarray:
    weights = np.asarray(entry.get("weights", []), dtype=np.float64)
    if weights.shape != (n_states,):
        raise InvalidConfig(f"{label}.weights must have {n_states} entries")
    return weights


def barrier_component(entry: Mapping[str, Any], n_states: int, label: str = "barrier") -> Callable:
    """
    Barrier component for flat beliefs.

    Types:
        linear-threshold: h(b) = w . b - threshold, any real weights
        weighted-probability: same form, weights restricted to [0, 1] (soft safe-set membership)
    """
    kind = entry.get("type")
    if kind not in BARRIER_TYPES:
        raise InvalidConfig(f"{label}.type must be one of {BARRIER_TYPES}, got {kind!r}")
    if "threshold" not in entry:
        raise InvalidConfig(f"{label} missing required field: threshold")

    weights = _state_weights(entry, n_states, label)
    threshold = float(entry["threshold"])
    if kind == "weighted-probability" and (np.any(weights < 0) or np.any(weights > 1)):
        raise InvalidConfig(f"{label}.weights must lie in [0, 1] for weighted-probability")

    return lambda belief: float(weights @ belief) - threshold


def barrier_spec_from_dict(
    block: Mapping[str, Any], n_states: int, alpha0: Optional[float] = None
) -> BarrierSpec:
    """
    Build a BarrierSpec from a declarative block.

    Example block:
        {"composition": "conjunction", "alpha0": 0.3,
         "components": [{"type": "linear-threshold", "weights": [...], "threshold": 0.2},
                        {"type": "weighted-probability", "weights": [...], "threshold": 0.5,
                         "negated": true}]}

    A block without ``components`` is treated as a single component entry.
    """
    entries = block.get("components") or [block]
    composition = block.get("composition", "single" if len(entries) == 1 else "conjunction")
    try:
        composition = Composition(composition)
    except ValueError as exc:
        raise InvalidConfig(f"Unknown barrier composition: {composition}") from exc

    components = [barrier_component(e, n_states, f"barrier.components[{i}]") for i, e in enumerate(entries)]
    negated = tuple(bool(e.get("negated", False)) for e in entries)
    alpha = alpha0 if alpha0 is not None else float(block.get("alpha0", DEFAULT_ALPHA0))
    try:
        return BarrierSpec(tuple(components), composition, ConstantKappa(alpha), negated)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc


def nominal_from_dict(block: Mapping[str, Any], model: MpomdpModel) -> NominalPolicy:
    """Nominal policy for flat models; only ``{"type": "constant", "action": index}`` is supported."""
    if block.get("type") != "constant":
        raise InvalidConfig(f"Unsupported nominal policy type: {block.get('type')!r}")
    index = int(block.get("action", 0))
    if not 0 <= index < model.n_joint_actions:
        raise InvalidConfig(f"Nominal action {index} out of range")
    action = model.joint_action(index)
    return lambda belief: action


def state_index(model: MpomdpModel, state: Any) -> int:
    """Resolve a state given by name or index."""
    if isinstance(state, str):
        if state not in model.states:
            raise InvalidConfig(f"Unknown state: {state}")
        return model.states.index(state)
    index = int(state)
    if not 0 <= index < model.n_states:
        raise InvalidConfig(f"State index {index} out of range")
    return index


def terminal_from_dict(block: Mapping[str, Any], model: MpomdpModel) -> Optional[Callable[[int], Outcome]]:
    """
    Termination rule from ``{"success": [states], "failure": [states]}``.

    Returns None when the block is empty; missions then run to the horizon.
    """
    success = {state_index(model, s) for s in block.get("success", [])}
    failure = {state_index(model, s) for s in block.get("failure", [])}
    if success & failure:
        raise InvalidConfig("A state cannot be both a success and a failure state")
    if not success and not failure:
        return None

    def terminal(state: int) -> Outcome:
        if state in failure:
            return Outcome.FAILURE
        if state in success:
            return Outcome.SUCCESS
        return Outcome.CONTINUE

    return terminal


# ============================================================================
# SCENARIOS
# ============================================================================

def validate_scenario(document: Mapping[str, Any]) -> None:
    """
    Validate top-level scenario structure.

    Raises:
        InvalidConfig: If validation fails
    """
    for name in SCENARIO_REQUIRED_FIELDS:
        if name not in document:
            raise InvalidConfig(f"Scenario missing required field: {name}")

    planner = document.get("planner") or {}
    algorithm = planner.get("algorithm")
    if algorithm is not None and algorithm not in ALGORITHMS:
        raise InvalidConfig(f"Unknown planner.algorithm: {algorithm}")
    policy = planner.get("deadlock_policy")
    if policy is not None and policy not in DEADLOCK_POLICIES:
        raise InvalidConfig(f"Unknown planner.deadlock_policy: {policy}")


def load_scenario(path: str) -> Tuple[gridworld.ExplorationScenario, gridworld.FactoredBelief]:
    """Load and build a grid world scenario file."""
    document = read_json(path)
    validate_scenario(document)
    return gridworld.build_scenario(document)


def apply_overrides(
    document: Mapping[str, Any], theta: Optional[float] = None, alpha0: Optional[float] = None
) -> Dict[str, Any]:
    """Copy of the document with command-line safety overrides applied."""
    updated = copy.deepcopy(dict(document))
    if is_model_document(updated):
        if theta is not None:
            raise InvalidConfig("theta only applies to grid world scenarios; flat models set it in their barrier block")
        if alpha0 is not None:
            updated.setdefault("barrier", {})["alpha0"] = alpha0
        return updated

    safety = updated.setdefault("safety", {})
    if theta is not None:
        safety["theta"] = theta
    if alpha0 is not None:
        safety["alpha0"] = alpha0
    return updated


# ============================================================================
# PLANNER SETTINGS AND MISSION SETUP
# ============================================================================

@dataclass(frozen=True)
class PlannerSettings:
    algorithm: str = DEFAULT_ALGORITHM
    horizon: int = DEFAULT_HORIZON
    seed: int = 0
    deadlock_policy: str = "abort"


def planner_settings(
    document: Mapping[str, Any],
    algorithm: Optional[str] = None,
    horizon: Optional[int] = None,
) -> PlannerSettings:
    """Planner block of a document, with command-line values taking precedence."""
    block = document.get("planner") or {}
    settings = PlannerSettings(
        algorithm=algorithm or block.get("algorithm", DEFAULT_ALGORITHM),
        horizon=int(horizon if horizon is not None else block.get("horizon", DEFAULT_HORIZON)),
        seed=int(block.get("seed", 0)),
        deadlock_policy=block.get("deadlock_policy", "abort"),
    )
    if settings.algorithm not in ALGORITHMS:
        raise InvalidConfig(f"Unknown algorithm: {settings.algorithm}")
    if settings.horizon < 1:
        raise InvalidConfig(f"horizon must be >= 1, got {settings.horizon}")
    if settings.deadlock_policy not in DEADLOCK_POLICIES:
        raise InvalidConfig(f"Unknown deadlock_policy: {settings.deadlock_policy}")
    return settings


@dataclass
class MissionSetup:
    """
    Everything needed to run missions from one configuration document.

    Attributes:
        kind: "gridworld" or "model"
        make_belief_model: Factory for a fresh BeliefModel per mission
        world: Ground-truth simulator
        spec: Barrier for greedy / filter / nominal planning and verification
        agent_barriers: Barriers for per-agent planning
        nominal: Nominal policy, if configured
        initial_belief: Belief at t = 0
        initial_state: True state at t = 0
        settings: Planner settings after overrides
        scenario / model: The underlying scenario or flat model
    """

    kind: str
    make_belief_model: Callable[[], BeliefModel]
    world: World
    spec: BarrierSpec
    initial_belief: Any
    initial_state: Any
    settings: PlannerSettings
    agent_barriers: Tuple[AgentBarrier, ...] = ()
    nominal: Optional[NominalPolicy] = None
    scenario: Optional[gridworld.ExplorationScenario] = None
    model: Optional[MpomdpModel] = None
    document: Dict[str, Any] = field(default_factory=dict)


def setup_from_document(
    document: Mapping[str, Any],
    algorithm: Optional[str] = None,
    horizon: Optional[int] = None,
) -> MissionSetup:
    """Build a MissionSetup from a scenario or flat model document."""
    settings = planner_settings(document, algorithm, horizon)

    if is_model_document(document):
        return _model_setup(document, settings)

    validate_scenario(document)
    scenario, belief = gridworld.build_scenario(document)
    return MissionSetup(
        kind="gridworld",
        make_belief_model=lambda: gridworld.GridworldBeliefModel(scenario),
        world=gridworld.GridworldWorld(scenario),
        spec=gridworld.segway_barrier_spec(scenario),
        agent_barriers=gridworld.agent_barriers(scenario),
        nominal=lambda b: gridworld.unsafe_nominal_policy(b, scenario),
        initial_belief=gridworld.localize(belief, scenario, scenario.starts),
        initial_state=scenario.starts,
        settings=settings,
        scenario=scenario,
        document=dict(document),
    )


def _model_setup(document: Mapping[str, Any], settings: PlannerSettings) -> MissionSetup:
    model = model_from_dict(document)
    if "barrier" not in document:
        raise InvalidConfig("Model missing required field: barrier")
    spec = barrier_spec_from_dict(document["barrier"], model.n_states)

    if settings.algorithm == "per-agent":
        raise InvalidConfig("per-agent planning needs agent marginals; use a grid world scenario")

    nominal = None
    if "nominal" in document:
        nominal = nominal_from_dict(document["nominal"], model)
    elif settings.algorithm in ("filter", "nominal"):
        raise InvalidConfig(f"{settings.algorithm} algorithm needs a nominal block")

    initial_state = state_index(model, document.get("initial_state", int(np.argmax(model.initial_belief))))

    return MissionSetup(
        kind="model",
        make_belief_model=lambda: FlatBeliefModel(model),
        world=FlatWorld(model, terminal_from_dict(document.get("terminal") or {}, model)),
        spec=spec,
        nominal=nominal,
        initial_belief=check_belief(model.initial_belief, model.n_states),
        initial_state=initial_state,
        settings=settings,
        model=model,
        document=dict(document),
    )


def load_mission_setup(
    path: str,
    algorithm: Optional[str] = None,
    horizon: Optional[int] = None,
    theta: Optional[float] = None,
    alpha0: Optional[float] = None,
) -> MissionSetup:
    """
    Load a scenario or model file into a ready-to-run MissionSetup.

    Raises:
        FileNotFoundError: If the file doesn't exist
        InvalidConfig: If any part of the configuration is invalid
    """
    document = apply_overrides(read_json(path), theta=theta, alpha0=alpha0)
    setup = setup_from_document(document, algorithm, horizon)
    logger.info(f"✓ Loaded {setup.kind} configuration from {path} (algorithm={setup.settings.algorithm})")
    return setup


def alpha0_of(setup: MissionSetup) -> float:
    return float(setup.spec.kappa.alpha0)
