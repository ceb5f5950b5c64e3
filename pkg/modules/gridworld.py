"""
Heterogeneous Robot Exploration Grid World

Factored MPOMDP for a UAV, a Flipper and a Segway on an n x m grid:
- per-agent location distributions with a noisy motion kernel
- per-cell Bernoulli beliefs for habitability and sample presence
- binary detection sensors (Flipper: terrain, UAV: sample)
- the Segway safety barrier, information-gain rewards and termination

Cells are addressed by flat index ``row * cols + col``; helpers convert to
``(row, col)`` for configuration files and traces.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from modules.constants import (
    DEFAULT_ALPHA0,
    DEFAULT_GRID,
    DEFAULT_P_SUCC,
    DEFAULT_REWARD_WEIGHTS,
    DEFAULT_SENSING,
    DEFAULT_THETA,
    IMPOSSIBLE_OBSERVATION_CUTOFF,
    INITIAL_CELL_BELIEF,
    SIMPLEX_TOLERANCE,
)
from modules.dtbf_utils import BarrierSpec, ConstantKappa
from modules.error_utils import ImpossibleObservation, InvalidConfig
from modules.model_utils import JointAction, decode_joint, encode_joint
from modules.planner import AgentBarrier, Outcome

logger = logging.getLogger(__name__)

AGENTS = ("uav", "flipper", "segway")
UAV, FLIPPER, SEGWAY = 0, 1, 2
ACTIONS = ("stay", "forward", "backward", "left", "right")
ACTION_RADICES = (len(ACTIONS),) * len(AGENTS)
MOVES = ((0, 0), (1, 0), (-1, 0), (0, -1), (0, 1))
NEIGHBOUR_OFFSETS = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0))

Cell = Tuple[int, int]


# ============================================================================
# SCENARIO
# ============================================================================

@dataclass(frozen=True)
class SensorModel:
    """Binary detector: reports each cell within ``radius`` correctly with the given accuracy."""

    radius: int
    habitable_accuracy: float
    sample_accuracy: float

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise InvalidConfig(f"Sensing radius must be >= 0, got {self.radius}")
        for name in ("habitable_accuracy", "sample_accuracy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class RewardWeights:
    info_habitable: float = DEFAULT_REWARD_WEIGHTS["info_habitable"]
    info_sample: float = DEFAULT_REWARD_WEIGHTS["info_sample"]
    sample_attract: float = DEFAULT_REWARD_WEIGHTS["sample_attract"]
    danger: float = DEFAULT_REWARD_WEIGHTS["danger"]


@dataclass(frozen=True, eq=False)
class ExplorationScenario:
    """
    Ground truth and parameters of an exploration mission.

    Derived tables (motion kernels, sensor footprints, distances) are built once
    in ``__post_init__`` and shared read-only.
    """

    rows: int
    cols: int
    starts: Tuple[int, int, int]
    habitable: np.ndarray
    sample_cell: int
    sensors: Tuple[Optional[SensorModel], Optional[SensorModel], Optional[SensorModel]]
    p_succ: float = DEFAULT_P_SUCC
    theta: float = DEFAULT_THETA
    alpha0: float = DEFAULT_ALPHA0
    flipper_theta: Optional[float] = None
    weights: RewardWeights = field(default_factory=RewardWeights)
    name: str = "scenario"

    kernels: np.ndarray = field(init=False, repr=False)
    footprints: Tuple[Optional[np.ndarray], ...] = field(init=False, repr=False)
    manhattan: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        habitable = np.array(self.habitable, dtype=bool).reshape(-1)
        habitable.setflags(write=False)
        object.__setattr__(self, "habitable", habitable)
        object.__setattr__(self, "starts", tuple(int(s) for s in self.starts))
        self._validate()

        rr, cc = np.divmod(np.arange(self.n_cells), self.cols)
        chebyshev = np.maximum(np.abs(rr[:, None] - rr[None, :]), np.abs(cc[:, None] - cc[None, :]))
        manhattan = np.abs(rr[:, None] - rr[None, :]) + np.abs(cc[:, None] - cc[None, :])
        footprints = tuple(
            None if sensor is None else (chebyshev <= sensor.radius).astype(np.float64)
            for sensor in self.sensors
        )
        kernels = np.stack([self._motion_kernel(a) for a in range(len(ACTIONS))])
        for table in (manhattan, kernels, *[f for f in footprints if f is not None]):
            table.setflags(write=False)

        object.__setattr__(self, "manhattan", manhattan)
        object.__setattr__(self, "footprints", footprints)
        object.__setattr__(self, "kernels", kernels)

    def _validate(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise InvalidConfig(f"Grid must be at least 2x2, got {self.rows}x{self.cols}")
        if self.habitable.shape != (self.n_cells,):
            raise InvalidConfig(
                f"Habitability map has {self.habitable.size} cells, expected {self.n_cells}"
            )
        if len(self.starts) != len(AGENTS):
            raise InvalidConfig(f"Expected start cells for {AGENTS}")
        for agent, start in zip(AGENTS, self.starts):
            if not 0 <= start < self.n_cells:
                raise InvalidConfig(f"Start cell of {agent} is outside the grid")
            if not self.habitable[start]:
                raise InvalidConfig(f"Start cell of {agent} {self.to_rc(start)} is not habitable")
        if not 0 <= self.sample_cell < self.n_cells:
            raise InvalidConfig("Sample cell is outside the grid")
        if not self.habitable[self.sample_cell]:
            raise InvalidConfig(f"Sample cell {self.to_rc(self.sample_cell)} is not habitable")
        if not 0.0 < self.p_succ <= 1.0:
            raise InvalidConfig(f"p_succ must lie in (0, 1], got {self.p_succ}")
        if not 0.0 < self.theta < 1.0:
            raise InvalidConfig(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 < self.alpha0 < 1.0:
            raise InvalidConfig(f"alpha0 must lie in (0, 1), got {self.alpha0}")
        if self.flipper_theta is not None and not 0.0 < self.flipper_theta < 1.0:
            raise InvalidConfig(f"flipper_theta must lie in (0, 1), got {self.flipper_theta}")
        if self.sensors[SEGWAY] is not None:
            raise InvalidConfig("The Segway has no sensing")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def to_rc(self, cell: int) -> Cell:
        return divmod(int(cell), self.cols)

    def to_cell(self, rc: Sequence[int]) -> int:
        row, col = int(rc[0]), int(rc[1])
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise InvalidConfig(f"Cell {(row, col)} is outside the {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def in_grid(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def target_cell(self, cell: int, action: int) -> int:
        """Intended destination; moves that leave the grid keep the agent in place."""
        row, col = self.to_rc(cell)
        dr, dc = MOVES[action]
        if self.in_grid(row + dr, col + dc):
            return (row + dr) * self.cols + (col + dc)
        return int(cell)

    def _motion_kernel(self, action: int) -> np.ndarray:
        kernel = np.zeros((self.n_cells, self.n_cells))
        slip = (1.0 - self.p_succ) / len(NEIGHBOUR_OFFSETS)
        for cell in range(self.n_cells):
            target = self.target_cell(cell, action)
            kernel[cell, target] += self.p_succ
            row, col = self.to_rc(target)
            for dr, dc in NEIGHBOUR_OFFSETS:
                if self.in_grid(row + dr, col + dc):
                    kernel[cell, (row + dr) * self.cols + col + dc] += slip
        # off-grid slip mass is dropped and the row renormalized
        return kernel / kernel.sum(axis=1, keepdims=True)

    def motion_kernel(self, action: int) -> np.ndarray:
        """P(next cell | current cell) for one per-agent action."""
        return self.kernels[action]


def joint_action(per_agent: Sequence[int]) -> JointAction:
    return JointAction(encode_joint(per_agent, ACTION_RADICES), tuple(per_agent))


def joint_action_from_index(index: int) -> JointAction:
    return JointAction(index, decode_joint(index, ACTION_RADICES))


def joint_action_from_names(names: Mapping[str, str]) -> JointAction:
    return joint_action([ACTIONS.index(names[agent]) for agent in AGENTS])


def action_names(action: JointAction) -> Dict[str, str]:
    return {agent: ACTIONS[a] for agent, a in zip(AGENTS, action.per_agent)}


def all_joint_actions() -> List[JointAction]:
    return [joint_action_from_index(i) for i in range(int(np.prod(ACTION_RADICES)))]


# ============================================================================
# BELIEFS AND OBSERVATIONS
# ============================================================================

@dataclass(frozen=True, eq=False)
class FactoredBelief:
    """
    Factored joint belief.

    ``locations[i]`` is agent i's location distribution for the cells the team
    will occupy after the last chosen action; ``habitable`` and ``sample`` are
    per-cell Bernoulli probabilities.
    """

    locations: np.ndarray
    habitable: np.ndarray
    sample: np.ndarray

    def check(self) -> "FactoredBelief":
        sums = self.locations.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SIMPLEX_TOLERANCE) or np.any(self.locations < -SIMPLEX_TOLERANCE):
            raise ValueError(f"Location beliefs are not distributions (sums {sums})")
        for name in ("habitable", "sample"):
            values = getattr(self, name)
            if np.any(values < 0.0) or np.any(values > 1.0):
                raise ValueError(f"{name} beliefs must lie in [0, 1]")
        return self

    def location_mode(self, agent: int) -> int:
        return int(np.argmax(self.locations[agent]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "locations": {agent: self.locations[i].tolist() for i, agent in enumerate(AGENTS)},
            "habitable": self.habitable.tolist(),
            "sample": self.sample.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FactoredBelief":
        locations = np.array([data["locations"][agent] for agent in AGENTS], dtype=np.float64)
        return cls(
            locations=locations,
            habitable=np.asarray(data["habitable"], dtype=np.float64),
            sample=np.asarray(data["sample"], dtype=np.float64),
        ).check()


@dataclass(frozen=True)
class AgentObservation:
    """Own position fix (if reported) and binary detections ``(cell, habitable_bit, sample_bit)``."""

    position: Optional[int] = None
    detections: Tuple[Tuple[int, int, int], ...] = ()


GridObservation = Tuple[AgentObservation, AgentObservation, AgentObservation]

NO_OBSERVATION: GridObservation = (AgentObservation(), AgentObservation(), AgentObservation())


def observation_to_dict(obs: GridObservation, scenario: ExplorationScenario) -> Dict[str, Any]:
    return {
        agent: {
            "position": None if o.position is None else list(scenario.to_rc(o.position)),
            "detections": [[*scenario.to_rc(c), h, s] for c, h, s in o.detections],
        }
        for agent, o in zip(AGENTS, obs)
    }


def build_scenario(config: Mapping[str, Any]) -> Tuple[ExplorationScenario, FactoredBelief]:
    """
    Build the scenario and its initial factored belief from a config mapping.

    Returns:
        (scenario, belief) with every cell belief at 0.5 and point-mass locations

    Raises:
        InvalidConfig: Out-of-range cells, missing sample cell, bad parameters
    """
    try:
        rows, cols = (int(v) for v in config.get("grid", DEFAULT_GRID))
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"grid must be [rows, cols]: {exc}") from exc
    if rows < 2 or cols < 2:
        raise InvalidConfig(f"Grid must be at least 2x2, got {rows}x{cols}")

    def cell(rc: Any, label: str) -> int:
        if not isinstance(rc, (list, tuple)) or len(rc) != 2:
            raise InvalidConfig(f"{label} must be a [row, col] pair, got {rc!r}")
        row, col = int(rc[0]), int(rc[1])
        if not (0 <= row < rows and 0 <= col < cols):
            raise InvalidConfig(f"{label} {(row, col)} is outside the {rows}x{cols} grid")
        return row * cols + col

    agents = config.get("agents") or {}
    missing = [a for a in AGENTS if a not in agents]
    if missing:
        raise InvalidConfig(f"Scenario missing start cells for: {', '.join(missing)}")
    starts = tuple(cell(agents[a], f"agents.{a}") for a in AGENTS)

    truth = config.get("truth") or {}
    if truth.get("sample") is None:
        raise InvalidConfig("Scenario missing required field: truth.sample")
    sample_cell = cell(truth["sample"], "truth.sample")
    habitable = _habitability_map(truth, rows, cols, cell)

    sensing_cfg = config.get("sensing") or {}
    sensors = []
    for agent in AGENTS:
        if agent == "segway":
            sensors.append(None)
            continue
        params = {**DEFAULT_SENSING[agent], **(sensing_cfg.get(agent) or {})}
        sensors.append(
            SensorModel(int(params["radius"]), float(params["habitable_accuracy"]), float(params["sample_accuracy"]))
        )

    rewards = config.get("rewards") or {}
    unknown = sorted(set(rewards) - set(DEFAULT_REWARD_WEIGHTS))
    if unknown:
        raise InvalidConfig(f"Unknown reward weight(s): {', '.join(unknown)}")

    safety = config.get("safety") or {}
    flipper_theta = safety.get("flipper_theta")
    scenario = ExplorationScenario(
        rows=rows,
        cols=cols,
        starts=starts,
        habitable=habitable,
        sample_cell=sample_cell,
        sensors=tuple(sensors),
        p_succ=float((config.get("motion") or {}).get("p_succ", DEFAULT_P_SUCC)),
        theta=float(safety.get("theta", DEFAULT_THETA)),
        alpha0=float(safety.get("alpha0", DEFAULT_ALPHA0)),
        flipper_theta=None if flipper_theta is None else float(flipper_theta),
        weights=RewardWeights(**{k: float(v) for k, v in {**DEFAULT_REWARD_WEIGHTS, **rewards}.items()}),
        name=str(config.get("name", "scenario")),
    )
    logger.debug(f"✓ Built scenario '{scenario.name}' ({rows}x{cols}, p_succ={scenario.p_succ})")
    return scenario, initial_belief(scenario)


def _habitability_map(truth: Mapping[str, Any], rows: int, cols: int, cell) -> np.ndarray:
    habitable = np.ones(rows * cols, dtype=bool)
    bitmap = truth.get("habitable")
    if bitmap is not None:
        if len(bitmap) != rows:
            raise InvalidConfig(f"truth.habitable needs {rows} rows, got {len(bitmap)}")
        for r, line in enumerate(bitmap):
            bits = [int(ch) for ch in line] if isinstance(line, str) else [int(v) for v in line]
            if len(bits) != cols or any(b not in (0, 1) for b in bits):
                raise InvalidConfig(f"truth.habitable row {r} must hold {cols} bits")
            habitable[r * cols:(r + 1) * cols] = bits
    for rc in truth.get("uninhabitable", []):
        habitable[cell(rc, "truth.uninhabitable")] = False
    return habitable


def initial_belief(scenario: ExplorationScenario) -> FactoredBelief:
    """Point-mass locations at the start cells and 0.5 for every cell belief."""
    locations = np.zeros((len(AGENTS), scenario.n_cells))
    locations[np.arange(len(AGENTS)), scenario.starts] = 1.0
    return FactoredBelief(
        locations=locations,
        habitable=np.full(scenario.n_cells, INITIAL_CELL_BELIEF),
        sample=np.full(scenario.n_cells, INITIAL_CELL_BELIEF),
    )


# ============================================================================
# WORLD STEPPING
# ============================================================================

def observe(scenario: ExplorationScenario, cells: Sequence[int], rng: np.random.Generator) -> GridObservation:
    """Position fixes plus noisy binary detections around each sensing agent."""
    observations = []
    for agent, cell in enumerate(cells):
        sensor = scenario.sensors[agent]
        if sensor is None:
            observations.append(AgentObservation(position=int(cell)))
            continue

        in_range = np.flatnonzero(scenario.footprints[agent][cell])
        truth_h = scenario.habitable[in_range].astype(int)
        truth_s = (in_range == scenario.sample_cell).astype(int)
        flip_h = rng.random(in_range.size) >= sensor.habitable_accuracy
        flip_s = rng.random(in_range.size) >= sensor.sample_accuracy
        bits_h = np.where(flip_h, 1 - truth_h, truth_h)
        bits_s = np.where(flip_s, 1 - truth_s, truth_s)
        detections = tuple(
            (int(c), int(h), int(s)) for c, h, s in zip(in_range, bits_h, bits_s)
        )
        observations.append(AgentObservation(position=int(cell), detections=detections))
    return tuple(observations)


def step_world(
    scenario: ExplorationScenario,
    cells: Sequence[int],
    action: JointAction,
    rng: np.random.Generator,
) -> Tuple[Tuple[int, int, int], GridObservation]:
    """
    Move every agent through the motion kernel, then observe from the new cells.

    Draw order is fixed (agents in roster order, then observations) so a seed
    reproduces the step exactly.
    """
    new_cells = tuple(
        int(rng.choice(scenario.n_cells, p=scenario.kernels[a][cell]))
        for cell, a in zip(cells, action.per_agent)
    )
    return new_cells, observe(scenario, new_cells, rng)


def check_termination(cells: Sequence[int], scenario: ExplorationScenario) -> Outcome:
    segway = cells[SEGWAY]
    if not scenario.habitable[segway]:
        return Outcome.FAILURE
    if segway == scenario.sample_cell:
        return Outcome.SUCCESS
    return Outcome.CONTINUE


# ============================================================================
# BELIEF UPDATE
# ============================================================================

def _binary_bayes(prior: np.ndarray, bits: np.ndarray, accuracy: float) -> np.ndarray:
    like_true = np.where(bits == 1, accuracy, 1.0 - accuracy)
    like_false = 1.0 - like_true
    normalizer = like_true * prior + like_false * (1.0 - prior)
    if np.any(normalizer <= IMPOSSIBLE_OBSERVATION_CUTOFF):
        raise ImpossibleObservation(float(normalizer.min()), "binary detection")
    return like_true * prior / normalizer


def absorb_observations(
    belief: FactoredBelief, scenario: ExplorationScenario, observations: GridObservation
) -> FactoredBelief:
    """
    Condition the belief on received observations without moving anyone.

    A position fix collapses that agent's location belief; the Segway's fix also
    certifies its cell as habitable, since standing there did not end the mission.
    """
    locations = belief.locations.copy()
    habitable = belief.habitable.copy()
    sample = belief.sample.copy()

    for agent, obs in enumerate(observations):
        if obs.detections:
            sensor = scenario.sensors[agent]
            if sensor is None:
                raise InvalidConfig(f"{AGENTS[agent]} cannot report detections")
            det = np.array(obs.detections, dtype=int)
            cells = det[:, 0]
            habitable[cells] = _binary_bayes(habitable[cells], det[:, 1], sensor.habitable_accuracy)
            sample[cells] = _binary_bayes(sample[cells], det[:, 2], sensor.sample_accuracy)

        if obs.position is not None:
            mass = locations[agent, obs.position]
            if mass <= IMPOSSIBLE_OBSERVATION_CUTOFF:
                raise ImpossibleObservation(float(mass), f"{AGENTS[agent]} position fix")
            locations[agent] = 0.0
            locations[agent, obs.position] = 1.0

    segway_fix = observations[SEGWAY].position
    if segway_fix is not None:
        if habitable[segway_fix] <= IMPOSSIBLE_OBSERVATION_CUTOFF:
            raise ImpossibleObservation(float(habitable[segway_fix]), "Segway on a certainly uninhabitable cell")
        habitable[segway_fix] = 1.0

    return FactoredBelief(locations, habitable, sample)


def predict(belief: FactoredBelief, scenario: ExplorationScenario, action: JointAction) -> FactoredBelief:
    """Push each location distribution through the motion kernel of its action."""
    locations = np.stack(
        [belief.locations[i] @ scenario.kernels[a] for i, a in enumerate(action.per_agent)]
    )
    return FactoredBelief(locations, belief.habitable, belief.sample)


def update_factored_belief(
    belief: FactoredBelief,
    scenario: ExplorationScenario,
    action: JointAction,
    observations: GridObservation,
) -> FactoredBelief:
    """
    Filter step: absorb the received observations, then predict for the new action.

    Raises:
        ImpossibleObservation: If a position fix or detection has zero likelihood
    """
    return predict(absorb_observations(belief, scenario, observations), scenario, action)


def localize(belief: FactoredBelief, scenario: ExplorationScenario, cells: Sequence[int]) -> FactoredBelief:
    """Absorb position fixes only (used at mission start, where the start cells are known)."""
    fixes = tuple(AgentObservation(position=int(c)) for c in cells)
    return absorb_observations(belief, scenario, fixes)


# ============================================================================
# BARRIERS
# ============================================================================

class LocationMarginal(NamedTuple):
    """One agent's location distribution with the habitability beliefs it is scored against."""

    location: np.ndarray
    habitable: np.ndarray


def location_marginal(belief: FactoredBelief, agent: int) -> LocationMarginal:
    return LocationMarginal(belief.locations[agent], belief.habitable)


def habitable_entry_barrier(marginal: LocationMarginal, threshold: float) -> float:
    """sum_c P(agent at c) * P(c habitable) - threshold."""
    return float(marginal.location @ marginal.habitable) - threshold


def segway_safety_barrier(belief: FactoredBelief, scenario: ExplorationScenario) -> float:
    return habitable_entry_barrier(location_marginal(belief, SEGWAY), scenario.theta)


def flipper_safety_barrier(belief: FactoredBelief, scenario: ExplorationScenario) -> float:
    if scenario.flipper_theta is None:
        raise InvalidConfig("Scenario has no flipper_theta")
    return habitable_entry_barrier(location_marginal(belief, FLIPPER), scenario.flipper_theta)


def segway_barrier_spec(scenario: ExplorationScenario) -> BarrierSpec:
    return BarrierSpec.single(lambda b: segway_safety_barrier(b, scenario), ConstantKappa(scenario.alpha0))


def agent_barriers(scenario: ExplorationScenario) -> Tuple[AgentBarrier, ...]:
    """Segway barrier, plus a Flipper barrier when the scenario sets flipper_theta."""
    thresholds = [(SEGWAY, scenario.theta)]
    if scenario.flipper_theta is not None:
        thresholds.append((FLIPPER, scenario.flipper_theta))

    kappa = ConstantKappa(scenario.alpha0)
    return tuple(
        AgentBarrier(
            agent=agent,
            marginalizer=partial(location_marginal, agent=agent),
            barrier=partial(habitable_entry_barrier, threshold=threshold),
            kappa=kappa,
        )
        for agent, threshold in thresholds
    )


# ============================================================================
# REWARD
# ============================================================================

def binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = -p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p)
    return np.nan_to_num(terms, nan=0.0)


def reading_information(prior: np.ndarray, accuracy: float) -> np.ndarray:
    """Expected entropy reduction of one binary reading per cell (mutual information)."""
    p_one = prior * accuracy + (1.0 - prior) * (1.0 - accuracy)
    return np.maximum(binary_entropy(p_one) - binary_entropy(np.array(accuracy)), 0.0)


def sample_potential(sample: np.ndarray, scenario: ExplorationScenario) -> np.ndarray:
    """psi(c) = max_k s(k) * (1 - d1(c, k) / (rows + cols))."""
    decay = 1.0 - scenario.manhattan / float(scenario.rows + scenario.cols)
    return (decay * sample[None, :]).max(axis=1)


@dataclass(frozen=True)
class _CellTerms:
    info_habitable: np.ndarray
    info_sample: np.ndarray
    potential: np.ndarray
    danger: np.ndarray


def _cell_terms(belief: FactoredBelief, scenario: ExplorationScenario) -> _CellTerms:
    return _CellTerms(
        info_habitable=reading_information(belief.habitable, scenario.sensors[FLIPPER].habitable_accuracy),
        info_sample=reading_information(belief.sample, scenario.sensors[UAV].sample_accuracy),
        potential=sample_potential(belief.sample, scenario),
        danger=1.0 - belief.habitable,
    )


def _reward_from_predicted(predicted: FactoredBelief, scenario: ExplorationScenario, terms: _CellTerms) -> float:
    w = scenario.weights
    flipper_cover = predicted.locations[FLIPPER] @ scenario.footprints[FLIPPER]
    uav_cover = predicted.locations[UAV] @ scenario.footprints[UAV]
    segway = predicted.locations[SEGWAY]
    return float(
        w.info_habitable * (flipper_cover @ terms.info_habitable)
        + w.info_sample * (uav_cover @ terms.info_sample)
        + w.sample_attract * (segway @ terms.potential)
        - w.danger * (segway @ terms.danger)
    )


def exploration_reward(belief: FactoredBelief, scenario: ExplorationScenario, action: JointAction) -> float:
    """
    Weighted exploration reward of a joint action under the post-action locations.

    Information terms weight each cell's expected entropy reduction by the
    probability that it falls in the Flipper (terrain) or UAV (sample)
    footprint; the Segway is attracted to likely sample cells and penalized for
    expected mass on uninhabitable cells.
    """
    return _reward_from_predicted(predict(belief, scenario, action), scenario, _cell_terms(belief, scenario))


# ============================================================================
# NOMINAL POLICY
# ============================================================================

def _info_greedy_action(
    belief: FactoredBelief, scenario: ExplorationScenario, agent: int, info: np.ndarray
) -> int:
    cell = belief.location_mode(agent)
    footprint = scenario.footprints[agent]
    scores = [footprint[scenario.target_cell(cell, a)] @ info for a in range(len(ACTIONS))]
    return int(np.argmax(scores))


def unsafe_nominal_policy(belief: FactoredBelief, scenario: ExplorationScenario) -> JointAction:
    """
    Mission-greedy policy that ignores habitability.

    The Segway heads for the nearest cell with maximal sample belief; the UAV
    and the Flipper move where their next reading is most informative. Ties go
    to the lowest action index.
    """
    terms = _cell_terms(belief, scenario)
    uav = _info_greedy_action(belief, scenario, UAV, terms.info_sample)
    flipper = _info_greedy_action(belief, scenario, FLIPPER, terms.info_habitable)

    peaks = np.flatnonzero(belief.sample >= belief.sample.max() - 1e-12)
    cell = belief.location_mode(SEGWAY)
    distances = [
        scenario.manhattan[scenario.target_cell(cell, a), peaks].min() for a in range(len(ACTIONS))
    ]
    segway = int(np.argmin(distances))
    return joint_action((uav, flipper, segway))


# ============================================================================
# PLANNER ADAPTERS
# ============================================================================

class GridworldBeliefModel:
    """BeliefModel over factored beliefs; candidates share one absorbed belief per step."""

    def __init__(self, scenario: ExplorationScenario):
        self.scenario = scenario
        self._actions = tuple(all_joint_actions())
        self._terms_for: Optional[Tuple[np.ndarray, _CellTerms]] = None

    def joint_actions(self) -> Sequence[JointAction]:
        return self._actions

    def posterior_fn(self, prev: FactoredBelief, obs: GridObservation):
        absorbed = absorb_observations(prev, self.scenario, obs)
        kernels = self.scenario.kernels
        predicted = [
            [absorbed.locations[agent] @ kernels[a] for a in range(len(ACTIONS))]
            for agent in range(len(AGENTS))
        ]

        def posterior(action: JointAction) -> FactoredBelief:
            locations = np.stack([predicted[i][a] for i, a in enumerate(action.per_agent)])
            return FactoredBelief(locations, absorbed.habitable, absorbed.sample)

        return posterior

    def reward(self, prev: FactoredBelief, posterior: FactoredBelief, action: JointAction) -> float:
        cached = self._terms_for
        if cached is None or cached[0] is not posterior.habitable:
            cached = (posterior.habitable, _cell_terms(posterior, self.scenario))
            self._terms_for = cached
        return _reward_from_predicted(posterior, self.scenario, cached[1])


class GridworldWorld:
    """Ground truth for a scenario; the state is the tuple of true agent cells."""

    def __init__(self, scenario: ExplorationScenario):
        self.scenario = scenario

    def initial_observation(self, state: Sequence[int], rng: np.random.Generator) -> GridObservation:
        return observe(self.scenario, state, rng)

    def step(self, state: Sequence[int], action: JointAction, rng: np.random.Generator):
        return step_world(self.scenario, state, action, rng)

    def check_termination(self, state: Sequence[int]) -> Outcome:
        return check_termination(state, self.scenario)
