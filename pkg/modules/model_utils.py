"""
MPOMDP Model Utilities

Dense tabular multi-agent POMDP model and the exact joint-belief filter:
- Joint action / observation encoding (mixed radix, agent 0 most significant)
- Model validation (stochasticity of T and O, non-empty sets)
- Bayesian belief update and observation likelihood
- Expected immediate reward
- Ground-truth simulation stepping with an explicit random generator
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from modules.constants import IMPOSSIBLE_OBSERVATION_CUTOFF, SIMPLEX_TOLERANCE
from modules.error_utils import ImpossibleObservation, InvalidConfig

logger = logging.getLogger(__name__)

Belief = np.ndarray


# ============================================================================
# JOINT ENCODING
# ============================================================================

@dataclass(frozen=True)
class JointAction:
    """One action per agent plus the dense joint index."""

    index: int
    per_agent: Tuple[int, ...]


@dataclass(frozen=True)
class JointObservation:
    """One observation per agent plus the dense joint index."""

    index: int
    per_agent: Tuple[int, ...]


def encode_joint(per_agent: Sequence[int], radices: Sequence[int]) -> int:
    """
    Mixed-radix encoding of per-agent indices, agent 0 most significant.

    Raises:
        ValueError: If lengths differ or an index is out of range
    """
    if len(per_agent) != len(radices):
        raise ValueError(f"Expected {len(radices)} per-agent indices, got {len(per_agent)}")

    index = 0
    for agent, (value, radix) in enumerate(zip(per_agent, radices)):
        if not 0 <= value < radix:
            raise ValueError(f"Index {value} out of range for agent {agent} (size {radix})")
        index = index * radix + value
    return index


def decode_joint(index: int, radices: Sequence[int]) -> Tuple[int, ...]:
    """Inverse of :func:`encode_joint`."""
    total = int(np.prod(radices)) if radices else 0
    if not 0 <= index < total:
        raise ValueError(f"Joint index {index} out of range 0..{total - 1}")

    digits = []
    for radix in reversed(radices):
        index, digit = divmod(index, radix)
        digits.append(digit)
    return tuple(reversed(digits))


# ============================================================================
# MODEL
# ============================================================================

@dataclass(frozen=True, eq=False)
class MpomdpModel:
    """
    MPOMDP tuple with dense arrays.

    Attributes:
        agents: Agent names, index order is the encoding order
        states: State names
        initial_belief: p0 over states, shape (|Q|,)
        actions_per_agent: Action names per agent
        observations_per_agent: Observation names per agent
        transition: T[q, a, q'], shape (|Q|, |A|, |Q|)
        observation_fn: O[q', a, z], shape (|Q|, |A|, |Z|)
        reward: R[q, a], shape (|Q|, |A|)
    """

    agents: Tuple[str, ...]
    states: Tuple[str, ...]
    initial_belief: np.ndarray
    actions_per_agent: Tuple[Tuple[str, ...], ...]
    observations_per_agent: Tuple[Tuple[str, ...], ...]
    transition: np.ndarray
    observation_fn: np.ndarray
    reward: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions_per_agent", tuple(tuple(a) for a in self.actions_per_agent))
        object.__setattr__(
            self, "observations_per_agent", tuple(tuple(z) for z in self.observations_per_agent)
        )

        if len(self.actions_per_agent) != len(self.agents):
            raise InvalidConfig("actions_per_agent must have one entry per agent")
        if len(self.observations_per_agent) != len(self.agents):
            raise InvalidConfig("observations_per_agent must have one entry per agent")

        n_q, n_a, n_z = self.n_states, self.n_joint_actions, self.n_joint_observations
        expected = {
            "initial_belief": (n_q,),
            "transition": (n_q, n_a, n_q),
            "observation_fn": (n_q, n_a, n_z),
            "reward": (n_q, n_a),
        }
        for name, shape in expected.items():
            array = np.array(getattr(self, name), dtype=np.float64)
            if array.shape != shape:
                raise InvalidConfig(f"{name} has shape {array.shape}, expected {shape}")
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def action_radices(self) -> Tuple[int, ...]:
        return tuple(len(a) for a in self.actions_per_agent)

    @property
    def observation_radices(self) -> Tuple[int, ...]:
        return tuple(len(z) for z in self.observations_per_agent)

    @property
    def n_joint_actions(self) -> int:
        return int(np.prod(self.action_radices)) if self.agents else 0

    @property
    def n_joint_observations(self) -> int:
        return int(np.prod(self.observation_radices)) if self.agents else 0

    def joint_action(self, index: int) -> JointAction:
        return JointAction(index, decode_joint(index, self.action_radices))

    def joint_observation(self, index: int) -> JointObservation:
        return JointObservation(index, decode_joint(index, self.observation_radices))

    def action_names(self, action: JointAction) -> Tuple[str, ...]:
        return tuple(self.actions_per_agent[i][a] for i, a in enumerate(action.per_agent))


def validate_model(model: MpomdpModel, tolerance: float = SIMPLEX_TOLERANCE) -> List[str]:
    """
    Collect every stochasticity or structural violation of a model.

    Args:
        model: Model to check
        tolerance: Allowed deviation of row sums from 1

    Returns:
        List of human-readable violations; empty when the model is valid
    """
    violations: List[str] = []

    if not model.agents:
        violations.append("agent set is empty")
    if not model.states:
        violations.append("state set is empty")
    for i, actions in enumerate(model.actions_per_agent):
        if not actions:
            violations.append(f"agent {model.agents[i]} has no actions")
    for i, observations in enumerate(model.observations_per_agent):
        if not observations:
            violations.append(f"agent {model.agents[i]} has no observations")

    p0 = model.initial_belief
    for q in np.flatnonzero(p0 < 0):
        violations.append(f"initial_belief entry q={q} is negative ({p0[q]:g})")
    if p0.size and abs(p0.sum() - 1.0) > tolerance:
        violations.append(f"initial_belief sums to {p0.sum():.12g}")

    violations.extend(_stochastic_violations("transition", ("q", "a", "q'"), model.transition, tolerance))
    violations.extend(
        _stochastic_violations("observation_fn", ("q'", "a", "z"), model.observation_fn, tolerance)
    )

    if model.reward.size and not np.all(np.isfinite(model.reward)):
        violations.append("reward contains non-finite entries")

    if violations:
        logger.debug(f"✗ Model validation found {len(violations)} violation(s)")
    return violations


def _stochastic_violations(
    name: str, axes: Tuple[str, str, str], table: np.ndarray, tolerance: float
) -> List[str]:
    found = []
    for idx in np.argwhere(table < 0):
        labels = ", ".join(f"{axis}={int(v)}" for axis, v in zip(axes, idx))
        found.append(f"{name} entry ({labels}) is negative ({table[tuple(idx)]:g})")

    if table.shape[-1] == 0:
        return found
    sums = table.sum(axis=-1)
    for idx in np.argwhere(np.abs(sums - 1.0) > tolerance):
        labels = ", ".join(f"{axis}={int(v)}" for axis, v in zip(axes[:2], idx))
        found.append(f"{name} row ({labels}) sums to {sums[tuple(idx)]:.12g}")
    return found


# ============================================================================
# BELIEF OPERATIONS
# ============================================================================

def enumerate_joint_actions(model: MpomdpModel) -> List[JointAction]:
    """All joint actions in mixed-radix order (agent 0 most significant)."""
    ranges = [range(r) for r in model.action_radices]
    return [JointAction(i, combo) for i, combo in enumerate(itertools.product(*ranges))]


def check_belief(probs: Sequence[float], n_states: Optional[int] = None) -> Belief:
    """
    Coerce a probability vector to a belief on the simplex.

    Raises:
        ValueError: If the vector has the wrong length, negative entries or does not sum to 1
    """
    belief = np.asarray(probs, dtype=np.float64)
    if belief.ndim != 1:
        raise ValueError(f"Belief must be a vector, got shape {belief.shape}")
    if n_states is not None and belief.shape[0] != n_states:
        raise ValueError(f"Belief has {belief.shape[0]} entries, expected {n_states}")
    if np.any(belief < -SIMPLEX_TOLERANCE):
        raise ValueError("Belief has negative entries")
    if abs(belief.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise ValueError(f"Belief sums to {belief.sum():.12g}, not 1")
    return belief


def _unnormalized_posterior(
    model: MpomdpModel, prev: Belief, action: JointAction, obs: JointObservation
) -> np.ndarray:
    predicted = prev @ model.transition[:, action.index, :]
    return model.observation_fn[:, action.index, obs.index] * predicted


def observation_likelihood(
    model: MpomdpModel, prev: Belief, action: JointAction, obs: JointObservation
) -> float:
    """P(z | a, prev) = sum_q' O(q', a, z) * sum_q T(q, a, q') prev(q)."""
    return float(_unnormalized_posterior(model, prev, action, obs).sum())


def belief_update(
    model: MpomdpModel, prev: Belief, action: JointAction, obs: JointObservation
) -> Belief:
    """
    Bayesian filter step for the joint belief.

    Args:
        model: MPOMDP model
        prev: Belief at t-1
        action: Joint action taken
        obs: Joint observation received

    Returns:
        Posterior belief, renormalized onto the simplex

    Raises:
        ImpossibleObservation: If the observation likelihood is at or below 1e-12
    """
    unnormalized = _unnormalized_posterior(model, prev, action, obs)
    normalizer = float(unnormalized.sum())
    if normalizer <= IMPOSSIBLE_OBSERVATION_CUTOFF:
        raise ImpossibleObservation(normalizer, f"a={action.index}, z={obs.index}")

    posterior = unnormalized / normalizer
    return posterior / posterior.sum()


def expected_reward(model: MpomdpModel, belief: Belief, action: JointAction) -> float:
    """sum_q belief(q) * R(q, a)."""
    return float(belief @ model.reward[:, action.index])


# ============================================================================
# SIMULATION
# ============================================================================

def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; the same seed always yields the same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def sample_observation(
    model: MpomdpModel, state: int, action: JointAction, rng: np.random.Generator
) -> JointObservation:
    """Draw z from O(state, a, .)."""
    z = int(rng.choice(model.n_joint_observations, p=model.observation_fn[state, action.index]))
    return model.joint_observation(z)


def sample_step(
    model: MpomdpModel, true_state: int, action: JointAction, rng: np.random.Generator
) -> Tuple[int, JointObservation]:
    """
    Advance the ground truth one step.

    Draws q' from T(true_state, a, .) and then z from O(q', a, .), in that order,
    so a given generator state fully determines the outcome.
    """
    if not 0 <= true_state < model.n_states:
        raise ValueError(f"State {true_state} out of range")

    next_state = int(rng.choice(model.n_states, p=model.transition[true_state, action.index]))
    return next_state, sample_observation(model, next_state, action, rng)
