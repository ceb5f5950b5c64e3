"""
Safe One-Step Planners

Greedy planners over joint beliefs that only commit to joint actions whose
posterior satisfies the barrier condition:

- safe_greedy_action: maximize expected reward among safe candidates
- per_agent_safe_greedy_action: same, with one barrier per constrained agent
- safety_filter_action: pass a nominal action through when safe, otherwise pick
  the safe candidate whose reward deviates least from the nominal reward
- run_mission: closed loop of planning, world stepping and termination checks

Planners talk to models through the small BeliefModel protocol so the flat
tabular model and the factored grid world share one implementation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from modules.constants import ALGORITHMS, DEADLOCK_POLICIES, MARGIN_TOLERANCE
from modules.dtbf_utils import BarrierSpec, KappaFn, condition_margin, dtbf_condition
from modules.error_utils import (
    ImpossibleObservation,
    ImpossibleObservationForAll,
    InvalidConfig,
    NoSafeAction,
)
from modules.model_utils import (
    JointAction,
    MpomdpModel,
    belief_update,
    enumerate_joint_actions,
    expected_reward,
    sample_observation,
    sample_step,
)

logger = logging.getLogger(__name__)

NominalPolicy = Callable[[Any], JointAction]
PosteriorFn = Callable[[JointAction], Any]


class Outcome(str, Enum):
    CONTINUE = "Continue"
    SUCCESS = "Success"
    FAILURE = "Failure"
    HORIZON_EXCEEDED = "HorizonExceeded"
    SAFETY_DEADLOCK = "SafetyDeadlock"


# ============================================================================
# MODEL / WORLD PROTOCOLS
# ============================================================================

class BeliefModel(Protocol):
    def joint_actions(self) -> Sequence[JointAction]:
        ...

    def posterior_fn(self, prev: Any, obs: Any) -> PosteriorFn:
        """Per-action posterior for a fixed (prev, obs); raises ImpossibleObservation."""
        ...

    def reward(self, prev: Any, posterior: Any, action: JointAction) -> float:
        ...


class World(Protocol):
    def initial_observation(self, state: Any, rng: np.random.Generator) -> Any:
        ...

    def step(self, state: Any, action: JointAction, rng: np.random.Generator) -> Tuple[Any, Any]:
        ...

    def check_termination(self, state: Any) -> Outcome:
        ...


class FlatBeliefModel:
    """BeliefModel over an MpomdpModel using the exact Bayesian filter."""

    def __init__(self, model: MpomdpModel):
        self.model = model
        self._actions = tuple(enumerate_joint_actions(model))

    def joint_actions(self) -> Sequence[JointAction]:
        return self._actions

    def posterior_fn(self, prev: Any, obs: Any) -> PosteriorFn:
        return lambda action: belief_update(self.model, prev, action, obs)

    def reward(self, prev: Any, posterior: Any, action: JointAction) -> float:
        return expected_reward(self.model, posterior, action)


class FlatWorld:
    """Ground-truth simulator for an MpomdpModel.

    The first observation is emitted at the initial state under joint action 0.
    """

    def __init__(self, model: MpomdpModel, terminal: Optional[Callable[[int], Outcome]] = None):
        self.model = model
        self.terminal = terminal

    def initial_observation(self, state: int, rng: np.random.Generator):
        return sample_observation(self.model, state, self.model.joint_action(0), rng)

    def step(self, state: int, action: JointAction, rng: np.random.Generator):
        return sample_step(self.model, state, action, rng)

    def check_termination(self, state: int) -> Outcome:
        return self.terminal(state) if self.terminal else Outcome.CONTINUE


def as_belief_model(model: Any) -> BeliefModel:
    if isinstance(model, MpomdpModel):
        return FlatBeliefModel(model)
    return model


# ============================================================================
# DECISIONS
# ============================================================================

@dataclass(frozen=True)
class AgentBarrier:
    """Barrier for a single agent evaluated on a marginal of the joint belief."""

    agent: int
    marginalizer: Callable[[Any], Any]
    barrier: Callable[[Any], float]
    kappa: KappaFn

    def value(self, belief: Any) -> float:
        return float(self.barrier(self.marginalizer(belief)))

    def condition(self, b_prev: Any, b_next: Any) -> Tuple[bool, float]:
        margin = condition_margin(self.kappa, self.value(b_prev), self.value(b_next))
        return margin >= -MARGIN_TOLERANCE, margin


@dataclass(frozen=True)
class CandidateEvaluation:
    action: JointAction
    next_belief: Any = None
    feasible: bool = False
    safe: bool = False
    margin: Optional[float] = None
    reward: Optional[float] = None
    agent_margins: Tuple[float, ...] = ()


@dataclass(frozen=True)
class PlanDecision:
    """
    Result of one planning step.

    Attributes:
        chosen: Joint action to execute
        candidates: Evaluated candidates in joint index order
        intervened: True when the safety filter replaced the nominal action
        nominal: Nominal joint action (filter / nominal modes)
        nominal_reward: Nominal reward at its posterior, if feasible
        deadlock_override: True when the stay action was forced after a deadlock
    """

    chosen: JointAction
    candidates: Tuple[CandidateEvaluation, ...]
    intervened: bool = False
    nominal: Optional[JointAction] = None
    nominal_reward: Optional[float] = None
    deadlock_override: bool = False

    @property
    def chosen_evaluation(self) -> CandidateEvaluation:
        for candidate in self.candidates:
            if candidate.action.index == self.chosen.index:
                return candidate
        raise KeyError(f"Chosen action {self.chosen.index} not among candidates")


Check = Callable[[Any, Any], Tuple[bool, float, Tuple[float, ...]]]


def _spec_check(spec: BarrierSpec) -> Check:
    def check(b_prev: Any, b_next: Any):
        ok, margin = dtbf_condition(spec, b_prev, b_next)
        return ok, margin, ()

    return check


def _agents_check(barriers: Sequence[AgentBarrier]) -> Check:
    def check(b_prev: Any, b_next: Any):
        results = [barrier.condition(b_prev, b_next) for barrier in barriers]
        margins = tuple(m for _, m in results)
        return all(ok for ok, _ in results), min(margins), margins

    return check


def _evaluate(
    model: BeliefModel, posterior: Optional[PosteriorFn], b_prev: Any, action: JointAction, check: Check
) -> CandidateEvaluation:
    if posterior is None:
        return CandidateEvaluation(action)
    try:
        next_belief = posterior(action)
    except ImpossibleObservation:
        return CandidateEvaluation(action)

    ok, margin, agent_margins = check(b_prev, next_belief)
    return CandidateEvaluation(
        action=action,
        next_belief=next_belief,
        feasible=True,
        safe=ok,
        margin=margin,
        reward=model.reward(b_prev, next_belief, action),
        agent_margins=agent_margins,
    )


def _posterior_or_none(model: BeliefModel, b_prev: Any, obs: Any) -> Optional[PosteriorFn]:
    try:
        return model.posterior_fn(b_prev, obs)
    except ImpossibleObservation:
        return None


def evaluate_candidates(
    model: BeliefModel, b_prev: Any, obs: Any, check: Check
) -> Tuple[CandidateEvaluation, ...]:
    """
    Posterior, safety verdict and reward for every joint action.

    Raises:
        ImpossibleObservationForAll: If no candidate admits the observation
    """
    posterior = _posterior_or_none(model, b_prev, obs)
    candidates = tuple(_evaluate(model, posterior, b_prev, a, check) for a in model.joint_actions())

    if not any(c.feasible for c in candidates):
        raise ImpossibleObservationForAll(
            f"Observation {obs!r} has zero likelihood under all {len(candidates)} joint actions"
        )
    return candidates


def _best_safe(candidates: Sequence[CandidateEvaluation], score: Callable[[CandidateEvaluation], float]):
    """Highest score among safe candidates; earlier (lower index) wins ties."""
    best = None
    best_score = -np.inf
    for candidate in candidates:
        if not candidate.safe:
            continue
        value = score(candidate)
        if best is None or value > best_score:
            best, best_score = candidate, value
    return best


def _raise_no_safe(candidates: Sequence[CandidateEvaluation], label: str) -> None:
    feasible = sum(1 for c in candidates if c.feasible)
    raise NoSafeAction(
        f"[PLANNER] {label}: none of {feasible} feasible joint actions satisfies the barrier condition",
        candidates,
    )


# ============================================================================
# PLANNERS
# ============================================================================

def safe_greedy_action(model: Any, spec: BarrierSpec, b_prev: Any, obs: Any) -> PlanDecision:
    """
    Safe joint action with maximal expected reward at its updated belief.

    Raises:
        NoSafeAction: If no candidate satisfies the condition
        ImpossibleObservationForAll: If the observation is impossible for every action
    """
    model = as_belief_model(model)
    candidates = evaluate_candidates(model, b_prev, obs, _spec_check(spec))
    best = _best_safe(candidates, lambda c: c.reward)
    if best is None:
        _raise_no_safe(candidates, "greedy")

    logger.debug(f"[PLANNER] greedy chose {best.action.index} (reward {best.reward:.4f})")
    return PlanDecision(chosen=best.action, candidates=candidates)


def per_agent_safe_greedy_action(
    model: Any, barriers: Sequence[AgentBarrier], b_prev: Any, obs: Any
) -> PlanDecision:
    """Like safe_greedy_action, but every agent barrier must hold simultaneously."""
    if not barriers:
        raise InvalidConfig("per-agent planning needs at least one AgentBarrier")

    model = as_belief_model(model)
    candidates = evaluate_candidates(model, b_prev, obs, _agents_check(barriers))
    best = _best_safe(candidates, lambda c: c.reward)
    if best is None:
        _raise_no_safe(candidates, "per-agent")

    logger.debug(f"[PLANNER] per-agent chose {best.action.index} (reward {best.reward:.4f})")
    return PlanDecision(chosen=best.action, candidates=candidates)


def safety_filter_action(
    model: Any, spec: BarrierSpec, nominal: NominalPolicy, b_prev: Any, obs: Any
) -> PlanDecision:
    """
    Filter a nominal policy through the barrier condition.

    The nominal action is returned untouched when its posterior is safe.
    Otherwise the safe candidate minimizing (r - r_n)^2 is returned, where r_n
    is the nominal action's reward at its own posterior whether or not that
    posterior is safe. If the nominal observation is impossible, r_n is
    undefined and the highest-reward safe candidate is used.
    """
    model = as_belief_model(model)
    check = _spec_check(spec)
    nominal_action = nominal(b_prev)
    posterior = _posterior_or_none(model, b_prev, obs)

    nominal_eval = _evaluate(model, posterior, b_prev, nominal_action, check)
    if nominal_eval.safe:
        return PlanDecision(
            chosen=nominal_action,
            candidates=(nominal_eval,),
            nominal=nominal_action,
            nominal_reward=nominal_eval.reward,
        )

    candidates = evaluate_candidates(model, b_prev, obs, check)
    r_n = nominal_eval.reward
    if r_n is None:
        best = _best_safe(candidates, lambda c: c.reward)
    else:
        best = _best_safe(candidates, lambda c: -((c.reward - r_n) ** 2))
    if best is None:
        _raise_no_safe(candidates, "filter")

    logger.info(
        f"[PLANNER] filter intervened: nominal {nominal_action.index} -> {best.action.index} "
        f"(nominal margin {nominal_eval.margin}, reward {best.reward:.4f} vs {r_n})"
    )
    return PlanDecision(
        chosen=best.action,
        candidates=candidates,
        intervened=True,
        nominal=nominal_action,
        nominal_reward=r_n,
    )


def nominal_action(model: Any, spec: BarrierSpec, nominal: NominalPolicy, b_prev: Any, obs: Any) -> PlanDecision:
    """
    Apply the nominal policy without filtering.

    The barrier margin is recorded for inspection but never enforced.

    Raises:
        ImpossibleObservation: If the received observation rules out the nominal action
    """
    model = as_belief_model(model)
    action = nominal(b_prev)
    evaluation = _evaluate(model, model.posterior_fn(b_prev, obs), b_prev, action, _spec_check(spec))
    if not evaluation.feasible:
        raise ImpossibleObservation(0.0, f"nominal action {action.index}")
    return PlanDecision(
        chosen=action,
        candidates=(evaluation,),
        nominal=action,
        nominal_reward=evaluation.reward,
    )


# ============================================================================
# MISSIONS
# ============================================================================

@dataclass(frozen=True)
class PlannerConfig:
    """
    Which planner to run and what it needs.

    Attributes:
        algorithm: greedy | per-agent | filter | nominal
        spec: Barrier for greedy / filter / nominal
        agent_barriers: Barriers for per-agent planning
        nominal: Nominal policy for filter / nominal
        deadlock_policy: abort | stay
    """

    algorithm: str
    spec: Optional[BarrierSpec] = None
    agent_barriers: Tuple[AgentBarrier, ...] = ()
    nominal: Optional[NominalPolicy] = None
    deadlock_policy: str = "abort"

    def __post_init__(self) -> None:
        object.__setattr__(self, "agent_barriers", tuple(self.agent_barriers))
        if self.algorithm not in ALGORITHMS:
            raise InvalidConfig(f"Unknown algorithm '{self.algorithm}', expected one of {ALGORITHMS}")
        if self.deadlock_policy not in DEADLOCK_POLICIES:
            raise InvalidConfig(
                f"Unknown deadlock_policy '{self.deadlock_policy}', expected one of {DEADLOCK_POLICIES}"
            )
        if self.algorithm == "per-agent" and not self.agent_barriers:
            raise InvalidConfig("per-agent algorithm requires agent_barriers")
        if self.algorithm != "per-agent" and self.spec is None:
            raise InvalidConfig(f"{self.algorithm} algorithm requires a barrier spec")
        if self.algorithm in ("filter", "nominal") and self.nominal is None:
            raise InvalidConfig(f"{self.algorithm} algorithm requires a nominal policy")


def plan_step(model: Any, config: PlannerConfig, b_prev: Any, obs: Any) -> PlanDecision:
    """Dispatch one planning step to the configured algorithm."""
    if config.algorithm == "greedy":
        return safe_greedy_action(model, config.spec, b_prev, obs)
    if config.algorithm == "per-agent":
        return per_agent_safe_greedy_action(model, config.agent_barriers, b_prev, obs)
    if config.algorithm == "filter":
        return safety_filter_action(model, config.spec, config.nominal, b_prev, obs)
    return nominal_action(model, config.spec, config.nominal, b_prev, obs)


def _stay_override(exc: NoSafeAction) -> Optional[PlanDecision]:
    stay = next((c for c in exc.candidates if c.action.index == 0), None)
    if stay is None or not stay.feasible:
        return None
    return PlanDecision(chosen=stay.action, candidates=exc.candidates, deadlock_override=True)


@dataclass
class MissionResult:
    """
    Full record of one mission.

    ``beliefs``, ``states`` and ``observations`` hold one more entry than
    ``decisions``: index 0 is the starting point, index t+1 follows decision t.
    """

    beliefs: List[Any]
    decisions: List[PlanDecision]
    states: List[Any]
    observations: List[Any]
    outcome: Outcome = Outcome.CONTINUE

    @property
    def steps(self) -> int:
        return len(self.decisions)

    @property
    def interventions(self) -> int:
        return sum(1 for d in self.decisions if d.intervened)


def run_mission(
    model: Any,
    world: World,
    config: PlannerConfig,
    initial_belief: Any,
    true_state: Any,
    horizon: int,
    rng: np.random.Generator,
) -> MissionResult:
    """
    Closed-loop mission: plan, record posterior, step the world, check termination.

    The planner chooses a_t from (b_{t-1}, z_t); the recorded belief b_t is the
    chosen candidate's posterior; the world then executes a_t and emits the
    next state and observation.

    Raises:
        InvalidConfig: If horizon < 1
        ImpossibleObservationForAll: If the model cannot explain an observation
    """
    if horizon < 1:
        raise InvalidConfig(f"horizon must be >= 1, got {horizon}")

    model = as_belief_model(model)
    state = true_state
    obs = world.initial_observation(state, rng)
    result = MissionResult(beliefs=[initial_belief], decisions=[], states=[state], observations=[obs])

    result.outcome = world.check_termination(state)
    if result.outcome is not Outcome.CONTINUE:
        return result

    belief = initial_belief
    for t in range(horizon):
        try:
            decision = plan_step(model, config, belief, obs)
        except NoSafeAction as exc:
            decision = _stay_override(exc) if config.deadlock_policy == "stay" else None
            if decision is None:
                logger.warning(f"[MISSION] ✗ Safety deadlock at step {t}: {exc}")
                result.outcome = Outcome.SAFETY_DEADLOCK
                return result
            logger.warning(f"[MISSION] deadlock at step {t}, forcing stay action")

        belief = decision.chosen_evaluation.next_belief
        state, obs = world.step(state, decision.chosen, rng)

        result.decisions.append(decision)
        result.beliefs.append(belief)
        result.states.append(state)
        result.observations.append(obs)

        result.outcome = world.check_termination(state)
        if result.outcome is not Outcome.CONTINUE:
            logger.info(f"[MISSION] {result.outcome.value} after {t + 1} step(s)")
            return result

    result.outcome = Outcome.HORIZON_EXCEEDED
    return result
