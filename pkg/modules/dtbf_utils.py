"""
Discrete-Time Barrier Function Utilities

Barrier functions over beliefs and the one-step safety condition

    h(b_next) - h(b_prev) >= -alpha(h(b_prev))

with constant or general class-K functions alpha, Boolean composition
(min for conjunction, max for disjunction), per-component negation, and
trace-level invariance checks including the constant-alpha decay bound.

Beliefs are opaque here: a barrier component is any callable belief -> float,
so the same code serves flat belief vectors and factored grid beliefs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from modules.constants import (
    DEFAULT_ALPHA0,
    KAPPA_GRID_POINTS,
    MARGIN_TOLERANCE,
    TRACE_VALUE_TOLERANCE,
)

logger = logging.getLogger(__name__)

BarrierFn = Callable[[Any], float]


# ============================================================================
# CLASS-K FUNCTIONS
# ============================================================================

@dataclass(frozen=True)
class ConstantKappa:
    """alpha(r) = alpha0 * r with alpha0 in (0, 1)."""

    alpha0: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha0 < 1.0:
            raise ValueError(f"alpha0 must lie in (0, 1), got {self.alpha0}")

    def __call__(self, r: float) -> float:
        return self.alpha0 * r


@dataclass(frozen=True)
class GeneralKappa:
    """
    Arbitrary class-K function, validated on a sampled grid over [0, r_max].

    Negative arguments use the odd extension alpha(r) = -alpha(-r).
    """

    fn: Callable[[float], float]
    r_max: float = 1.0
    grid_points: int = KAPPA_GRID_POINTS

    def __post_init__(self) -> None:
        if self.r_max <= 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")

        grid = np.linspace(0.0, self.r_max, self.grid_points)
        values = np.array([float(self.fn(r)) for r in grid])

        if abs(values[0]) > MARGIN_TOLERANCE:
            raise ValueError(f"alpha(0) must be 0, got {values[0]}")
        if np.any(np.diff(values) <= 0):
            raise ValueError("alpha must be strictly increasing on [0, r_max]")
        if np.any(values[1:] >= grid[1:]):
            raise ValueError("alpha(r) must be smaller than r for r > 0")

    def __call__(self, r: float) -> float:
        if r < 0:
            return -float(self.fn(-r))
        return float(self.fn(r))


KappaFn = Union[ConstantKappa, GeneralKappa]


# ============================================================================
# BARRIER SPECS
# ============================================================================

class Composition(str, Enum):
    SINGLE = "single"
    CONJUNCTION = "conjunction"
    DISJUNCTION = "disjunction"


@dataclass(frozen=True)
class BarrierSpec:
    """
    Barrier over beliefs: components, how they combine and the class-K function.

    Attributes:
        components: Barrier functions h_i(b)
        composition: SINGLE, CONJUNCTION (min) or DISJUNCTION (max)
        kappa: Class-K function applied to the composed value
        negated: Per-component flags; a negated component contributes -h_i(b)
    """

    components: Tuple[BarrierFn, ...]
    composition: Composition = Composition.SINGLE
    kappa: KappaFn = field(default_factory=lambda: ConstantKappa(DEFAULT_ALPHA0))
    negated: Tuple[bool, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "composition", Composition(self.composition))
        negated = tuple(self.negated) or (False,) * len(self.components)
        object.__setattr__(self, "negated", negated)

        if not self.components:
            raise ValueError("BarrierSpec needs at least one component")
        if self.composition is Composition.SINGLE and len(self.components) != 1:
            raise ValueError(
                f"Single composition requires exactly one component, got {len(self.components)}"
            )
        if len(self.negated) != len(self.components):
            raise ValueError("negated must have one flag per component")

    @classmethod
    def single(cls, h: BarrierFn, kappa: KappaFn, negated: bool = False) -> "BarrierSpec":
        return cls((h,), Composition.SINGLE, kappa, (negated,))

    def component_values(self, belief: Any) -> List[float]:
        return [
            -float(h(belief)) if neg else float(h(belief))
            for h, neg in zip(self.components, self.negated)
        ]


def barrier_value(spec: BarrierSpec, belief: Any) -> float:
    """Composed barrier value: h, min_i h_i or max_i h_i after negation."""
    values = spec.component_values(belief)
    if spec.composition is Composition.CONJUNCTION:
        return min(values)
    if spec.composition is Composition.DISJUNCTION:
        return max(values)
    return values[0]


def condition_margin(kappa: KappaFn, h_prev: float, h_next: float) -> float:
    """h_next - h_prev + alpha(h_prev)."""
    return h_next - h_prev + kappa(h_prev)


def dtbf_condition(spec: BarrierSpec, b_prev: Any, b_next: Any) -> Tuple[bool, float]:
    """
    Evaluate the one-step barrier condition on the composed barrier.

    Returns:
        (satisfied, margin) with satisfied iff margin >= -1e-12
    """
    margin = condition_margin(spec.kappa, barrier_value(spec, b_prev), barrier_value(spec, b_next))
    return margin >= -MARGIN_TOLERANCE, margin


def decay_lower_bound(h0: float, alpha0: float, t: int) -> float:
    """Closed-form lower bound (1 - alpha0)^t * h0 for constant alpha."""
    if t < 0:
        raise ValueError(f"Step count must be non-negative, got {t}")
    return (1.0 - alpha0) ** t * h0


# ============================================================================
# TRACE VERIFICATION
# ============================================================================

@dataclass
class TraceReport:
    """Outcome of checking a belief trace against the barrier condition."""

    values: List[float]
    verdicts: List[bool]
    margins: List[float]
    first_violation: Optional[int] = None
    decay_checked: bool = False
    decay_verdicts: List[bool] = field(default_factory=list)
    nonnegative_verdicts: List[bool] = field(default_factory=list)

    @property
    def violations(self) -> List[int]:
        return [i for i, ok in enumerate(self.verdicts) if not ok]

    @property
    def ok(self) -> bool:
        return (
            self.first_violation is None
            and all(self.decay_verdicts)
            and all(self.nonnegative_verdicts)
        )

    def to_dict(self) -> dict:
        return {
            "steps": len(self.values),
            "first_violation": self.first_violation,
            "violations": self.violations,
            "min_value": min(self.values) if self.values else None,
            "decay_checked": self.decay_checked,
            "decay_ok": all(self.decay_verdicts),
            "nonnegative_ok": all(self.nonnegative_verdicts),
            "ok": self.ok,
        }


def verify_barrier_values(values: Sequence[float], kappa: KappaFn) -> TraceReport:
    """
    Check a sequence of recorded barrier values.

    Each adjacent pair must satisfy the condition. With a constant kappa and a
    nonnegative start, every value must also stay above the decay bound and
    above zero (both within 1e-9).
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("Trace must contain at least one belief")

    margins = [condition_margin(kappa, h_prev, h_next) for h_prev, h_next in zip(values, values[1:])]
    verdicts = [m >= -MARGIN_TOLERANCE for m in margins]
    first_violation = next((i for i, ok in enumerate(verdicts) if not ok), None)

    report = TraceReport(values=values, verdicts=verdicts, margins=margins, first_violation=first_violation)

    if isinstance(kappa, ConstantKappa) and values[0] >= 0:
        report.decay_checked = True
        report.decay_verdicts = [
            v >= decay_lower_bound(values[0], kappa.alpha0, t) - TRACE_VALUE_TOLERANCE
            for t, v in enumerate(values)
        ]
        report.nonnegative_verdicts = [v >= -TRACE_VALUE_TOLERANCE for v in values]

    if first_violation is not None:
        logger.info(
            f"✗ Barrier condition violated at step {first_violation} "
            f"(margin {margins[first_violation]:.3e})"
        )
    return report


def verify_invariance_on_trace(spec: BarrierSpec, trace: Sequence[Any]) -> TraceReport:
    """Evaluate the barrier along a belief trace and verify it."""
    if len(trace) == 0:
        raise ValueError("Trace must contain at least one belief")
    return verify_barrier_values([barrier_value(spec, b) for b in trace], spec.kappa)
