"""
Mission Trace Utilities

Serialization of mission results for offline verification and plotting:
- One JSONL record per step (t = 0 carries the initial barrier value and alpha0)
- Trace reading with malformed-input detection
- Barrier value / alpha0 extraction for re-verification
- Tabular exports (h trajectories, compare summary) written with pyarrow
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pyarrow as pa
import pyarrow.csv as pacsv

from modules import gridworld
from modules.dtbf_utils import BarrierSpec, barrier_value, condition_margin
from modules.error_utils import MalformedTrace
from modules.model_utils import JointObservation, MpomdpModel
from modules.planner import MissionResult, Outcome

logger = logging.getLogger(__name__)

H_TRAJECTORY_SCHEMA = pa.schema(
    [
        pa.field("algorithm", pa.string()),
        pa.field("seed", pa.int64()),
        pa.field("t", pa.int64()),
        pa.field("h_value", pa.float64()),
    ]
)

COMPARE_SCHEMA = pa.schema(
    [
        pa.field("seed", pa.int64()),
        pa.field("nominal_outcome", pa.string()),
        pa.field("nominal_steps", pa.int64()),
        pa.field("nominal_violations", pa.int64()),
        pa.field("nominal_min_h", pa.float64()),
        pa.field("filter_outcome", pa.string()),
        pa.field("filter_steps", pa.int64()),
        pa.field("filter_interventions", pa.int64()),
        pa.field("filter_violations", pa.int64()),
        pa.field("filter_min_h", pa.float64()),
        pa.field("intervention_steps", pa.string()),
    ]
)


# ============================================================================
# DESCRIBERS
# ============================================================================

class GridworldDescriber:
    """Renders grid world actions, observations, states and beliefs as JSON values."""

    def __init__(self, scenario: gridworld.ExplorationScenario):
        self.scenario = scenario

    def action(self, action) -> Dict[str, str]:
        return gridworld.action_names(action)

    def observation(self, obs) -> Dict[str, Any]:
        return gridworld.observation_to_dict(obs, self.scenario)

    def state(self, cells: Sequence[int]) -> Dict[str, List[int]]:
        return {agent: list(self.scenario.to_rc(c)) for agent, c in zip(gridworld.AGENTS, cells)}

    def belief(self, belief: gridworld.FactoredBelief) -> Dict[str, Any]:
        return belief.to_dict()

    def parse_belief(self, data: Mapping[str, Any]) -> gridworld.FactoredBelief:
        return gridworld.FactoredBelief.from_dict(data)


class FlatDescriber:
    """Renders flat-model actions, observations and states by their names."""

    def __init__(self, model: MpomdpModel):
        self.model = model

    def action(self, action) -> Dict[str, str]:
        return dict(zip(self.model.agents, self.model.action_names(action)))

    def observation(self, obs: JointObservation) -> Dict[str, str]:
        return {
            agent: self.model.observations_per_agent[i][z]
            for i, (agent, z) in enumerate(zip(self.model.agents, obs.per_agent))
        }

    def state(self, state: int) -> str:
        return self.model.states[int(state)]

    def belief(self, belief: np.ndarray) -> List[float]:
        return [float(p) for p in belief]

    def parse_belief(self, data: Sequence[float]) -> np.ndarray:
        return np.asarray(data, dtype=np.float64)


def describer_for(setup) -> Union[GridworldDescriber, FlatDescriber]:
    if setup.kind == "gridworld":
        return GridworldDescriber(setup.scenario)
    return FlatDescriber(setup.model)


# ============================================================================
# RECORDS
# ============================================================================

def mission_records(
    result: MissionResult,
    spec: BarrierSpec,
    describer,
    emit_beliefs: bool = False,
) -> List[Dict[str, Any]]:
    """
    Build one record per belief in the mission.

    Record t describes the decision that produced b_t (none at t = 0), the
    barrier value h(b_t), the margin against h(b_{t-1}) and the true state and
    observation emitted after the action was executed. Margins are computed from
    the recorded h values so a reader recomputes them exactly.
    """
    values = [float(barrier_value(spec, b)) for b in result.beliefs]
    last = len(result.beliefs) - 1
    records = []

    for t, belief in enumerate(result.beliefs):
        record: Dict[str, Any] = {"t": t}
        if t == 0:
            record.update(
                action=None,
                nominal=None,
                intervened=False,
                deadlock_override=False,
                expected_reward=None,
                margin=None,
                alpha0=getattr(spec.kappa, "alpha0", None),
            )
        else:
            decision = result.decisions[t - 1]
            record.update(
                action=describer.action(decision.chosen),
                nominal=None if decision.nominal is None else describer.action(decision.nominal),
                intervened=decision.intervened,
                deadlock_override=decision.deadlock_override,
                expected_reward=_as_float(decision.chosen_evaluation.reward),
                margin=condition_margin(spec.kappa, values[t - 1], values[t]),
            )

        record.update(
            h_value=values[t],
            observations=describer.observation(result.observations[t]),
            true_cells=describer.state(result.states[t]),
            outcome=result.outcome.value if t == last else Outcome.CONTINUE.value,
        )
        if emit_beliefs:
            record["belief"] = describer.belief(belief)
        records.append(record)
    return records


def _as_float(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


def write_jsonl(records: Sequence[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    """Write records as compact JSON lines; output bytes depend only on the records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record, separators=(",", ":")))
            f.write("\n")
    return path


def read_trace(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """
    Read a JSONL trace.

    Raises:
        FileNotFoundError: If the trace doesn't exist
        MalformedTrace: If the file is empty, a line is not a JSON object, or a
            record carries neither ``h_value`` nor ``belief``
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace file not found: {path}")

    records = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedTrace(f"{path}:{lineno} is not valid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise MalformedTrace(f"{path}:{lineno} is not a JSON object")
            if "h_value" not in record and "belief" not in record:
                raise MalformedTrace(f"{path}:{lineno} has neither h_value nor belief")
            records.append(record)

    if not records:
        raise MalformedTrace(f"Trace {path} is empty")
    return records


def recorded_h_values(records: Sequence[Mapping[str, Any]]) -> List[float]:
    try:
        return [float(r["h_value"]) for r in records]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTrace(f"Trace record without a numeric h_value: {exc}") from exc


def recomputed_h_values(records: Sequence[Mapping[str, Any]], spec: BarrierSpec, describer) -> List[float]:
    """Barrier values evaluated on stored beliefs (traces written with beliefs)."""
    values = []
    for record in records:
        if "belief" not in record:
            raise MalformedTrace(f"Record t={record.get('t')} has no stored belief")
        try:
            belief = describer.parse_belief(record["belief"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTrace(f"Record t={record.get('t')} has an unreadable belief: {exc}") from exc
        values.append(float(barrier_value(spec, belief)))
    return values


def recorded_alpha0(records: Sequence[Mapping[str, Any]]) -> Optional[float]:
    alpha0 = records[0].get("alpha0") if records else None
    return None if alpha0 is None else float(alpha0)


# ============================================================================
# TABULAR EXPORTS
# ============================================================================

def h_trajectory_rows(algorithm: str, seed: int, values: Sequence[float]) -> Dict[str, list]:
    return {
        "algorithm": [algorithm] * len(values),
        "seed": [int(seed)] * len(values),
        "t": list(range(len(values))),
        "h_value": [float(v) for v in values],
    }


def write_h_trajectories(rows: Sequence[Mapping[str, list]], path: Union[str, Path]) -> Path:
    """Concatenate per-run trajectory columns and write them as CSV."""
    columns: Dict[str, list] = {name: [] for name in H_TRAJECTORY_SCHEMA.names}
    for chunk in rows:
        for name in columns:
            columns[name].extend(chunk[name])
    return _write_csv(pa.Table.from_pydict(columns, schema=H_TRAJECTORY_SCHEMA), path)


def write_compare_table(rows: Sequence[Mapping[str, Any]], path: Union[str, Path]) -> Path:
    columns = {name: [row[name] for row in rows] for name in COMPARE_SCHEMA.names}
    return _write_csv(pa.Table.from_pydict(columns, schema=COMPARE_SCHEMA), path)


def _write_csv(table: pa.Table, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pacsv.write_csv(table, str(path))
    logger.info(f"✓ Wrote {table.num_rows} row(s) to {path}")
    return path
