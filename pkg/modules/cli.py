"""
Command-Line Front End

Subcommands:
- run: execute seeded missions and write one JSONL trace per seed plus summary.json
- verify: re-check a recorded trace against the barrier condition
- compare: run the nominal policy unfiltered and through the safety filter on
  the same seeds and export paired outcomes and h trajectories

Exit codes: 0 success, 1 barrier violations (verify) or runtime failure,
2 invalid input, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from config import DEFAULT_SCENARIO
from modules.config_utils import MissionSetup, alpha0_of, load_mission_setup
from modules.constants import ALGORITHMS, DEFAULT_ALPHA0
from modules.dtbf_utils import ConstantKappa, TraceReport, verify_barrier_values
from modules.error_utils import (
    EXIT_OK,
    EXIT_VIOLATIONS,
    InvalidConfig,
    classify_error,
    exit_code_for,
)
from modules.logging_utils import configure_logging, truncate_error_message
from modules.model_utils import make_rng
from modules.path_utils import algorithm_dir, resolve_output_dir, trace_path
from modules.planner import MissionResult, Outcome, PlannerConfig, run_mission
from modules.trace_utils import (
    describer_for,
    h_trajectory_rows,
    mission_records,
    read_trace,
    recomputed_h_values,
    recorded_alpha0,
    recorded_h_values,
    write_compare_table,
    write_h_trajectories,
    write_jsonl,
)
from modules.worker_utils import run_seeds

logger = logging.getLogger(__name__)

REPORTED_OUTCOMES = (
    Outcome.SUCCESS,
    Outcome.FAILURE,
    Outcome.HORIZON_EXCEEDED,
    Outcome.SAFETY_DEADLOCK,
)


# ============================================================================
# MISSION EXECUTION
# ============================================================================

@dataclass
class SeedRun:
    """One executed mission with its serialized trace and verification."""

    seed: int
    algorithm: str
    result: MissionResult
    records: List[dict]
    h_values: List[float]
    report: TraceReport
    path: Optional[Path] = None

    @property
    def intervention_steps(self) -> List[int]:
        return [t + 1 for t, d in enumerate(self.result.decisions) if d.intervened]


def run_seed(
    setup: MissionSetup,
    algorithm: str,
    seed: int,
    horizon: int,
    emit_beliefs: bool = False,
    out_root: Optional[Path] = None,
) -> SeedRun:
    """Run one mission from a fresh seeded generator; optionally write its trace."""
    config = PlannerConfig(
        algorithm=algorithm,
        spec=setup.spec,
        agent_barriers=setup.agent_barriers,
        nominal=setup.nominal,
        deadlock_policy=setup.settings.deadlock_policy,
    )
    result = run_mission(
        setup.make_belief_model(),
        setup.world,
        config,
        setup.initial_belief,
        setup.initial_state,
        horizon,
        make_rng(seed),
    )
    records = mission_records(result, setup.spec, describer_for(setup), emit_beliefs)
    values = recorded_h_values(records)
    run = SeedRun(
        seed=seed,
        algorithm=algorithm,
        result=result,
        records=records,
        h_values=values,
        report=verify_barrier_values(values, setup.spec.kappa),
    )
    if out_root is not None:
        run.path = write_jsonl(records, trace_path(out_root, algorithm, seed))

    logger.info(
        f"[MISSION] seed={seed} algorithm={algorithm} outcome={result.outcome.value} "
        f"steps={result.steps} interventions={result.interventions}"
    )
    return run


@dataclass
class RunSummary:
    """Aggregate statistics over the seeds of one algorithm."""

    algorithm: str
    seeds: int
    outcome_counts: Dict[str, int] = field(default_factory=dict)
    intervention_rate: Optional[float] = None
    mean_steps_to_success: Optional[float] = None
    min_barrier_value: Optional[float] = None
    runs_with_violations: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(algorithm: str, runs: Sequence[SeedRun]) -> RunSummary:
    counts = {outcome.value: 0 for outcome in REPORTED_OUTCOMES}
    for run in runs:
        counts[run.result.outcome.value] = counts.get(run.result.outcome.value, 0) + 1

    total_steps = sum(run.result.steps for run in runs)
    total_interventions = sum(run.result.interventions for run in runs)
    success_steps = [run.result.steps for run in runs if run.result.outcome is Outcome.SUCCESS]

    return RunSummary(
        algorithm=algorithm,
        seeds=len(runs),
        outcome_counts=counts,
        intervention_rate=(total_interventions / total_steps) if total_steps else None,
        mean_steps_to_success=(sum(success_steps) / len(success_steps)) if success_steps else None,
        min_barrier_value=min((min(run.h_values) for run in runs), default=None),
        runs_with_violations=sum(1 for run in runs if run.report.violations),
    )


def _seed_list(args: argparse.Namespace, setup: MissionSetup) -> List[int]:
    if args.seed is not None:
        if args.seed < 0:
            raise InvalidConfig(f"--seed must be non-negative, got {args.seed}")
        return [args.seed]
    if args.seeds is not None:
        if args.seeds < 1:
            raise InvalidConfig(f"--seeds must be >= 1, got {args.seeds}")
        return list(range(args.seeds))
    return [setup.settings.seed]


def _load_setup(args: argparse.Namespace, algorithm: Optional[str] = None) -> MissionSetup:
    return load_mission_setup(
        str(args.scenario),
        algorithm=algorithm,
        horizon=args.horizon,
        theta=args.theta,
        alpha0=args.alpha0,
    )


def _write_json(payload: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    return path


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def cmd_run(args: argparse.Namespace) -> int:
    """Run missions for every seed; Failure outcomes are data, not errors."""
    setup = _load_setup(args, algorithm=args.algorithm)
    algorithm = setup.settings.algorithm
    seeds = _seed_list(args, setup)
    out_root = resolve_output_dir(args.out)

    logger.info(f"[RUN] {algorithm} on {len(seeds)} seed(s), horizon {setup.settings.horizon}, output {out_root}")
    runs = run_seeds(
        seeds,
        lambda seed: run_seed(setup, algorithm, seed, setup.settings.horizon, args.emit_beliefs, out_root),
        args.workers,
    )

    summary = summarize(algorithm, runs)
    payload = {"generated_at": datetime.now(timezone.utc).isoformat(), **summary.to_dict()}
    _write_json(payload, algorithm_dir(out_root, algorithm) / "summary.json")

    print(json.dumps(summary.to_dict(), indent=2))
    logger.info(f"✓ Completed {len(runs)} mission(s): {summary.outcome_counts}")
    return EXIT_OK


def _verify_alpha0(args: argparse.Namespace, setup: Optional[MissionSetup], records: List[dict]) -> float:
    # flag > scenario > trace record > default
    if args.alpha0 is not None:
        return args.alpha0
    if setup is not None:
        return alpha0_of(setup)
    recorded = recorded_alpha0(records)
    return recorded if recorded is not None else DEFAULT_ALPHA0


def cmd_verify(args: argparse.Namespace) -> int:
    """Re-check a trace; exit 0 iff the barrier condition holds at every step."""
    records = read_trace(args.trace)

    setup = None
    if args.scenario is not None:
        setup = _load_setup(args)

    try:
        kappa = ConstantKappa(_verify_alpha0(args, setup, records))
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc

    if setup is not None and all("belief" in r for r in records):
        values = recomputed_h_values(records, setup.spec, describer_for(setup))
    else:
        values = recorded_h_values(records)

    report = verify_barrier_values(values, kappa)
    for t, (margin, ok) in enumerate(zip(report.margins, report.verdicts), start=1):
        print(f"t={t:4d} h={values[t]: .12e} margin={margin: .12e} {'ok' if ok else 'VIOLATION'}")

    stored = [r.get("margin") for r in records[1:]]
    mismatches = sum(
        1 for s, m in zip(stored, report.margins) if s is not None and abs(float(s) - m) > 1e-12
    )
    if mismatches:
        logger.warning(f"[VERIFY] {mismatches} recorded margin(s) differ from recomputed values")

    payload = {"trace": str(args.trace), "alpha0": kappa.alpha0, "margin_mismatches": mismatches, **report.to_dict()}
    print(json.dumps(payload, indent=2))
    if report.ok:
        logger.info(f"[VERIFY] ✓ {args.trace}: no violations over {len(values)} belief(s)")
        return EXIT_OK

    logger.info(f"[VERIFY] ✗ {args.trace}: first violation at step {report.first_violation}")
    return EXIT_VIOLATIONS


def cmd_compare(args: argparse.Namespace) -> int:
    """Paired nominal-vs-filtered missions on the same seeds."""
    setup = _load_setup(args, algorithm="filter")
    seeds = _seed_list(args, setup)
    out_root = resolve_output_dir(args.out)
    horizon = setup.settings.horizon

    def pair(seed: int):
        nominal = run_seed(setup, "nominal", seed, horizon, args.emit_beliefs, out_root)
        filtered = run_seed(setup, "filter", seed, horizon, args.emit_beliefs, out_root)
        return nominal, filtered

    pairs = run_seeds(seeds, pair, args.workers)

    rows = []
    trajectories = []
    for nominal, filtered in pairs:
        rows.append(
            {
                "seed": nominal.seed,
                "nominal_outcome": nominal.result.outcome.value,
                "nominal_steps": nominal.result.steps,
                "nominal_violations": len(nominal.report.violations),
                "nominal_min_h": min(nominal.h_values),
                "filter_outcome": filtered.result.outcome.value,
                "filter_steps": filtered.result.steps,
                "filter_interventions": filtered.result.interventions,
                "filter_violations": len(filtered.report.violations),
                "filter_min_h": min(filtered.h_values),
                "intervention_steps": ";".join(str(t) for t in filtered.intervention_steps),
            }
        )
        trajectories.append(h_trajectory_rows("nominal", nominal.seed, nominal.h_values))
        trajectories.append(h_trajectory_rows("filter", filtered.seed, filtered.h_values))

    write_compare_table(rows, Path(out_root) / "compare.csv")
    write_h_trajectories(trajectories, Path(out_root) / "h_trajectories.csv")

    payload = {
        "seeds": len(pairs),
        "nominal": summarize("nominal", [p[0] for p in pairs]).to_dict(),
        "filter": summarize("filter", [p[1] for p in pairs]).to_dict(),
        "pairs": rows,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# ============================================================================
# ENTRY POINT
# ============================================================================

def _add_mission_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", type=Path, default=DEFAULT_SCENARIO, help="Scenario or model JSON file.")
    seeds = parser.add_mutually_exclusive_group()
    seeds.add_argument("--seeds", type=int, help="Run seeds 0..N-1.")
    seeds.add_argument("--seed", type=int, help="Run a single seed.")
    parser.add_argument("--horizon", type=int, help="Maximum number of steps per mission.")
    parser.add_argument("--out", type=Path, help="Output directory (default: $MPOMDP_OUTPUT_DIR or ./outputs).")
    parser.add_argument("--emit-beliefs", action="store_true", help="Store full beliefs in traces.")
    parser.add_argument("--workers", type=int, help="Worker threads for parallel seeds.")


def _add_safety_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--theta", type=float, help="Override the safety threshold.")
    parser.add_argument("--alpha0", type=float, help="Override the constant class-K coefficient.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpomdp-safety",
        description="Safe belief-space planning for multi-agent POMDPs.",
    )
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--no-console-log", action="store_true", help="Log to file only.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run seeded missions and write traces.")
    _add_mission_flags(run)
    _add_safety_flags(run)
    run.add_argument("--algorithm", choices=ALGORITHMS, help="Planner (default: scenario, then filter).")
    run.set_defaults(handler=cmd_run)

    verify = sub.add_parser("verify", help="Verify a recorded trace.")
    verify.add_argument("trace", type=Path, help="JSONL trace file.")
    verify.add_argument("--scenario", type=Path, help="Recompute h from stored beliefs with this configuration.")
    verify.add_argument("--horizon", type=int, help=argparse.SUPPRESS)
    _add_safety_flags(verify)
    verify.set_defaults(handler=cmd_verify)

    compare = sub.add_parser("compare", help="Compare nominal and filtered missions.")
    _add_mission_flags(compare)
    _add_safety_flags(compare)
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if isinstance(exc.code, int) else 2

    configure_logging(
        run_name=f"mission_{args.command}",
        enable_console_logging=not args.no_console_log,
        log_level=getattr(logging, args.log_level),
    )

    try:
        return args.handler(args)
    except Exception as exc:
        category = classify_error(exc)
        message = truncate_error_message(str(exc), 500)
        logger.error(f"✗ {args.command} failed [{category}]: {message}")
        print(f"error [{category}]: {message}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
