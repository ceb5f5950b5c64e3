"""Shared constants for tolerances, scenario defaults and environment overrides."""

# Numerical tolerances
SIMPLEX_TOLERANCE = 1e-9
IMPOSSIBLE_OBSERVATION_CUTOFF = 1e-12
MARGIN_TOLERANCE = 1e-12
TRACE_VALUE_TOLERANCE = 1e-9

# Barrier defaults
DEFAULT_ALPHA0 = 0.5
DEFAULT_THETA = 0.95
KAPPA_GRID_POINTS = 100

# Grid world defaults
DEFAULT_GRID = (10, 10)
DEFAULT_P_SUCC = 0.85
DEFAULT_SENSING = {
    "uav": {"radius": 2, "habitable_accuracy": 0.6, "sample_accuracy": 0.9},
    "flipper": {"radius": 1, "habitable_accuracy": 0.9, "sample_accuracy": 0.6},
}
DEFAULT_REWARD_WEIGHTS = {
    "info_habitable": 1.0,
    "info_sample": 1.0,
    "sample_attract": 10.0,
    "danger": 10.0,
}
INITIAL_CELL_BELIEF = 0.5

# Planner / mission defaults
DEFAULT_ALGORITHM = "filter"
ALGORITHMS = ("greedy", "per-agent", "filter", "nominal")
DEADLOCK_POLICIES = ("abort", "stay")
DEFAULT_HORIZON = 60

# Environment variables
OUTPUT_DIR_ENV = "MPOMDP_OUTPUT_DIR"
LOG_ROOT_ENV = "MPOMDP_LOG_ROOT"
DEFAULT_OUTPUT_DIR = "outputs"
