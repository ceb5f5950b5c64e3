"""Bundled scenario and model files."""
from pathlib import Path

SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"
DEFAULT_SCENARIO = SCENARIO_DIR / "default_10x10.json"
ADVERSARIAL_SCENARIO = SCENARIO_DIR / "adversarial_10x10.json"
TOY_MODEL = SCENARIO_DIR / "toy_corridor_model.json"
