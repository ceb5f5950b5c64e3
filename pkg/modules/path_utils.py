from __future__ import annotations
"""
Path Resolution Utilities

Output directory resolution for mission traces and summaries.

Key Features:
- Explicit flag > environment override > local default
- Per-algorithm trace directories
- Stable per-seed trace file names (seed order sorts lexically)
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

from modules.constants import DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV

logger = logging.getLogger(__name__)

# ============================================================================
# OUTPUT ROOT
# ============================================================================

def resolve_output_dir(explicit: Optional[Union[str, Path]] = None) -> Path:
    """
    Determine the root directory for CLI outputs.

    Args:
        explicit: Directory passed on the command line, if any

    Returns:
        Path: ``explicit`` when given, else ``$MPOMDP_OUTPUT_DIR``, else ``./outputs``
    """
    if explicit:
        return Path(explicit)

    env_override = os.getenv(OUTPUT_DIR_ENV)
    if env_override:
        logger.debug(f"Using output directory from {OUTPUT_DIR_ENV}: {env_override}")
        return Path(env_override)

    return Path(DEFAULT_OUTPUT_DIR)


# ============================================================================
# TRACE LAYOUT
# ============================================================================

def algorithm_dir(out_root: Union[str, Path], algorithm: str, create: bool = True) -> Path:
    """Directory holding all traces of one algorithm (``<out>/<algorithm>``)."""
    path = Path(out_root) / algorithm
    if create:
        path.mkdir(parents=True, exist_ok=True)
    return path


def trace_file_name(seed: int) -> str:
    """File name of a single mission trace, e.g. ``seed_0007.jsonl``."""
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    return f"seed_{seed:04d}.jsonl"


def trace_path(out_root: Union[str, Path], algorithm: str, seed: int) -> Path:
    """Full trace path for ``(algorithm, seed)``, creating the parent directory."""
    return algorithm_dir(out_root, algorithm) / trace_file_name(seed)
