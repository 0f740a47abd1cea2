"""
Configuration settings for fracjac
Directories, numerical defaults and logging setup.
"""
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from loguru import logger

load_dotenv()

# Project directories
BASE_DIR = Path(os.getenv("FRACJAC_HOME", Path(__file__).parent))
DATA_DIR = BASE_DIR / "data"
LOGS_DIR = BASE_DIR / "logs"
REPORTS_DIR = BASE_DIR / "reports"

# Create directories if they don't exist
DATA_DIR.mkdir(parents=True, exist_ok=True)
LOGS_DIR.mkdir(parents=True, exist_ok=True)

# File paths
LOG_FILE = LOGS_DIR / "fracjac.log"
RUN_LOG_DB = DATA_DIR / "runs.db"

LOG_LEVEL = os.getenv("FRACJAC_LOG_LEVEL", "WARNING")

# Grids and quadrature
DEFAULT_RESOLUTION = int(os.getenv("FRACJAC_RESOLUTION", "64"))
MIN_RESOLUTION = 4
KERNEL_POINTS_PER_AXIS = 25
PAIR_BLOCK_ROWS = 256

# Newton / regular values
NEWTON_MAX_ITER = 30
NEWTON_STEP_TOL = 1e-12
REGULAR_DET_FLOOR = 1e-8
SINGULAR_FIBER_FACTOR = 1e-8
DEGREE_ACCEPT_GAP = 0.1

# Level-set tracing
TRACE_TOL_FACTOR = 1e-9
TRACE_STEP_CAP = 0.01
TRACE_STEP_GAIN = 0.2
TRACE_SINGULAR_FLOOR = 1e-6
TRACE_MAX_STEPS = 20000

# Experiment tolerances
STOCHASTIC_REL_TOL = 0.02
STOCHASTIC_SIGMAS = 3.0
DETERMINISTIC_REL_TOL = 1e-3
BRACKET_OVERLAP_TOL = 0.05
SAMPLER_INFLATION = 0.20
UNRELIABLE_SKIP_FRACTION = 0.10

DEFAULT_SEED = 42

_LOGGING_READY = False


def setup_logging(level: str = None):
    """
    Install the stderr and rotating file sinks once per process.

    Args:
        level: stderr level override (default: FRACJAC_LOG_LEVEL)
    """
    global _LOGGING_READY
    if _LOGGING_READY:
        return
    logger.remove()
    logger.add(sys.stderr, level=level or LOG_LEVEL)
    logger.add(
        LOG_FILE,
        rotation="1 day",
        retention="30 days",
        level="INFO"
    )
    _LOGGING_READY = True
