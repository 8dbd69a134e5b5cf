"""
Configuration management for frontlab
Loads environment variables and defines numerical defaults
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv

from utils.errors import ConfigError

# Load environment variables
load_dotenv()


class Config:
    """Application configuration"""

    # Runtime
    THREADS = os.getenv("FRONTLAB_THREADS", "")
    LOG_LEVEL = os.getenv("FRONTLAB_LOG_LEVEL", "INFO").upper()
    OUTPUT_DIR = os.getenv("FRONTLAB_OUTPUT_DIR", "out")
    DEBUG_MODE = os.getenv("FRONTLAB_DEBUG", "False").lower() == "true"

    # Time stepping
    GRID_SPACING = 0.1
    TIME_STEP = 0.005
    DT_SAFETY = 0.5

    # Equilibria
    EQUILIBRIUM_TOL = 1e-10
    EQUILIBRIUM_NEWTON_TOL = 1e-12
    EQUILIBRIUM_DEDUP = 1e-6
    NEWTON_MAX_ITER = 50

    # Double roots / spreading speeds
    DOUBLE_ROOT_TOL = 1e-10
    DOUBLE_ROOT_DEDUP = 1e-8
    DEGENERACY_TOL = 1e-8
    PINCH_PATH_LENGTH = 50.0
    PINCH_TREND_WINDOW = 0.2
    C_MAX = 20.0

    # Fronts
    SHOOT_OFFSET = 1e-7
    SHOOT_RTOL = 1e-11
    BVP_TOL = 1e-10
    STEEPNESS_TOL = 0.2
    TAIL_WINDOW = (0.5, 0.9)
    TAIL_FLOOR = 1e-11

    # Spectra
    SPECTRUM_TOL = 1e-8
    ESSENTIAL_FILTER = 1e-3
    KERNEL_TOL = 1e-6

    # Tracking
    WAKE_OFFSET = 20.0
    WAKE_TOL = 0.05
    FIT_FRACTION = 0.4
    SUBLINEAR_TOL = 0.05
    DOMAIN_MARGIN = 0.1

    # Output
    SIGNIFICANT_DIGITS = 12

    @staticmethod
    def resolve_threads(requested: Optional[int] = None) -> int:
        """Parallelism for sweeps; FRONTLAB_THREADS wins over the config value"""
        if Config.THREADS:
            return int(Config.THREADS)
        if requested is None:
            return 1
        return max(1, int(requested))

    @staticmethod
    def validate_config():
        """Validate environment-provided settings"""
        if Config.THREADS:
            try:
                threads = int(Config.THREADS)
            except ValueError:
                raise ConfigError(f"FRONTLAB_THREADS must be an integer, got {Config.THREADS!r}")
            if threads < 1:
                raise ConfigError(f"FRONTLAB_THREADS must be >= 1, got {threads}")
        if Config.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigError(f"FRONTLAB_LOG_LEVEL not recognised: {Config.LOG_LEVEL!r}")
        return True


def setup_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for CLI use"""
    level_name = (level or ("DEBUG" if Config.DEBUG_MODE else Config.LOG_LEVEL)).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
