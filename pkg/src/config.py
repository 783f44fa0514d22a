"""
Main configuration module for measure2shape
"""
import os
from pathlib import Path

import numpy as np
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    """Application configuration"""

    # Prediction parameters (l, lambda, s)
    CLAMP_L = float(os.getenv("M2S_CLAMP_L", "3"))
    SMOOTHNESS_LAMBDA = float(os.getenv("M2S_SMOOTHNESS_LAMBDA", "0.1"))
    RECOMPUTE_S = int(os.getenv("M2S_RECOMPUTE_S", "3"))

    # Solver stopping rules
    MAX_ITERATIONS = int(os.getenv("M2S_MAX_ITERATIONS", "100"))
    GRADIENT_TOLERANCE = float(os.getenv("M2S_GRADIENT_TOLERANCE", "1e-8"))
    RELATIVE_ENERGY_FACTOR = float(os.getenv("M2S_RELATIVE_ENERGY_FACTOR", "1e8"))
    HISTORY_SIZE = int(os.getenv("M2S_HISTORY_SIZE", "10"))

    # Feature analysis
    FEATURE_NORMALIZATION = os.getenv("M2S_FEATURE_NORMALIZATION", "eigenvalue")
    FEATURE_RIDGE = float(os.getenv("M2S_FEATURE_RIDGE", "1e-8"))

    # Synthetic data
    TEMPLATE_RESOLUTION = int(os.getenv("M2S_TEMPLATE_RESOLUTION", "30"))

    # Runtime
    THREADS = int(os.getenv("M2S_THREADS", "1"))
    LOG_LEVEL = os.getenv("M2S_LOG_LEVEL", "INFO")

    # Geometry tolerances (millimetres)
    ON_PLANE_TOLERANCE = 1e-9
    UNIT_NORMAL_TOLERANCE = 1e-12

    # File paths
    ROOT_DIR = Path(__file__).parent.parent
    TEMPLATES_DIR = ROOT_DIR / "templates"
    OUTPUT_DIR = Path(os.getenv("M2S_OUTPUT_DIR", str(ROOT_DIR / "output")))

    @property
    def relative_energy_tolerance(self) -> float:
        return self.RELATIVE_ENERGY_FACTOR * np.finfo(float).eps

    @classmethod
    def ensure_directories(cls):
        """Ensure required directories exist"""
        cls.OUTPUT_DIR.mkdir(parents=True, exist_ok=True)


config = Config()
