# config.py
import os
from dotenv import load_dotenv

load_dotenv()

# Logging
LOG_LEVEL = os.getenv("NOISE_LOG_LEVEL", "INFO")
SHOW_PROGRESS = os.getenv("NOISE_SHOW_PROGRESS", "1") not in ("0", "false", "False", "")

# Worker processes used by the Jacobian engine, the Monte-Carlo oracle and optimizer restarts
DEFAULT_THREADS = int(os.getenv("NOISE_THREADS", "1"))

# Output locations
OUTPUT_DIR = os.getenv("NOISE_OUTPUT_DIR", "runs")
DATABASE_PATH = os.getenv("NOISE_DATABASE_PATH", os.path.join("data", "run_registry.db"))

# Bundled experiment configuration
PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG_PATH = os.getenv(
    "NOISE_CONFIG", os.path.join(PROJECT_ROOT, "configs", "fission_default.yaml")
)

TOOLKIT_VERSION = "0.3.0"
