"""Configuration"""

import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv(Path(__file__).parent.parent / ".env.local")

ROOT_DIR = Path(__file__).parent.parent
STATIC_DIR = ROOT_DIR / "static"
TRACES_DIR = STATIC_DIR / "traces"
CONFIGS_DIR = STATIC_DIR / "configs"
OUTPUT_DIR = Path(os.getenv("SERENIOT_OUTPUT_DIR", "outputs"))
LOG_LEVEL = os.getenv("SERENIOT_LOG_LEVEL", "INFO").upper()

# Protocol defaults (simulated seconds unless noted)
BLOCK_INTERVAL = 20.0
PROFILING_DURATION = 60.0
REPLAY_MEAN_INTERVAL = 3.0
SHARE_WINDOW_BLOCKS = 10
SHARES_PER_WINDOW = 8
CONFIRMATION_DEPTH = 20
PRUNE_DEPTH = 30
SYNC_TIMEOUT = 5.0
SYNC_RETRIES = 3
SYNC_FANOUT = 3
SYNC_THROTTLE_BASE = 0.1
SYNC_THROTTLE_WINDOW = 60.0

# Network defaults
LATENCY_MIN_MS = 10.0
LATENCY_MAX_MS = 100.0
CONNECT_JITTER = 5.0

# REAL_POW mining in the simulator
POW_TICK = 1.0
NONCES_PER_TICK = 64
SHARE_RATIO = 16

GROWTH_BUCKET = 3600.0
