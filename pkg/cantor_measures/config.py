import os

# ---------------- Workspace ----------------
WORKSPACE_ENV = "CANTOR_WORKSPACE"
DEFAULT_WORKSPACE = os.environ.get(WORKSPACE_ENV, ".")
DESCRIPTOR_DIR = "descriptors"
SNAPSHOT_DIR = "snapshots"
RUN_LOG_DIR = "runs"
SNAPSHOT_FORMAT = 1

# ---------------- Logging ----------------
LOG_LEVEL = os.environ.get("CANTOR_LOG_LEVEL", "WARNING").upper()
LOG_FORMAT = "[{level}] {message}"

# ---------------- Exact comparison ----------------
START_PRECISION_BITS = 16
MAX_PRECISION_BITS = int(os.environ.get("CANTOR_MAX_PRECISION_BITS", "4096"))
CONSTANT_GUARD_BITS = 24

# ---------------- Searches ----------------
DEFAULT_EFFORT = 10**6
CLOSURE_SEARCH_LIMIT = 10_000
CLOSURE_VALUE_HEIGHT = 12

# ---------------- check-good sweep ----------------
SWEEP_MAX_CELLS = 8
MAXIMALITY_SAMPLE = 50
AUTO_EXTEND_BUDGET = 8
DEFAULT_BUDGET = 3
CLOSURE_SAMPLES = 20
