# Licensed under the MIT license.

"""
common constants
"""

PERFMM_PACKAGE_NAME = __name__.split('.')[0]

# Strategy labels, in reporting order
STRATEGY_AS = "as"
STRATEGY_SYMMETRIC = "symmetric"
STRATEGY_PERFORMATIVE = "performative"
STRATEGY_THETA = "theta"
ALL_STRATEGIES = [STRATEGY_AS, STRATEGY_SYMMETRIC, STRATEGY_PERFORMATIVE, STRATEGY_THETA]

# Fill rules
FILL_LINEAR = "linear-prob"
FILL_EXPONENTIAL = "exponential-prob"
POSSIBLE_FILL_RULES = [FILL_LINEAR, FILL_EXPONENTIAL]

# Price steppers
STEPPER_EULER = "euler"
STEPPER_EXACT = "exact"
POSSIBLE_STEPPERS = [STEPPER_EULER, STEPPER_EXACT]

# Tuner objectives
OBJECTIVE_MEAN_PNL = "mean-pnl"
OBJECTIVE_SHARPE = "sharpe"
OBJECTIVE_MEAN_UTILITY = "mean-utility"
POSSIBLE_OBJECTIVES = [OBJECTIVE_MEAN_PNL, OBJECTIVE_SHARPE, OBJECTIVE_MEAN_UTILITY]

# Noise substream tags. The integer codes are part of the seeding scheme and must stay stable:
# stream entropy is (master_seed, path_index, tag code).
STREAM_PRICE = "price"
STREAM_TAGS = {
    STREAM_PRICE: 0,
    "fills:driver": 1,
    "fills:" + STRATEGY_AS: 2,
    "fills:" + STRATEGY_SYMMETRIC: 3,
    "fills:" + STRATEGY_PERFORMATIVE: 4,
    "fills:" + STRATEGY_THETA: 5,
}

# Paths are simulated in fixed-size batches; the batch size never depends on the thread count
PATH_BATCH_SIZE = 250

# Relative tolerance for N * dt == T
GRID_TOLERANCE = 1e-12

# Output files
SWEEP_FILE = "sweep.csv"
DECOMPOSE_FILE = "decompose.csv"
SESSION_FILE = "session.csv"
THETAS_FILE = "thetas.csv"
MANIFEST_FILE = "manifest.json"

SCHEMA_VERSION = "1"
SWEEP_COLUMNS = ["strategy", "gamma", "xi", "mean_pnl", "std_pnl", "sharpe",
                 "mean_term_inv", "std_term_inv", "paths", "seed"]
DECOMPOSE_COLUMNS = ["t", "impact", "deterministic", "mid_price"]
THETAS_COLUMNS = ["gamma", "xi", "theta0", "theta1", "theta2", "train_objective", "test_objective"]
CSV_FLOAT_FORMAT = "%.6g"

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

# Environment variables
ENV_PERFMM_DEBUG_MODE = "PERFMM_DEBUG_MODE"
ENV_PERFMM_TEMP_DIRECTORY = "PERFMM_TEMP_DIRECTORY"
