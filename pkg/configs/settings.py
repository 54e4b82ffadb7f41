# --- Logging ---
LOG_DIR_ENV = "RETINA_LIMIT_LOG_DIR"
DEFAULT_LOG_DIR = "logs"

# --- Reference data / configuration ---
DATA_DIR_ENV = "RETINA_LIMIT_DATA_DIR"
CONFIG_PATH_ENV = "RETINA_LIMIT_CONFIG"
MODEL_FILE_NAME = "reference_model.json"
POPULATION_FILE_NAME = "reference_population.json"
OUTPUT_SCHEMA_VERSION = 1

# --- Model domain ---
MEASURED_ECCENTRICITY_MAX = 20.0   # degrees; larger values are extrapolation
PPD_PER_CPD = 2.0

# --- Psychometric function (2IFC) ---
WEIBULL_SLOPE = 3.5
GUESS_RATE = 0.5
LAPSE_RATE = 0.02

# --- QUEST ---
QUEST_STOP_SD = 0.07
QUEST_MIN_TRIALS = 30
QUEST_MAX_TRIALS = 50
QUEST_GRID_POINTS = 400
QUEST_GRID_MIN_CPD = 0.5
QUEST_GRID_MAX_CPD = 80.0
QUEST_PRIOR_CPD = 30.0
QUEST_PRIOR_SD = 0.5
REPEATS_PER_TRIAL = 3

# --- Psychometric MLE ---
MLE_MIN_TRIALS = 10
MLE_MIN_LEVELS = 3
MLE_GRID_POINTS = 801

# --- Model regression ---
FIT_MAX_ITERATIONS = 200
FIT_TOLERANCE = 1e-12

# --- Outlier rule ---
MAD_Z_THRESHOLD = 3.5
MAD_CONSISTENCY = 0.6745
MEAN_AD_CONSISTENCY = 1.2533

# --- Moving display planner ---
RAIL_MIN_M = 1.1
RAIL_MAX_M = 2.7
SUBSAMPLING_FACTORS = (1, 2, 3, 4)

# --- Foveation ---
GAMUT_WARNING_FRACTION = 0.10
