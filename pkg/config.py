"""
Configuration Module
Centralized defaults for the delayed-income Merton verification harness
"""

import math
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

APP_NAME = "Delay Merton Lab"
APP_VERSION = "1.0.0"
ENV_PREFIX = "DELAY_MERTON_"


def _env(name, default, cast=float):
    """Read DELAY_MERTON_<name> from the environment, falling back to default"""
    raw = os.getenv(ENV_PREFIX + name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        import warnings
        warnings.warn(
            f"Ignoring {ENV_PREFIX}{name}={raw!r}: expected {cast.__name__}"
        )
        return default


# ============================================================================
# RUN DEFAULTS
# ============================================================================

DEFAULT_DT = _env('DT', 1.0 / 250.0)  # years
DEFAULT_HORIZON = _env('HORIZON', 60.0)  # years
DEFAULT_PATHS = _env('PATHS', 20000, int)
DEFAULT_GRID = _env('GRID', 50, int)  # subintervals of [-d, 0]
DEFAULT_SEED = _env('SEED', 20240601, int)

# Closed-loop path dumps (policy-sim / simulate-income)
DEFAULT_SIM_PATHS = _env('SIM_PATHS', 100, int)
DEFAULT_RECORD_EVERY = _env('RECORD_EVERY', 25, int)

# Human-capital oracle: step is ds / HC_ORACLE_STEPS_PER_CELL,
# horizon is ln(1 / HC_ORACLE_TAIL_FRACTION) / (beta - beta_bar_inf) capped
HC_ORACLE_STEPS_PER_CELL = 2
HC_ORACLE_TAIL_FRACTION = 1e-3
HC_ORACLE_MAX_HORIZON = 400.0

# ============================================================================
# VALIDATION CONFIGURATION
# ============================================================================

VALIDATION_MARGIN = 1e-10  # strict margin on the two standing hypotheses
GAMMA_EXCLUSION = 1e-6  # |gamma - 1| below this is rejected
SIGMA_CONDITION_MAX = 1e12
BOUNDARY_REL_TOL = 1e-12  # |Gamma| <= tol * max(1, |w|, |hc|) is the boundary
BOUNDARY_DRIFT_REL = 1e-3  # |Gamma| / max(1, |hc|) a boundary start may reach through quadrature error
QUADRATURE_TOL = 1e-10
STEP_RATIO_TOL = 1e-9  # ds / dt must be an integer to this relative tolerance

# ============================================================================
# MONTE CARLO CONFIGURATION
# ============================================================================

PATH_BLOCK = 2500  # paths per RNG stream; part of the reproducibility contract
DEFAULT_WORKERS = _env('WORKERS', 1, int)
CONFIDENCE_Z = 3.0  # "within 3 standard errors"
VALUE_BIAS_REL = 5e-3  # time-step bias allowed against the truncated value target
CI_LEVEL = 0.99  # printed confidence interval

# Acceptance-suite knobs
CONSUMPTION_PERTURBATION = 0.2
SUBOPTIMALITY_MIN_PATHS = 10000  # the paired gap at gamma < 1 is noisy below this
SUITE_GAMMAS = (0.5, 2.0)
CONVERGENCE_RATIO_MIN = 1.3
CONVERGENCE_HALVINGS = 3
CONVERGENCE_BASE_DT = 0.004
CONVERGENCE_HORIZON = 1.0
CONVERGENCE_PATHS = 50
HOMOGENEITY_STATES = 100
HOMOGENEITY_TOL = 1e-12
WEDGE_TOL = 1e-12
IDENTITY_TOL = 1e-10  # Gamma = W + human capital along stored paths
ODE_GRIDS = (50, 100, 200, 400)
ODE_RATIO_MIN = 1.5  # residual ratio per doubling of m

# ============================================================================
# OUTPUT CONFIGURATION
# ============================================================================

DEFAULT_OUT_DIR = Path(os.getenv(ENV_PREFIX + 'OUT_DIR', 'output'))
OUTPUT_FORMATS = ('text', 'csv', 'json')
DEFAULT_FORMAT = os.getenv(ENV_PREFIX + 'FORMAT', 'text')
CSV_FLOAT_FORMAT = '%.12g'
MANIFEST_FILE = 'manifest.json'
RUN_INFO_FILE = 'run_info.json'
FAN_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
SCENARIO_DIR = Path(__file__).resolve().parent / 'scenarios'

# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

LOG_LEVEL = os.getenv(ENV_PREFIX + 'LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(name)s - %(message)s'

# ============================================================================
# EXIT CODES
# ============================================================================

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_CHECK_FAILED = 4


# ============================================================================
# HELPER FUNCTIONS
# ============================================================================

def hc_oracle_horizon(beta, beta_bar_inf):
    """Horizon at which the human-capital integrand has decayed by HC_ORACLE_TAIL_FRACTION"""
    gap = beta - beta_bar_inf
    if gap <= 0:
        return HC_ORACLE_MAX_HORIZON
    return min(math.log(1.0 / HC_ORACLE_TAIL_FRACTION) / gap, HC_ORACLE_MAX_HORIZON)


def get_run_defaults():
    """Get the run controls used when neither the scenario nor the flags set them"""
    return {
        'T': DEFAULT_HORIZON,
        'dt': DEFAULT_DT,
        'n_paths': DEFAULT_PATHS,
        'seed': DEFAULT_SEED,
        'sim_paths': DEFAULT_SIM_PATHS,
        'record_every': DEFAULT_RECORD_EVERY,
        'workers': DEFAULT_WORKERS,
        'out_dir': str(DEFAULT_OUT_DIR),
        'format': DEFAULT_FORMAT,
    }


def validate_config():
    """Validate configuration parameters"""
    errors = []

    if DEFAULT_DT <= 0:
        errors.append("DEFAULT_DT must be positive")

    if DEFAULT_HORIZON < 0:
        errors.append("DEFAULT_HORIZON cannot be negative")

    if DEFAULT_PATHS < 2:
        errors.append("DEFAULT_PATHS must be at least 2 (standard error needs two paths)")

    if DEFAULT_GRID < 2:
        errors.append("DEFAULT_GRID must be at least 2")

    if PATH_BLOCK < 1:
        errors.append("PATH_BLOCK must be positive")

    if DEFAULT_WORKERS < 1:
        errors.append("DEFAULT_WORKERS must be at least 1")

    if DEFAULT_RECORD_EVERY < 1:
        errors.append("DEFAULT_RECORD_EVERY must be at least 1")

    if DEFAULT_FORMAT not in OUTPUT_FORMATS:
        errors.append(f"DEFAULT_FORMAT must be one of {OUTPUT_FORMATS}")

    if not 0 < CONSUMPTION_PERTURBATION < 1:
        errors.append("CONSUMPTION_PERTURBATION must lie in (0, 1)")

    if not 0 <= VALUE_BIAS_REL < 1:
        errors.append("VALUE_BIAS_REL must lie in [0, 1)")

    if SUBOPTIMALITY_MIN_PATHS < 2:
        errors.append("SUBOPTIMALITY_MIN_PATHS must be at least 2")

    if LOG_LEVEL not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
        errors.append(f"LOG_LEVEL {LOG_LEVEL!r} is not a logging level")

    return errors


def print_config():
    """Print current configuration"""
    print("\n" + "="*60)
    print(f"{APP_NAME.upper()} - CONFIGURATION")
    print("="*60)

    print("\n[Run Defaults]")
    print(f"  Step dt: {DEFAULT_DT:g} years")
    print(f"  Horizon T: {DEFAULT_HORIZON:g} years")
    print(f"  Paths: {DEFAULT_PATHS}")
    print(f"  Delay grid m: {DEFAULT_GRID}")
    print(f"  Seed: {DEFAULT_SEED}")

    print("\n[Validation]")
    print(f"  Hypothesis margin: {VALIDATION_MARGIN:g}")
    print(f"  |gamma - 1| exclusion: {GAMMA_EXCLUSION:g}")
    print(f"  Sigma condition ceiling: {SIGMA_CONDITION_MAX:g}")
    print(f"  Boundary tolerance: {BOUNDARY_REL_TOL:g} (relative)")

    print("\n[Monte Carlo]")
    print(f"  Paths per RNG block: {PATH_BLOCK}")
    print(f"  Workers: {DEFAULT_WORKERS}")
    print(f"  Consumption perturbation: +/-{CONSUMPTION_PERTURBATION:.0%}")
    print(f"  Value bias allowance: {VALUE_BIAS_REL:g} (relative)")
    print(f"  Suboptimality paths: >= {SUBOPTIMALITY_MIN_PATHS}")

    print("\n[Output]")
    print(f"  Directory: {DEFAULT_OUT_DIR}")
    print(f"  Format: {DEFAULT_FORMAT}")
    print(f"  Log level: {LOG_LEVEL}")

    print("\n" + "="*60 + "\n")


if __name__ == "__main__":
    # Validate configuration on load
    errors = validate_config()
    if errors:
        print("Configuration errors found:")
        for error in errors:
            print(f"  ⚠️ {error}")
    else:
        print("✅ Configuration is valid")

    # Print configuration
    print_config()
