"""
Configuration settings for the warped-product spectral energy lab
"""

import os

# Integration Settings
# All ODE work goes through scipy.integrate.solve_ivp
ODE_METHOD = 'DOP853'           # Explicit 8th order Runge-Kutta with dense output
WARP_ABS_TOL = 1e-10            # Absolute tolerance for f'' = -K f
WARP_REL_TOL = 1e-10            # Relative tolerance for f'' = -K f
MODE_ABS_TOL = 1e-12            # Absolute tolerance for the radial mode ODE
MODE_REL_TOL = 1e-10            # Relative tolerance for the radial mode ODE

# Grid Settings
POINTS_PER_DECADE = 64          # Log-spaced output grid density
FD_REFINEMENT = 32              # Oracle grid is this many times denser than the output grid
DOMAIN_SAMPLES = 256            # Samples used to validate positivity on a profile's domain

# Asymptotics Settings
WINDOW_AGREEMENT_TOL = 1e-3     # Two dyadic windows must agree to this before a limit is trusted
V2_SUP_WARN = 0.1               # sup|V2| on the tail above this is reported as not small
ZERO_CROSSING_REL_TOL = 1e-12   # |u| below this fraction of |u| + r|u'| counts as a zero
COMPARISON_SLACK_FRACTION = 0.1 # Slack on the comparison bounds, as a fraction of max(A, 0.01)
PINCHING_TOL = 1e-9             # Absolute tolerance on the sectional curvature pinching
ROUNDING_FLOOR = 1e-12          # δ̄ and δ̄' below this relative level are reported as exactly 0

# Energy Settings
DEFAULT_T = 0.5                 # Default t in [0, 1)
S_STANDOFF = 1e-3               # Default s = mu * (1 - S_STANDOFF)
IDENTITY_REL_TOL = 1e-6         # Analytic vs finite-difference dF agreement
POSITIVE_TOL = 1e-10            # dF > -POSITIVE_TOL * local F term scale counts as nonnegative
DECOMPOSITION_REL_TOL = 1e-10   # Initial-energy decomposition against the direct F

# Threshold Settings
GOLDEN_REL_TOL = 1e-10          # Golden-section search relative tolerance
S0_STANDOFF = 1e-9              # Keep the search interval off the 2*a3 singularity

# Verification Settings
GROWTH_MARGIN = 0.05            # Fitted slope must beat -mu by this margin
GROWTH_CONFIDENCE_Z = 1.96      # Confidence band half-width in standard errors
WITNESS_M0_CAP = 2 ** 20        # Give up doubling m0 past this value
SPHERE_NORM_FLOOR = 1e-12       # Sphere norm at R0 below this fraction of its max on [r0, R0] is vanishing
MONOTONE_FROM = 5.0             # Default radius beyond which dF must stay nonnegative

# Output Settings
SCHEMA_VERSION = 1              # Bumped whenever the CSV/JSON layout changes
CSV_FLOAT_FORMAT = '%.17g'      # Round-trippable doubles
TABLE_FORMAT = 'grid'           # Table format: 'grid', 'simple', 'fancy_grid', 'pipe'
DEFAULT_OUTPUT_DIR = 'out'

# Logging
LOG_LEVEL = os.getenv('KLAB_LOG_LEVEL', 'WARNING')  # 'DEBUG', 'INFO', 'WARNING', 'ERROR'
LOG_TO_FILE = False             # Whether to log to file
LOG_FILE = 'klab.log'           # Log file name

# Parallelism
JOBS_ENV_VAR = 'KLAB_JOBS'      # Default for --jobs
DEFAULT_JOBS = 1


def get_default_jobs() -> int:
    """
    Get the worker count for sweeps from the environment

    Returns:
        KLAB_JOBS when set to a positive integer, otherwise DEFAULT_JOBS
    """
    raw = os.getenv(JOBS_ENV_VAR)
    if not raw:
        return DEFAULT_JOBS
    try:
        jobs = int(raw)
    except ValueError:
        return DEFAULT_JOBS
    return jobs if jobs > 0 else DEFAULT_JOBS


def get_config_summary() -> dict:
    """
    Get a summary of current configuration

    Returns:
        Dictionary of key configuration values
    """
    return {
        'ode_method': ODE_METHOD,
        'mode_tolerances': f"abs {MODE_ABS_TOL:g} / rel {MODE_REL_TOL:g}",
        'points_per_decade': POINTS_PER_DECADE,
        'fd_points_per_decade': POINTS_PER_DECADE * FD_REFINEMENT,
        'identity_tolerance': IDENTITY_REL_TOL,
        'growth_margin': GROWTH_MARGIN,
        'schema_version': SCHEMA_VERSION,
    }
