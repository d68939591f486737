import os
from dotenv import load_dotenv

load_dotenv()

# Logging Settings
LOG_LEVEL = os.getenv("FWDSMILE_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Numerical Settings
# Finite-difference step is max(FD_BASE_STEP, FD_RELATIVE_STEP * |u|), scaled per derivative order
FD_BASE_STEP = float(os.getenv("FWDSMILE_FD_BASE_STEP", "1e-4"))
FD_RELATIVE_STEP = float(os.getenv("FWDSMILE_FD_RELATIVE_STEP", "1e-3"))
FD_ORDER_SCALE = {1: 1.0, 2: 10.0, 3: 30.0}
FD_MAX_SHRINK = 4
BISECTION_WIDTH = 1e-12
SADDLE_TOLERANCE = 1e-12
# Epsilon ladder 2^-k used to extract the second-order Heston diagonal coefficient
LAMBDA2_EPS_POWERS = (4, 5, 6, 7)
SMALL_DT_SERIES = 1e-8
# Relative size of an imaginary residue tolerated in terms that are real in exact arithmetic
REALNESS_TOL = 1e-10

# Guard Bands
SINGULAR_STRIKE_BAND = float(os.getenv("FWDSMILE_SINGULAR_BAND", "1e-3"))
ATM_BAND = float(os.getenv("FWDSMILE_ATM_BAND", "1e-3"))
BOUNDARY_LIMIT_BAND = 1e-4

# Quadrature Settings
QUAD_ABS_TOL = float(os.getenv("FWDSMILE_QUAD_ABS_TOL", "1e-12"))
QUAD_REL_TOL = float(os.getenv("FWDSMILE_QUAD_REL_TOL", "1e-10"))
QUAD_MAX_DEPTH = int(os.getenv("FWDSMILE_QUAD_MAX_DEPTH", "200"))
QUAD_INITIAL_UPPER = 200.0
QUAD_MAX_PANELS = 16
# Subinterval limit grows with panel length up to this factor of max_depth
QUAD_LIMIT_SCALE_CAP = 64
# Halvings of a panel that quad_vec could not resolve before giving up
QUAD_PANEL_SPLITS = 3

# Implied Volatility Settings
IV_LOWER = 1e-4
IV_UPPER = 5.0
IV_UPPER_EXTENDED = 10.0
IV_PRICE_TOL = 1e-12
IV_VOL_TOL = 1e-10

# Concurrency Settings
DEFAULT_JOBS = int(os.getenv("FWDSMILE_JOBS", "1"))
