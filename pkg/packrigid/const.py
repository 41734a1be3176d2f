"""Constants for the packrigid package."""

from enum import Enum


class BodyKind(Enum):
    """Valid convex body kinds."""

    Disc = "disc"
    Ellipse = "ellipse"
    PNorm = "pnorm"
    ExpFamily = "expfamily"
    Profile = "profile"
    Blend = "blend"


class BodyFamily(Enum):
    """Body families sampled by trial campaigns."""

    ExpFamily = "expfamily"
    PNorm = "pnorm"
    Profile = "profile"
    Disc = "disc"


class SparsityVerdict(Enum):
    """Outcome of a (2,k) pebble game."""

    Sparse = "sparse"
    Tight = "tight"
    Violating = "violating"


class RigidityVerdict(Enum):
    """Outcome of an infinitesimal rigidity test."""

    Rigid = "rigid"
    Flexible = "flexible"


class HomotopyPath(Enum):
    """Paths from the disc to a target body."""

    Gauge = "gauge"
    Profile = "profile"


class TrialStage(Enum):
    """Pipeline stages of a trial, used to report failures."""

    Sample = "sample"
    Pack = "pack"
    Flow = "flow"
    Resolve = "resolve"
    Analyze = "analyze"
    GeneralPosition = "general_position"
    Retarget = "retarget"
    Continue = "continue"


DOMAIN = "packrigid"
ENV_SEED = "PACKRIGID_SEED"

# numerical constants
EPS_ZERO = 1e-15
RANK_RELATIVE_TOL = 1e-12
RANK_SWEEP_FACTORS = (10**-0.5, 1.0, 10**0.5)
CONTACT_TOL = 1e-7
GENERAL_EDGE_TOL = 1e-7
PERIODICITY_TOL = 1e-10
KINK_TOL = 1e-12
STRESS_ZERO_TOL = 1e-12
FLEX_TOL = 1e-8

NORM_BISECTION_STEPS = 60
NORM_NEWTON_STEPS = 5
NORM_MAX_DOUBLINGS = 200

DEFAULT_PROFILE_SAMPLES = 256
MIN_PROFILE_SAMPLES = 64
DUAL_PROFILE_SAMPLES = 512
DISTANCE_SAMPLES = 720
REFINE_STEPS = 60
CURVATURE_CHECK_SAMPLES = 101
FD_STEP = 1e-4

BUMP_HALF_WIDTH_RATIO = 0.45
BUMP_MAX_HALF_WIDTH = 0.39269908169872414  # pi / 8

SVG_POLYGON_VERTICES = 720
SVG_MARGIN = 0.05

# configuration keys
CONF_BODY = "body"
CONF_DAMPING_BACKTRACKS = "damping_backtracks"
CONF_DAMPING_FACTOR = "damping_factor"
CONF_EDGES = "edges"
CONF_EPS = "eps"
CONF_FAMILIES = "families"
CONF_HOMOTOPY_PATH = "homotopy_path"
CONF_INITIAL_STEP = "initial_step"
CONF_KIND = "kind"
CONF_MASTER_SEED = "master_seed"
CONF_MAX_NEWTON = "max_newton_iterations"
CONF_MIN_STEP = "min_step"
CONF_N = "n"
CONF_N_RANGE = "n_range"
CONF_NEWTON_TOL = "newton_tol"
CONF_OUTER = "outer"
CONF_P = "p"
CONF_PERTURBATION = "radii_perturbation"
CONF_PINNED = "pinned"
CONF_R = "r"
CONF_RANK_RTOL = "rank_rtol"
CONF_RETRIES = "retries"
CONF_SUBGRAPH_EDGES = "subgraph_edges"
CONF_SUPPORT_PERTURBATION = "support_perturbation"
CONF_SWEEP_FACTORS = "sweep_factors"
CONF_TRIALS = "trials"
CONF_WORKERS = "workers"

DEFAULT_INITIAL_STEP = 0.1
DEFAULT_MIN_STEP = 1e-4
DEFAULT_NEWTON_TOL = 1e-11
DEFAULT_MAX_NEWTON = 30
DEFAULT_DAMPING_FACTOR = 0.5
DEFAULT_DAMPING_BACKTRACKS = 8
DEFAULT_FLOW_STEPS = 20
DEFAULT_FLOW_GAP = 1e-2
DEFAULT_PINS = ((0.0, 0.0), (2.0, 0.0), (1.0, 1.7320508075688772))
DEFAULT_TRIALS = 100
DEFAULT_N_RANGE = (4, 12)
DEFAULT_PERTURBATION = (1e-4, 1e-2)
DEFAULT_WORKERS = 4
DEFAULT_MASTER_SEED = 20240701
DEFAULT_EPS = 1e-2
DEFAULT_SUPPORT_PERTURBATION = 1e-3
DEFAULT_RETRIES = 5
MAX_AMBIGUOUS_SHARE = 0.05
MAX_FAILED_SHARE = 0.05
FLOW_GAP_MARGIN = 4.0
MOBIUS_RETRIES = 100

RESULT_SUCCESS = "success"
RESULT_FAILED = "failed"
RESULT_AMBIGUOUS = "rank_ambiguous"
