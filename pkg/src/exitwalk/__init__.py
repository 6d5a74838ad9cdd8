"""exitwalk: first exit times of 1D time-inhomogeneous diffusions via a
walk on moving spheroids, validated against an Euler-Maruyama oracle."""

from .brownian import BrownianExit, Spheroid, exit_pdf, psi, sample_exit, sample_exit_many
from .coeffs import (
    CoefficientSet,
    brownian_preset,
    c_func,
    constant_preset,
    mean_exact,
    ou_preset,
    rho,
    rho_inv,
    sinusoidal_m,
    sinusoidal_preset,
    theta,
)
from .errors import (
    CoefficientError,
    ConfigError,
    DomainError,
    ExitwalkError,
    InversionError,
    QuadratureError,
    StepLimitError,
)
from .euler import EulerConfig, euler_exit, euler_exit_many
from .gclass import GCoefficientSet, g_solution, growth_preset, run_g, to_lclass
from .harness import (
    McReport,
    build_report,
    cdf_sandwich_check,
    empirical_cdf,
    histogram,
    ks_distance,
    sample_many,
    steps_vs_logeps,
)
from .quadrature import Tolerance, integrate, invert_monotone, sup_abs_on
from .woms import (
    ExitProblem,
    ExitSample,
    WalkSkeleton,
    delta_m,
    psi_l,
    run,
    run_capped,
    shrunken_bounds,
    spheroid_scale,
    step,
    validate,
)

__version__ = "0.1.0"
