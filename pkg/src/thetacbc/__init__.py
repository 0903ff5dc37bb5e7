"""Safety probability bounds for linear systems whose initial and unsafe sets are random."""

from .certificate import (
    CertificateMatrix,
    CertificateReport,
    check_feasibility,
    compute_c,
    eta_beta_ball,
    eta_beta_general,
    overlap_probability,
    safety_lower_bound,
    validate_cbc,
)
from .distributions import Degenerate, HalfNormal, Normal, Tabulated, sum_cdf
from .geometry import SupportOracle, UncertainSet, UnitBall, box_kernel
from .linsys import AugmentedSystem, FeedbackGain, LinearSystem, build_augmented, closed_loop, step
from .montecarlo import MonteCarloConfig, MonteCarloReport, estimate, run_trajectory, sweep
from .scenario import Scenario, certify, resolve
from .scenario_io import emit_report, load_scenario, parse_scenario

__version__ = "0.1.0"
