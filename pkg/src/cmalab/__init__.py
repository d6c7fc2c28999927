"""cmalab: a desk-scale laboratory for the discrete complex Monge-Ampere
operator, Bedford-Taylor capacities, and Hoelder-regularity experiments in
complex dimensions one and two."""

from .calculus import (BoundaryData, GridFunction, GridMeasure,
                       HolderSeminormResult, ball_average, dominated_by,
                       holder_seminorm, is_discretely_psh, is_in_E0,
                       is_in_E0_prime, ma_measure, mixed_mass, mixed_measure,
                       mollify, regularize_subsolution, sup_convolution)
from .capacity import (CapacityResult, capacity, capacity_sup_oracle,
                       relative_extremal)
from .geometry import (GridDomain, RegionMask, build_domain, hopf_constant,
                       rho_sublevel, shrink)
from .lab import (HolderReport, InequalityReport, corollary_c_pipeline,
                  l1_l1_probe, stability_probe, sublevel_decay_scan,
                  theorem_b_pipeline, verify_blocki, verify_cegrell,
                  volume_capacity_scan)
from .settings import DEFAULTS, Settings
from .solver import (DirichletProblem, SolveReport, comparison_check,
                     maximal_envelope, solve_dirichlet)

__version__ = "0.1.0"

__all__ = [
    "BoundaryData", "GridFunction", "GridMeasure", "HolderSeminormResult",
    "ball_average", "dominated_by", "holder_seminorm", "is_discretely_psh",
    "is_in_E0", "is_in_E0_prime", "ma_measure", "mixed_mass", "mixed_measure",
    "mollify", "regularize_subsolution", "sup_convolution",
    "CapacityResult", "capacity", "capacity_sup_oracle", "relative_extremal",
    "GridDomain", "RegionMask", "build_domain", "hopf_constant",
    "rho_sublevel", "shrink",
    "HolderReport", "InequalityReport", "corollary_c_pipeline",
    "l1_l1_probe", "stability_probe", "sublevel_decay_scan",
    "theorem_b_pipeline", "verify_blocki", "verify_cegrell",
    "volume_capacity_scan",
    "DEFAULTS", "Settings",
    "DirichletProblem", "SolveReport", "comparison_check",
    "maximal_envelope", "solve_dirichlet",
    "__version__",
]
