"""Numerical lab for nonlocal energies with (p, q)-type Orlicz growth."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DegenerateFunctionError,
    DomainError,
    GrowthConditionError,
    NumericError,
    OrliczLabError,
    PreconditionError,
    ResolutionError,
    StructureConditionError,
    UnsupportedConfigurationError,
)
from .growth import (  # noqa: E402
    GrowthFunction,
    auxiliary_F,
    auxiliary_g,
    auxiliary_growth,
    check_growth_bounds,
    doubling_check,
    eval_f,
    eval_fprime,
    gen_inverse_fprime,
    legendre,
    normalize,
    polynomial,
    power,
    power_log,
    sampled,
    sum_pq,
)
from .domain import (  # noqa: E402
    GridDomain,
    GridFunction,
    KernelCoefficient,
    QuadratureTable,
    build_grid,
    kernel_from_spec,
    level_sets,
    pair_weights,
)
from .energy import ModularKind, energy_If, luxemburg_norm, modular, tail_fprime  # noqa: E402
from .solve import (  # noqa: E402
    SolveReport,
    StructureFunction,
    check_structure,
    euler_lagrange,
    minimize,
    residual_norm,
    weak_residual,
)
from .degiorgi import (  # noqa: E402
    CaccioppoliReport,
    SampleSpec,
    caccioppoli_gap,
    dg_membership,
    fast_convergence,
    transfer_to_g,
)
from .regularity import (  # noqa: E402
    RegularityReport,
    estimate_alpha,
    holder_seminorm,
    isoperimetric_check,
    sobolev_embedding_check,
    verify_holder_bound,
    verify_local_bound,
)
