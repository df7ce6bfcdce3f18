"""Numerical laboratory for the average-field functional of almost-bosonic anyons."""

from .errors import (
    AvgFieldError,
    ConfigurationError,
    ContractViolation,
    DegenerateStateError,
    GeometryError,
    InsufficientDataError,
    ModelError,
    NumericalFailure,
    ResolutionError,
    ResourceError,
    SingularityError,
)
from .grid import (
    BC,
    ComplexField,
    Grid2D,
    ScalarField,
    VectorField,
    current,
    density,
    gradient,
    lp_norm,
    make_grid,
    normalize,
    rescale_state,
)
from .kernel import KernelTable, build_kernel, curl, exterior_field, vector_potential
from .functional import (
    EnergyBreakdown,
    PotentialSpec,
    chemical_potential,
    el_apply,
    energy,
    lower_bounds,
    sobolev_gradient,
)
from .thomas_fermi import (
    TFProfile,
    homogeneous_energy,
    tf_energy,
    tf_minimizer,
    tf_scale,
    tf_scale_density,
)
from .trial import bump_profile, factorization_check, vortex_lattice_trial
from .diagnostics import coarse_grain, detect_vortices, lda_compare, weak_norm_distance
from .minimize import (
    MinimizeReport,
    MinimizeSettings,
    estimate_e11,
    ground_state,
    init_state,
    minimize,
    sweep,
)
from .snapshot import load_field, save_field

__version__ = "0.1.0"
