"""Ground states of linearly coupled nonlinear Schrodinger systems.

Nehari-manifold minimization on truncated periodic boxes, structural
assumption validators for the potentials, and diagnostics that turn the
theory's inequalities (coercivity, fibering uniqueness, energy thresholds,
periodic-vs-asymptotic comparison, the dilation identity) into
machine-checkable reports.
"""

from .diagnostics import (
    NonexistenceReport,
    PohozaevReport,
    coupling_sign_value,
    nonexistence_certificate,
    pohozaev_residual,
)
from .errors import (
    CandidateNotPositiveError,
    ConfigError,
    ConvergenceError,
    CsgsError,
    DegenerateNonlinearityError,
    FieldFileError,
    GridMismatchError,
    NonFiniteEnergyError,
    NonpositiveQuadraticFormError,
    ZeroFieldError,
)
from .fieldio import read_field, write_field, write_report_csv
from .functional import (
    EnergyBreakdown,
    PairInvariants,
    ProblemSpec,
    energy,
    energy_gradient,
    nehari_value,
    pair_invariants,
    quadratic_form,
)
from .grid import (
    FieldPair,
    Grid,
    GridSpec,
    apply_laplacian,
    build_grid,
    integrate,
    lp_integral,
    translate_lattice,
)
from .nehari import FiberingDiagnostics, fibering_scale, nehari_project
from .potentials import (
    PotentialDef,
    PotentialSet,
    ValidationReport,
    estimate_nu,
    sample_potentials,
    validate_assumptions,
)
from .solver import (
    ComparisonReport,
    MuSweep,
    SolveOptions,
    SolveReport,
    aubin_talenti_bubble,
    compare_energies,
    estimate_sobolev_constant,
    minimize_ground_state,
    nonneg_refine,
    sobolev_quotient,
    sweep_mu,
)

__version__ = "0.1.0"
