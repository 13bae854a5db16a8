"""Solvers for time-varying semilinear differential-algebraic equations

    d/dt[A(t)x] + B(t)x = f(t,x)      and      A(t)x' + B(t)x = f(t,x)

with regular index <= 1 pencils, built on numerically computed time-varying
spectral projectors.  Two combined methods are provided: a first-order
simple scheme and a second-order scheme with trapezoidal recalculation,
each pairing an explicit update of the differential component with a
Newton-type update of the algebraic component.
"""

__version__ = "0.1.0"

from .errors import (
    DaeprojError,
    DefectTooLarge,
    IndeterminateIndex,
    IndexTooHigh,
    MeshMismatch,
    NoConvergence,
    NotRegular,
    QuadratureDiverged,
    RadiusSelectionFailed,
    SingularNewtonMatrix,
    SingularPencilPoint,
)
from .pencil import (
    ProjectorSet,
    QuadratureConfig,
    TimeVaryingPencil,
    ValidationReport,
    compute_projectors,
    estimate_index,
    projector_derivative,
    projector_table,
    resolvent,
    validate_projectors,
)
from .dae import (
    Form,
    SemilinearDAE,
    StepState,
    algebraic_residual,
    consistency_residual,
    consistent_initialize,
    newton_update_matrix,
    phi_operator,
    pi_rhs,
    reduce_to_inside_form,
    w_map,
)
from .solvers import (
    METHOD_RECALCULATED,
    METHOD_SIMPLE,
    SolverConfig,
    Trajectory,
    method1_step,
    method2_step,
    solve,
)
from .problems import (
    Circuit1Params,
    Circuit2Params,
    Preset,
    PRESETS,
    ScalarNonlinearity,
    circuit1,
    circuit2,
    circuit2_resolvent_bounds,
    get_preset,
    load_problem_file,
    make_manufactured,
    power_nonlinearity,
    sawtooth,
    sine_condition_values,
    sine_nonlinearity,
    triangular,
)
from .analysis import (
    BoundednessReport,
    OrderReport,
    boundedness_monitor,
    compare_trajectories,
    empirical_order,
)

__all__ = [name for name in dir() if not name.startswith("_")]
