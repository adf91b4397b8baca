"""Symplectic checks for self-adjoint and locally self-adjoint boundary conditions."""

__version__ = "0.1.0"

from .boundary import (  # noqa: E402
    BOUNDARY_FORM,
    OMEGA_HAT,
    BoundaryForm,
    CalkinSystem,
    TestFunction,
    TraceVector,
    boundary_form,
    calkin_check,
    classify_bc,
    green_residual,
    trace,
)
from .connection import (  # noqa: E402
    Curve,
    FormField,
    Frame,
    ProjectorPath,
    christoffel,
    kato_transport,
    lagrangian_frame_field,
    parallel_transport,
)
from .nonlinear import (  # noqa: E402
    GraphPoint,
    ModelOperator,
    NonlinearBC,
    antiderivative_consistency,
    check_lsa_conditions,
    contour_integrability_check,
    flow_symplectomorphism_check,
    gateaux_symmetry_check,
    group_action,
    lift_bc,
    same_leaf,
    solve_bvp_lsa,
)
from .symplin import (  # noqa: E402
    KernelPresentation,
    Subspace,
    SymplecticForm,
    classify_subspace,
    graph_defect,
    lagrangian_kernel_test,
    omega_complement,
    standard_form,
    symplectic_dual_basis,
)
