"""P1 finite elements for p-Laplacian problems with singular nonlinear Robin
boundary conditions and L^1 data, with numerical checks of the a-priori
estimates, the entropy formulation and uniqueness.
"""
from .functions import (
    HSpec,
    SigmaSpec,
    g_integrability_exponent,
    marcinkiewicz_exponents,
    phi_t_eps,
    truncate,
    v_delta,
)
from .mesh import DiscreteField, Mesh2D, generate_unit_disk, generate_unit_square, refine_uniform
from .problem import (
    ExactSolution,
    FieldSpec,
    FluxSpec,
    InapplicableError,
    ProblemSpec,
    exact_disk_example,
    manufacture,
    regularize,
    singular_demo,
    subsolution_problem,
)
from .assembly import assemble_jacobian, assemble_residual, boundary_integral
from .solver import SolverConfig, SolverError, solve_barrier, solve_ladder, solve_level, schauder_map

__version__ = "0.1.0"
