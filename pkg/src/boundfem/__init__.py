"""Nodally bound-preserving stabilised finite elements for linear and
semilinear reaction-diffusion problems on 2D triangular meshes."""

from .analysis import (ErrorNorms, ErrorRecord, eoc, error_norms,
                       nodal_extrema, quasinorm, stab_and_mesh_norms)
from .forms import (AssembledSystem, ProblemSpec, apply_stabilisation,
                    assemble_system, dirichlet_values, lumped_product,
                    scalar_power_bounds_check, semilinear_residual)
from .mesh import (Mesh, MeshConformityError, MeshError, MeshFormatError,
                   MeshOrientationError, MeshQuality, generate_criss_cross,
                   generate_obtuse_layer, mesh_quality, read_mesh,
                   refine_uniform, write_mesh)
from .oracle import (ViProblem, complementarity_violation,
                     projected_gauss_seidel, projected_nonlinear_gauss_seidel)
from .projection import BoundsBox, bounds_arrays, is_admissible, split
from .quadrature import triangle_rule
from .solver import (SolveReport, SolverConfig, galerkin_solve,
                     nonlinear_richardson_solve, richardson_solve)
from .space import (FeSpace, NodalField, build_space, evaluate,
                    extended_patch, interpolate, mesh_function, node_patch,
                    shape_functions)

__version__ = "0.1.0"
