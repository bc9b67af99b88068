"""Compliance-optimal material distributions on elastic plates and shells."""

from . import errors
from .grid1d import (Grid1D, LoadSpec1D, MaterialProfile1D, PhaseSolution1D,
                     ProfileCurve, compliance_1d, material_cost, phase_to_curve,
                     solve_state_1d, total_cost_1d)
from .adjoint1d import (AdjointSolution1D, design_gradient_1d, kkt_residual_1d,
                        kp_cells, solve_adjoint_1d)
from .design1d import (BaselineDesign, DesignStructure, RelaxedDesign,
                       averaged_profile, compare_designs, extract_structure,
                       optimize_fixed_point, optimize_projected_gradient,
                       threshold_cl)
from .mesh2d import (MarkingReport, TriMesh, bisect, mark_isometry_error,
                     mark_phase_gradient, structured_disc, structured_rect,
                     uniform_refine, union_marks)
from .quadrature import QuadRule, triangle_rule_degree6

__version__ = "0.1.0"
