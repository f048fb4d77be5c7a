"""Numerical lab for expanding geometric-flow breathers.

Solvers for the rotationally invariant conformal Ricci flow on a truncated
cylinder and for graphical curve shortening flow, plus verifiers that turn
the scaling identities of both flows into quantified residuals with
grid-refinement evidence.
"""

from .geometry import (
    BreatherParams,
    ConformalMetric,
    CurvatureField,
    Grid1D,
    ScalarField,
    breather_initial,
    cone_initial,
    cusp_model,
    gauss_curvature,
    interpolate,
    interpolate_many,
    shift_pullback,
    volume,
)
from .ricci import (
    BoundaryCondition,
    BoundarySpec,
    FlowSolution,
    SolverConfig,
    comparison_check,
    evolve,
    step,
)
from .csf import (
    CSFConfig,
    CSFSolution,
    GraphCurve,
    csf_initial,
    evolve_csf,
    max_slope,
    step_csf,
)
from .verify import (
    ConvergenceStudy,
    CuspReport,
    IdentityReport,
    SolitonDefectReport,
    convergence_order,
    csf_breather_residual,
    cusp_check,
    ricci_breather_residual,
    soliton_defect,
)

__version__ = "0.1.0"
