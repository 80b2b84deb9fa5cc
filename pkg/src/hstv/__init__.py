"""Hessian-Schatten total variation of CPWL and smooth functions on (0,1)^2."""

from .approx import (
    MeshPlan,
    RationalAngle,
    SquareFrame,
    assemble_global,
    build_frames,
    convergence_experiment,
    interpolate,
    interpolation_error_estimate,
    plan_mesh,
    rational_angle_approx,
    triangulate_square,
)
from .errors import ExtremalError, FieldError, HstvError, MeshError, PlanError
from .extremal import (
    Decomposition,
    JumpSpaceBasis,
    QuotientRep,
    constrained_space,
    decompose,
    find_extremal_in_support,
    is_extremal,
    normalize_mod_affine,
    perturbation_identity_check,
    rigidity_check,
    support_reduce,
)
from .fields import (
    GridSample,
    SmoothField,
    builtin_field,
    discrete_htv,
    extend_reflection,
    htv_quadrature,
    mollify,
    parse_field,
)
from .htv import EdgeSupport, HtvReport, htv_cpwl, htv_support, p_independence_check
from .mesh import (
    CpwlFunction,
    Triangulation,
    build_adjacency,
    evaluate_on_grid,
    load_mesh,
    min_angle,
    render_svg,
    save_mesh,
    triangle_gradient,
    uniform_diagonal_mesh,
)
from .schatten import (
    Mat2,
    dual_norm_estimate,
    schatten_norm,
    singular_values,
    sym_eigen_frame,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
