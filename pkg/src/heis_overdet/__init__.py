"""Numerical machinery for gauge-ball overdetermined problems on the
Heisenberg group: exact jet-based sub-Riemannian calculus, reduced-
coordinate sum-of-squares identities, integral-identity quadrature, and a
degenerate-elliptic finite-difference solver."""

from .domains import ReducedDomain
from .errors import (
    AccuracyError,
    HeisOverdetError,
    InvalidInputError,
    SingularPointError,
    SolverError,
    SymmetryViolationError,
)
from .heisenberg import (
    GroupPoint,
    ScalarField,
    candidate_u,
    dilate,
    gauge,
    gauge_field,
    group_inv,
    group_mul,
    horizontal_gradient,
    origin,
    sublaplacian,
    weight_f,
    weight_f_closed_derivatives,
    z_field,
)
from .jets import Jet, JetSpace, jet_space
from .reduced import (
    CylindricalProfile,
    MatrixBundle,
    ReducedField,
    ReducedPoint,
    build_matrix_bundle,
    frobenius_deficit,
    harmonic_basis,
    lhs_via_jets,
    lift_to_reduced,
    pfunction,
    reduced_operator,
    rhs_sum_of_squares,
    u_alpha_reduced,
)

__version__ = "0.1.0"
