"""Numerical toolkit for trigonometric R-matrices, weight functions and
hypergeometric solutions of the qKZ equations for U_q(sl2-hat) evaluation modules."""

from .contour import (ContourSpec, Infeasible, NonSimplePole, QuadratureDivergence, QuadratureGrid,
                      convergence_report, integrate, plan_contour)
from .params import (ConfigError, ModelParams, ParameterDomainError, RunConfig, TruncationPolicy, derive,
                     load_config, parse_config_text)
from .qspecial import qbinom, qfact, qint, qpoch, qpoch2, rho, theta, xi
from .representation import TensorVector, coproduct_matrix, generator_matrix, permutation_matrix
from .rmatrix import (DegenerateIntertwiner, RMatrix, ResonantPoint, closed_form_R, r_hat, r_tilde, solve_R,
                      ybe_residual)
from .solution import (EllipticW, ResidualReport, TVIntegrand, build_W, component_indices, psi, qkz_check,
                       qkz_residual, qkz_rhs_operator)
from .weight import PoleHit, WeightIndex, phase_phi, solution_prefactor, theorem_F, weight_w

__version__ = "0.1.0"
