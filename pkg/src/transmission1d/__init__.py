"""Finite element and uncertainty-quantification toolkit for one-dimensional
elliptic transmission problems."""

__version__ = "0.1.0"

from .coefficients import (CoefficientField, Coercivity, MatrixNormReport, amm_inverse_norm, broken_winf_norm,
                           coercivity_constant, inverse_winf_check, matrix_winf_norm)
from .domain import BC, DecomposedInterval, InterfaceHit, subdomain_index, validate
from .errors import *  # noqa: F401,F403
from .fem import (BrokenFemFunction, FemSystem, Mesh, TransmissionData, assemble, build_mesh, conormal_jump,
                  energy_projection, h1_projection, lift_data, solve_transmission)
from .functions import PiecewiseExpr, PiecewisePoly, as_broken
from .norms import broken_hk_norm, discrete_inverse_norm, dual_norm, poincare_constant, vk_minus_norm
