"""Symbolic-numeric verification of constant Q-curvature integral identities
on closed Einstein manifolds."""

from .ring import RF, NPoly, ExactMatrix, rf_arith, solve_linear
from .jets import (
    JetContext, JetExpr, VectorExpr, TensorExpr, contract, divergence,
    bochner_reduce, weitzenbock_reduce, normal_form,
)
from .identities import (
    Dim4Family, GeneralFamily, make_family, q_einstein, paneitz_einstein,
    cs_margin, normalize_solution, theta2, verify_pointwise,
    verify_combination, final_assembly, IDENTITIES,
)
from .ibp import AnsatzConfig, Certificate, certify_zero_integral, prove_all
from .spheres import (
    Geometry, Profile, AxialDatum, QuadratureSpec, jet_eval, mobius_factor,
    pde_residual, theta2_eval, gm_path_scan, newton_solve,
    verify_integral_identity,
)

__version__ = "0.1.0"
