"""Bounded solutions of the prescribed mean curvature problem by p -> 1+ continuation."""
from .conditions import (
    ConditionReport,
    check_admissibility,
    cheeger_subdomain_check,
    lorentz_constant_s1_tilde,
    lorentz_constant_sp_tilde,
    sobolev_constant_s1,
)
from .functional import (
    EnergyBreakdown,
    energy,
    flux_of,
    lp_norm,
    marcinkiewicz_norm,
    residual,
    sup_norm,
    total_variation,
)
from .grid import (
    FluxField,
    RadialGrid,
    ScalarField,
    TensorGrid2D,
    divergence,
    divergence_radial,
    gradient,
    integrate,
    integrate_ball,
    unit_ball_volume,
)
from .nonlinearity import NonlinearTerm, excess, h_tail_sup, hp, truncate, v_delta
from .oracle import RadialExactSolution, exact_solution_eval, f_alpha_marcinkiewicz, g_alpha
from .solver import (
    NewtonFailure,
    SolveReport,
    SolverConfig,
    continuation_solve,
    default_schedule,
    detect_extremal,
    solve_fixed_p,
    stampacchia_decay_check,
    uniqueness_probe,
)

from .verifier import VerificationReport, verify, verify_boundary, verify_equation, verify_pairing

__version__ = "0.1.0"
