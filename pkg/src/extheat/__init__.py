"""Radial finite-difference laboratory for absorbed heat flow outside an obstacle."""

from .geometry import (
    DomainSpec,
    HarmonicWeight,
    RadialGrid,
    annulus_volume,
    default_truncation,
    harmonic_weight,
    make_grid,
    phi_gradient,
    phi_sandwich_check,
    phi_weight,
    radial_laplacian_residual,
    reference_profile,
    sphere_surface_area,
)
from .kernels import (
    IntegralEstimate,
    RatePair,
    absorption_tail_rate,
    exterior_ball_image_solution_3d,
    extra_decay_rate,
    gaussian,
    halfline_image_solution,
    integral_head_bound,
    integral_tail_bound,
    linear_decay_exponents,
    linear_norm_decay_rate,
    sup_norm_tail_is_divergent,
)
from .solver import (
    Field,
    IndicatorResult,
    NumericsError,
    SolverConfig,
    Trajectory,
    apply_semigroup,
    bump_field,
    evolve,
    indicator_field,
    indicator_limit_check,
    step,
)
from .diagnostics import (
    LimitState,
    MassReport,
    RateFit,
    comparison_violation,
    compute_limit_state,
    energy_identity_residual,
    fit_rate,
    gaussian_profile_distance,
    linear_profile_distance,
    lq_norm,
    mass_phi,
    mass_report,
    subsolution_factor,
    tail_envelope,
)
from .testfn import (
    CutoffFamily,
    DichotomyCall,
    LayeredAbsorption,
    classify_dichotomy,
    cutoff_bound_ratio,
    cutoff_mass_average,
    eta,
    eta_with_derivatives,
    layered_absorption_series,
    theta_factor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
