//! Lévy measures, the limiting displacement laws, their moment coefficients
//! and Monte Carlo evaluation of tree diagrams.

mod coefficients;
mod law;
mod levy;
mod mc;

pub use coefficients::{coefficients_from_egf, displacement_coefficients, laplace_recurrence, stable_recurrence, Branch, CoefficientTable};
pub use law::{laplace_cdf_1d, laplace_density_1d, DisplacementLaw, DisplacementLawSpec, TruncationReport, DEFAULT_EPS};
pub use levy::{
    ball_euclid_radius, ball_moment, levy_density, levy_mass_gap, levy_small_jump_integral, radial_integral, sample_uniform_ball, LevyMeasureSpec,
    Vector,
};
pub use mc::{
    canonical_moment_direct, canonical_moment_extrapolated, canonical_prefactor, k_moment_mc, recurrence_residual, run_batches, CanonicalEstimate,
    CanonicalOptions, DiagramEstimate, Integrand, ResidualReport, MAX_DIAGRAM_N, MAX_MC_DEGREE,
};
