//! Asymptotic ODEs: closed forms, the mean-field moment hierarchy and the
//! gyration and displacement flows.

mod closed;
mod extract;
mod flows;
mod integrator;
mod output;
mod profile;

pub use closed::{classify_driving_regime, riccati_check, riccati_tail_integral, RiccatiCheck, solve_linear_driven_exact, solve_riccati_exact, AsymptoticClass, DrivenOdeSpec, Regime};
pub use extract::{driving_ratio, fit_critical_log, log_slope_last_decade};
pub use flows::{
    displacement_flow, displacement_limits, gyration_flow, integrate_moment_hierarchy, log_grid, moment_family, DisplacementTrajectory,
    GyrationRegime, GyrationReport, MomentHierarchyState,
};
pub use integrator::{dopri5, OdeOptions, OdeStats};
pub use output::{write_hierarchy_csv, write_trajectory_csv};
pub use profile::Profile;
