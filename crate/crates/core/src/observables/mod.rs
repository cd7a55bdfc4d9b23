//! Flow observables with uncertainties: size moments, gyration, edian,
//! two-point and triangle plug-ins, the volume tail and the flatness
//! estimate of `β_c`.

mod betac;
mod boxes;
mod flow;
mod moments;
mod tail;

pub use crate::tauberian::TailFit;
pub use betac::{estimate_betac, flatness, BetacEstimate, BetacOptions, FlatnessPoint};
pub use boxes::{
    ball_sums_from_clusters, edian_from_law, edian_level, estimate_edian, estimate_triangle, estimate_two_point_profile,
    max_intersections, measurement_mask, tightness_profile, triangle_from, two_point_ball_sums, Connectivity,
    EmpiricalConnectivity, TightnessPoint, TriangleEstimate, MAX_PLUGIN_VERTICES, MIN_EDIAN_CONFIGS,
};
pub use flow::{flow_point_from_samples, size_histogram, write_flow_csv, write_flow_json, BallSum, FlowPoint, TailBin};
pub use moments::{
    estimate_gyration, estimate_moments, estimate_size_moments, moments_from_accumulator, size_accumulator, MomentReport,
    DEFAULT_BATCHES,
};
pub use tail::{default_tail_window, estimate_volume_tail, estimate_volume_tail_with, MAX_TRUNCATED_FRACTION};
