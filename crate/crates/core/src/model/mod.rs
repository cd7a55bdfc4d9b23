//! Norms, kernels, edge probabilities and lattice-ball geometry.

pub mod kernel;
pub mod lattice;
pub mod norm;
pub mod shells;

pub use kernel::{cutoff_kernel_value, edge_probability, kernel_value, KernelSpec, KernelVariant, ModelParams};
pub use lattice::lattice_ball_count;
pub use norm::{NormFamily, NormSpec, Point, MAX_DIM, ORIGIN};
pub use shells::{build_shell_table, build_shell_table_with, Shell, ShellOptions, ShellSampler, ShellTable};
