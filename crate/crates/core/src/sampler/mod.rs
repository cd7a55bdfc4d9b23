//! Cluster, box-configuration and ghost-field samplers under the cut-off
//! measures, plus exact laws on small graphs.

pub mod boxconf;
pub mod cluster;
pub mod exact;
pub mod neighbors;
pub mod pointmap;
pub mod records;

pub use crate::model::Point;
pub use boxconf::{sample_box_configuration, BoxConfiguration, LatticeBox, UnionFind};
pub use cluster::{sample_cluster, sample_ghost_connection, ClusterOptions, ClusterSample, Explorer, GhostSample};
pub use exact::{exact_small_graph_law, SmallGraphLaw};
pub use neighbors::{EdgeSampler, PairMemo};
pub use records::{read_cluster_csv, sample_clusters, with_workers, write_cluster_csv, ClusterRecord};
