//! Hierarchical matrices over geometric cluster trees.

pub mod arith;
pub mod block;
pub mod cluster;
pub mod lu;
pub mod matrix;
pub mod rk;
pub mod transform;

pub use arith::{h_add, h_multiply};
pub use block::{is_admissible, BlockClusterTree, BlockKind, BlockNode};
pub use cluster::{ClusterNode, ClusterTree, Interval};
pub use matrix::{HKind, HMatrix, HNode, LeafInfo, LeafKind, StorageStats};
pub use rk::{rk_truncate, RkMatrix};
pub use transform::{h_block_ldlt, h_transform_mass, HBlockLdlt};
