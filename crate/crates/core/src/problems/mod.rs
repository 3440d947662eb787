//! Problem encoders, decoders and dataset generators.

pub mod dataset;
pub mod geometry;
pub mod graph;
pub mod permutation;
pub mod pointcloud;
pub mod psr2d;
pub mod rot3d;

pub use dataset::{load_dataset, save_dataset, validate_dataset, DatasetHeader, ProblemInstance};
pub use permutation::{decode_permutation, encode_permutation, project_to_permutation, PermutationEncoding};
pub use pointcloud::{corrupt_matches, PointCloudPair};
