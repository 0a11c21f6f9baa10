//! Dense numeric kernels shared by the feature, imputation, embedding and
//! evaluation stages.

mod kmeans;
mod linalg;
mod matrix;
mod pca;

pub use kmeans::{kmeans_assign, kmeans_fit, KMeansModel};
pub use linalg::{solve_ridge, symmetric_eigen};
pub use matrix::{dot, euclidean_distance, squared_distance, DenseMatrix};
pub use pca::{pca_fit, pca_transform, PcaModel};
