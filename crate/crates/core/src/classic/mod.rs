//! Classical classifiers on feature vectors: one-vs-rest kernel SVM and
//! inverse-distance weighted KNN, with cross-validated hyperparameter search.

pub mod kernel;
pub mod knn;
pub mod search;
pub mod svm;

pub use kernel::KernelSpec;
pub use knn::KnnModel;
pub use search::{knn_select_k, svm_grid_search, GridResult, KSelection};
pub use svm::{svm_train_binary, BinarySvmModel, SmoSolution, SvmOvrModel, SvmParams};

use crate::dataset::{ClassLabel, NUM_CLASSES};
use crate::error::Result;

/// Anything that maps a feature vector to per-class ranking scores.
pub trait Classifier {
    fn scores(&self, x: &[f64]) -> Result<[f64; NUM_CLASSES]>;

    fn predict(&self, x: &[f64]) -> Result<ClassLabel>;
}
