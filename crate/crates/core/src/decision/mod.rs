//! HOG clustering, per-cluster gradient-boosted regression, fusion, and the
//! assembled train and inference pipeline.

mod gbt;
mod hog;
mod kmeans;
mod model;
mod pipeline;

pub use gbt::{gbt_train, gbt_train_with_history, GbtParams, GbtRegressor, Tree, TreeNode};
pub use hog::{hog, HOG_BINS, HOG_CELLS, HOG_LEN};
pub use kmeans::{kmeans_fit, KMeansModel, DEFAULT_MAX_ITERS, DEFAULT_TOL};
pub use model::{BranchModel, LsrModel, Variant, MODEL_MAGIC, MODEL_VERSION};
pub use pipeline::{
    fusion_modes, predict_patch, predict_residual, superresolve, superresolve_parts, train_lsr, TrainReport,
};
