//! Example-based explanations for a soft-threshold pneumothorax classifier.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the two-logistic thresholding classifier over per-pixel
//!   probability maps.
//! - [`training`]: maximum-likelihood fitting of the four threshold
//!   parameters by full-batch gradient descent.
//! - [`teaching`]: Monte-Carlo selection of four-example teaching sets
//!   (one true positive, true negative, false positive and false negative).
//! - [`saliency`]: hot-colormap rendering of probability maps.
//! - [`dataset`]: probability-map files, manifests, synthetic corpora and
//!   explanation bundles.
//! - [`study`]: the human-study protocol (plans, pairing, sessions, export).
//! - [`pipeline`]: train, explain and bundle in one call.

pub mod corpus;
pub mod dataset;
pub mod model;
pub mod pipeline;
pub mod saliency;
pub mod study;
pub mod teaching;
pub mod training;

pub use corpus::{Corpus, CorpusImage};
pub use model::{
    classify, compute_features, image_prob, pixel_prob, ImageFeatures, Label, PixelFeatures,
    ProbMap, ThetaParams, ADMISSION_THRESHOLD, DEFAULT_CUTOFF,
};
pub use teaching::{
    build_category_pools, select_teaching_set, Category, CategoryPools, SelectionMode,
    TeachingConfig, TeachingError, TeachingSet,
};
pub use training::{train_theta, TrainConfig, TrainError, TrainItem, TrainOutcome};
