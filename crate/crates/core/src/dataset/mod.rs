//! Dataset ingestion and persistence.

pub mod bundle;
pub mod manifest;
pub mod probmap;
pub mod synth;

pub use bundle::{assemble_bundle, BundleError, BUNDLE_IMAGE_FILES, BundleExample, BundleImage, ExplanationBundle};
pub use manifest::{load_corpus, load_manifest, LabeledImage, Manifest, ManifestEntry, ManifestError};
pub use probmap::{read_probmap, write_probmap, ProbMapFileError};
pub use synth::{generate_synthetic_corpus, synthesize, SynthImage, SynthParams};
