//! Explanation bundles: the target, its four examples, and a saliency map
//! for each of the five, plus a `bundle.json` index.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dataset::manifest::LabeledImage;
use crate::model::{classify, Label, ThetaParams, DEFAULT_CUTOFF};
use crate::saliency::{render_grayscale, render_saliency, RgbRaster};
use crate::teaching::{Category, SelectionMode, TeachingSet};

pub const BUNDLE_FILE: &str = "bundle.json";
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// The ten image files of every bundle, target first, then TP, TN, FP, FN.
pub const BUNDLE_IMAGE_FILES: [&str; 10] = [
    "target.png",
    "target_saliency.png",
    "tp.png",
    "tp_saliency.png",
    "tn.png",
    "tn_saliency.png",
    "fp.png",
    "fp_saliency.png",
    "fn.png",
    "fn_saliency.png",
];

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("unknown image id {0:?}")]
    UnknownId(String),
    #[error("image {0:?} has no target-model probability")]
    MissingModelProb(String),
    #[error("teaching set is for {found:?}, not {expected:?}")]
    TargetMismatch { expected: String, found: String },
    #[error("bundle schema error: {0}")]
    Schema(String),
    #[error("image error for {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleImage {
    pub id: String,
    pub ground_truth: Label,
    pub model_label: Label,
    pub model_prob: f64,
    /// Display image, relative to the bundle directory.
    pub image: String,
    /// Saliency map, relative to the bundle directory.
    pub saliency: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleExample {
    pub role: Category,
    #[serde(flatten)]
    pub image: BundleImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    pub seed: u64,
    pub epsilon: f64,
    pub n_candidates: usize,
    pub acceptance_count: usize,
    pub candidate_index: usize,
    pub selection_mode: SelectionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationBundle {
    pub schema_version: u32,
    pub target: BundleImage,
    /// Always TP, TN, FP, FN.
    pub examples: Vec<BundleExample>,
    pub learner_theta: ThetaParams,
    pub learner_prob: f64,
    pub metadata: BundleMetadata,
}

impl ExplanationBundle {
    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let text = fs::read_to_string(dir.join(BUNDLE_FILE))?;
        let b: ExplanationBundle =
            serde_json::from_str(&text).map_err(|e| BundleError::Schema(e.to_string()))?;
        if b.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(BundleError::Schema(format!(
                "unsupported schema version {}",
                b.schema_version
            )));
        }
        let roles: Vec<Category> = b.examples.iter().map(|e| e.role).collect();
        if roles != Category::ALL {
            return Err(BundleError::Schema("examples must be ordered tp, tn, fp, fn".into()));
        }
        Ok(b)
    }

    /// Every image file referenced by the bundle, target first.
    pub fn files(&self) -> Vec<&str> {
        std::iter::once(&self.target)
            .chain(self.examples.iter().map(|e| &e.image))
            .flat_map(|i| [i.image.as_str(), i.saliency.as_str()])
            .collect()
    }
}

fn save(raster: &RgbRaster, path: &Path) -> Result<(), BundleError> {
    raster.save_png(path).map_err(|source| BundleError::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn display_raster(img: Option<&LabeledImage>, map: &crate::model::ProbMap) -> Result<RgbRaster, BundleError> {
    match img.and_then(|i| i.xray_path.as_ref()) {
        Some(path) => {
            let decoded = image::open(path).map_err(|source| BundleError::Image {
                path: path.clone(),
                source,
            })?;
            Ok(RgbRaster::from_image(&decoded.to_rgb8()))
        }
        None => Ok(render_grayscale(map)),
    }
}

/// Writes the ten PNGs and `bundle.json` into `out_dir`.
///
/// `corpus` must carry target-model probabilities (see [`Corpus::annotate`]).
/// `images` supplies optional display x-rays; images without one are shown
/// as a grayscale rendering of their probability map.
pub fn assemble_bundle(
    target_id: &str,
    set: &TeachingSet,
    corpus: &Corpus,
    images: &[LabeledImage],
    out_dir: &Path,
) -> Result<ExplanationBundle, BundleError> {
    if set.target_id != target_id {
        return Err(BundleError::TargetMismatch {
            expected: target_id.to_string(),
            found: set.target_id.clone(),
        });
    }
    fs::create_dir_all(out_dir)?;

    let emit = |id: &str, stem: &str| -> Result<BundleImage, BundleError> {
        let ci = corpus
            .get(id)
            .ok_or_else(|| BundleError::UnknownId(id.to_string()))?;
        let model_prob = ci
            .model_prob
            .ok_or_else(|| BundleError::MissingModelProb(id.to_string()))?;
        let labeled = images.iter().find(|i| i.id == id);
        let image = format!("{stem}.png");
        let saliency = format!("{stem}_saliency.png");
        save(&display_raster(labeled, &ci.map)?, &out_dir.join(&image))?;
        save(&render_saliency(&ci.map), &out_dir.join(&saliency))?;
        Ok(BundleImage {
            id: id.to_string(),
            ground_truth: ci.ground_truth,
            model_label: classify(model_prob, DEFAULT_CUTOFF),
            model_prob,
            image,
            saliency,
        })
    };

    let target = emit(target_id, "target")?;
    let mut examples = Vec::with_capacity(4);
    for (role, id) in set.examples.in_order() {
        examples.push(BundleExample {
            role,
            image: emit(id, role.short())?,
        });
    }
    let bundle = ExplanationBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        target,
        examples,
        learner_theta: set.learner_theta,
        learner_prob: set.learner_prob,
        metadata: BundleMetadata {
            seed: set.seed,
            epsilon: set.epsilon,
            n_candidates: set.n_candidates,
            acceptance_count: set.acceptance_count,
            candidate_index: set.candidate_index,
            selection_mode: set.selection_mode,
        },
    };
    let mut json = serde_json::to_string_pretty(&bundle).expect("bundle serializes");
    json.push('\n');
    fs::write(out_dir.join(BUNDLE_FILE), json)?;
    Ok(bundle)
}
