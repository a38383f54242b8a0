//! Study targets and their explanation bundles.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use bteach_core::dataset::{BundleError, ExplanationBundle, LabeledImage};
use bteach_core::pipeline::{explain_target, ExplainError};
use bteach_core::study::plan::{CERTIFICATION_PER_CATEGORY, PREDICTION_PER_CATEGORY};
use bteach_core::study::StudyTarget;
use bteach_core::{Category, Corpus, TeachingConfig, TeachingError, ThetaParams};

#[derive(Debug, thiserror::Error)]
pub enum MaterialsError {
    #[error("image {0:?} has no target-model probability")]
    Unannotated(String),
    #[error("target {id:?}: {source}")]
    Explain {
        id: String,
        #[source]
        source: ExplainError,
    },
    #[error("bundle {id:?}: {source}")]
    Bundle {
        id: String,
        #[source]
        source: BundleError,
    },
}

/// Everything the service needs besides the session directory.
#[derive(Debug, Clone)]
pub struct StudyMaterials {
    pub targets: Vec<StudyTarget>,
    pub bundles_dir: PathBuf,
    /// Loaded bundles keyed by bundle name.
    pub bundles: HashMap<String, ExplanationBundle>,
    /// Targets for which no teaching set met the acceptance criterion.
    pub skipped: Vec<String>,
}

/// Builds bundles for the first targets of each category in id order,
/// reusing any valid bundle already under `bundles_dir/<id>`. Targets whose
/// teaching-set search fails are skipped in favour of the next id.
///
/// `corpus` must be annotated with `theta`.
pub fn prepare_materials(
    corpus: &Corpus,
    images: &[LabeledImage],
    theta: &ThetaParams,
    bundles_dir: &Path,
    teaching: &TeachingConfig,
) -> Result<StudyMaterials, MaterialsError> {
    let per_category = PREDICTION_PER_CATEGORY + CERTIFICATION_PER_CATEGORY;
    let mut targets = Vec::with_capacity(corpus.len());
    for img in corpus.images() {
        let prob = img
            .model_prob
            .ok_or_else(|| MaterialsError::Unannotated(img.id.clone()))?;
        targets.push(StudyTarget {
            id: img.id.clone(),
            ground_truth: img.ground_truth,
            ai_label: img.model_label().expect("annotated"),
            ai_prob: prob,
            map: img.map.clone(),
            bundle: None,
        });
    }

    let mut bundles = HashMap::new();
    let mut skipped = Vec::new();
    for category in Category::ALL {
        let mut order: Vec<usize> = (0..targets.len())
            .filter(|&i| targets[i].category() == category)
            .collect();
        order.sort_by(|&a, &b| targets[a].id.cmp(&targets[b].id));
        let mut have = 0;
        for i in order {
            if have == per_category {
                break;
            }
            let id = targets[i].id.clone();
            let dir = bundles_dir.join(&id);
            let bundle = match ExplanationBundle::load(&dir) {
                Ok(b) if b.target.id == id => b,
                _ => match explain_target(corpus, images, theta, &id, teaching, &dir) {
                    Ok((_, b)) => b,
                    Err(ExplainError::Teaching(TeachingError::NoTeachingSetFound { .. })) => {
                        skipped.push(id);
                        continue;
                    }
                    Err(source) => return Err(MaterialsError::Explain { id, source }),
                },
            };
            targets[i].bundle = Some(id.clone());
            bundles.insert(id, bundle);
            have += 1;
        }
    }
    Ok(StudyMaterials {
        targets,
        bundles_dir: bundles_dir.to_path_buf(),
        bundles,
        skipped,
    })
}

impl StudyMaterials {
    /// Loads bundles named by already-assigned targets.
    pub fn from_targets(targets: Vec<StudyTarget>, bundles_dir: &Path) -> Result<Self, MaterialsError> {
        let mut bundles = HashMap::new();
        for name in targets.iter().filter_map(|t| t.bundle.clone()) {
            let b = ExplanationBundle::load(&bundles_dir.join(&name))
                .map_err(|source| MaterialsError::Bundle { id: name.clone(), source })?;
            bundles.insert(name, b);
        }
        Ok(Self {
            targets,
            bundles_dir: bundles_dir.to_path_buf(),
            bundles,
            skipped: Vec::new(),
        })
    }
}
