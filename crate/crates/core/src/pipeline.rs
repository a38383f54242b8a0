//! End-to-end steps shared by the command line and the study service.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::dataset::bundle::{assemble_bundle, BundleError, ExplanationBundle};
use crate::dataset::manifest::LabeledImage;
use crate::model::{ThetaParams, DEFAULT_CUTOFF};
use crate::teaching::{build_category_pools, select_teaching_set, TeachingConfig, TeachingError, TeachingSet};
use crate::training::{evaluate_accuracy, train_theta, TrainConfig, TrainError, TrainItem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub n_items: usize,
    pub iterations: usize,
    pub final_loss: f64,
    pub accuracy: f64,
}

/// On-disk target parameters: `{"w1":…,"b1":…,"w2":…,"b2":…}` with an
/// optional `training` summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFile {
    #[serde(flatten)]
    pub theta: ThetaParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
}

#[derive(Debug, thiserror::Error)]
pub enum ThetaFileError {
    #[error("theta file: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ThetaFile {
    pub fn load(path: &Path) -> Result<Self, ThetaFileError> {
        let text = fs::read_to_string(path)?;
        let f: ThetaFile = serde_json::from_str(&text).map_err(|e| ThetaFileError::Schema(e.to_string()))?;
        if !f.theta.is_finite() {
            return Err(ThetaFileError::Schema("parameters must be finite".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<(), ThetaFileError> {
        let mut s = serde_json::to_string_pretty(self).expect("theta serializes");
        s.push('\n');
        fs::write(path, s)?;
        Ok(())
    }
}

/// Fits the target model on every image's ground truth.
pub fn train_target_model(corpus: &Corpus, cfg: &TrainConfig) -> Result<ThetaFile, TrainError> {
    let items: Vec<TrainItem<'_>> = corpus
        .images()
        .iter()
        .map(|i| TrainItem::new(&i.features, i.ground_truth))
        .collect();
    let out = train_theta(&items, cfg)?;
    Ok(ThetaFile {
        theta: out.theta,
        training: Some(TrainingSummary {
            n_items: items.len(),
            iterations: out.iterations,
            final_loss: out.final_loss,
            accuracy: evaluate_accuracy(&items, &out.theta, DEFAULT_CUTOFF)?,
        }),
    })
}

#[derive(Debug, thiserror::Error)]
pub enum ExplainError {
    #[error(transparent)]
    Teaching(#[from] TeachingError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

/// Selects a teaching set for `target_id` and writes its bundle.
///
/// `corpus` must be annotated with `theta`. The target is excluded from the
/// example pools.
pub fn explain_target(
    corpus: &Corpus,
    images: &[LabeledImage],
    theta: &ThetaParams,
    target_id: &str,
    cfg: &TeachingConfig,
    out_dir: &Path,
) -> Result<(TeachingSet, ExplanationBundle), ExplainError> {
    let target = corpus
        .get(target_id)
        .ok_or_else(|| TeachingError::UnknownId(target_id.to_string()))?;
    let pools = build_category_pools(corpus, theta, Some(target_id))?;
    let set = select_teaching_set(target, &pools, corpus, cfg, &TrainConfig::for_items(4))?;
    let bundle = assemble_bundle(target_id, &set, corpus, images, out_dir)?;
    Ok((set, bundle))
}
