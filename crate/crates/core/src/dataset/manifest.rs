//! Dataset manifests.
//!
//! ```json
//! {"images": [{"id": "img0000", "probmap": "probmaps/img0000.btpm",
//!              "xray": "xrays/img0000.png", "ground_truth": "present",
//!              "model_prob": 0.93}]}
//! ```
//!
//! `xray` and `model_prob` are optional. Paths are relative to the manifest's
//! directory unless absolute.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusImage};
use crate::dataset::probmap::{read_probmap, ProbMapFileError};
use crate::model::{classify, Label, DEFAULT_CUTOFF};

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
    #[error("image {id:?} references missing file {path}")]
    MissingFile { id: String, path: PathBuf },
    #[error("manifest schema error: {0}")]
    SchemaError(String),
    #[error("reading probability map for {id:?}: {source}")]
    ProbMap {
        id: String,
        #[source]
        source: ProbMapFileError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub probmap: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xray: Option<PathBuf>,
    pub ground_truth: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_prob: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub images: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// A manifest entry with resolved paths.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub id: String,
    pub probmap_path: PathBuf,
    pub xray_path: Option<PathBuf>,
    pub ground_truth: Label,
    pub model_label: Option<Label>,
    pub model_prob: Option<f64>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses and validates a manifest file.
pub fn load_manifest(path: &Path) -> Result<Vec<LabeledImage>, ManifestError> {
    let text = fs::read_to_string(path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| ManifestError::SchemaError(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(manifest.images.len());
    for e in manifest.images {
        if e.id.is_empty() {
            return Err(ManifestError::SchemaError("empty image id".into()));
        }
        if !seen.insert(e.id.clone()) {
            return Err(ManifestError::DuplicateId(e.id));
        }
        if let Some(p) = e.model_prob {
            if !(0.0..=1.0).contains(&p) {
                return Err(ManifestError::SchemaError(format!(
                    "model_prob {p} for {:?} is outside [0, 1]",
                    e.id
                )));
            }
        }
        let probmap_path = resolve(base, &e.probmap);
        let xray_path = e.xray.as_deref().map(|p| resolve(base, p));
        for p in std::iter::once(&probmap_path).chain(xray_path.as_ref()) {
            if !p.is_file() {
                return Err(ManifestError::MissingFile {
                    id: e.id.clone(),
                    path: p.clone(),
                });
            }
        }
        out.push(LabeledImage {
            id: e.id,
            probmap_path,
            xray_path,
            ground_truth: e.ground_truth,
            model_label: e.model_prob.map(|p| classify(p, DEFAULT_CUTOFF)),
            model_prob: e.model_prob,
        });
    }
    Ok(out)
}

/// Reads every probability map of a loaded manifest.
pub fn load_corpus(images: &[LabeledImage]) -> Result<Corpus, ManifestError> {
    let mut loaded = Vec::with_capacity(images.len());
    for img in images {
        let map = read_probmap(&img.probmap_path).map_err(|source| ManifestError::ProbMap {
            id: img.id.clone(),
            source,
        })?;
        let mut ci = CorpusImage::new(img.id.clone(), img.ground_truth, map);
        ci.model_prob = img.model_prob;
        loaded.push(ci);
    }
    Corpus::new(loaded).map_err(|e| match e {
        crate::corpus::CorpusError::DuplicateId(id) => ManifestError::DuplicateId(id),
    })
}
