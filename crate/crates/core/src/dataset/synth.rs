//! Synthetic probability-map corpora.
//!
//! Positives carry a smooth Gaussian blob with peak in `[0.7, 1.0]`;
//! negatives carry only weak texture below 0.3. Both sit on a background
//! below the admission threshold with sparse `[0.05, 0.2]` speckle. Label
//! noise flips the ground truth of an exact `round(label_noise * count)`
//! images of each class, so a model that learns the blob rule sees false
//! positives and false negatives.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Corpus, CorpusImage};
use crate::dataset::manifest::{Manifest, ManifestEntry};
use crate::dataset::probmap::write_probmap;
use crate::model::{Label, ProbMap};
use crate::teaching::candidate_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub n: usize,
    pub width: usize,
    pub height: usize,
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n: 200,
            width: 64,
            height: 64,
            label_noise: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    ProbMap(#[from] crate::dataset::probmap::ProbMapFileError),
}

#[derive(Debug, Clone)]
pub struct SynthImage {
    pub id: String,
    pub map: ProbMap,
    /// Label before noise: whether a blob was drawn.
    pub generator_label: Label,
    pub ground_truth: Label,
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n < 8 {
            return Err(SynthError::InvalidParams("n must be at least 8".into()));
        }
        if self.width < 8 || self.height < 8 {
            return Err(SynthError::InvalidParams("maps must be at least 8x8".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(SynthError::InvalidParams("label_noise must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

fn render(rng: &mut impl Rng, w: usize, h: usize, positive: bool) -> ProbMap {
    let mut v: Vec<f32> = (0..w * h).map(|_| rng.random_range(0.0f32..0.04)).collect();
    for px in v.iter_mut() {
        if rng.random_bool(0.01) {
            *px = rng.random_range(0.05f32..=0.2);
        }
    }

    let (peak, sigma_range) = if positive {
        (rng.random_range(0.7f64..=1.0), 2.0f64..7.0)
    } else if rng.random_bool(0.5) {
        (rng.random_range(0.1f64..0.28), 1.5f64..5.0)
    } else {
        return ProbMap::new(w, h, v).expect("values in range");
    };
    let sigma = rng.random_range(sigma_range);
    let margin = (w.min(h) / 8).max(1);
    let cx = rng.random_range(margin..w - margin) as f64;
    let cy = rng.random_range(margin..h - margin) as f64;
    for y in 0..h {
        for x in 0..w {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            let b = (peak * (-d2 / (2.0 * sigma * sigma)).exp()) as f32;
            let px = &mut v[y * w + x];
            *px = px.max(b);
        }
    }
    ProbMap::new(w, h, v).expect("values in range")
}

/// Generates the corpus in memory; deterministic in `params`.
pub fn synthesize(params: &SynthParams) -> Result<Vec<SynthImage>, SynthError> {
    params.validate()?;
    let mut images: Vec<SynthImage> = (0..params.n)
        .map(|i| {
            let mut rng = candidate_rng(params.seed, i as u64);
            let positive = i % 2 == 0;
            let map = render(&mut rng, params.width, params.height, positive);
            let label = if positive { Label::Present } else { Label::Absent };
            SynthImage {
                id: format!("img{i:04}"),
                map,
                generator_label: label,
                ground_truth: label,
            }
        })
        .collect();

    let mut rng = candidate_rng(params.seed, u64::MAX);
    for class in [Label::Present, Label::Absent] {
        let mut idx: Vec<usize> = (0..images.len())
            .filter(|&i| images[i].generator_label == class)
            .collect();
        let flips = (params.label_noise * idx.len() as f64).round() as usize;
        idx.shuffle(&mut rng);
        for &i in &idx[..flips] {
            images[i].ground_truth = class.flipped();
        }
    }
    Ok(images)
}

pub fn to_corpus(images: &[SynthImage]) -> Corpus {
    Corpus::new(
        images
            .iter()
            .map(|s| CorpusImage::new(s.id.clone(), s.ground_truth, s.map.clone()))
            .collect(),
    )
    .expect("synthetic ids are unique")
}

/// Writes `probmaps/<id>.btpm` files and `manifest.json` under `out_dir`.
/// Returns the manifest path.
pub fn generate_synthetic_corpus(params: &SynthParams, out_dir: &Path) -> Result<PathBuf, SynthError> {
    let images = synthesize(params)?;
    let maps_dir = out_dir.join("probmaps");
    fs::create_dir_all(&maps_dir)?;
    let mut manifest = Manifest::default();
    for img in &images {
        let rel = PathBuf::from("probmaps").join(format!("{}.btpm", img.id));
        write_probmap(&out_dir.join(&rel), &img.map)?;
        manifest.images.push(ManifestEntry {
            id: img.id.clone(),
            probmap: rel,
            xray: None,
            ground_truth: img.ground_truth,
            model_prob: None,
        });
    }
    let path = out_dir.join("manifest.json");
    fs::write(&path, manifest.to_json())?;
    Ok(path)
}
