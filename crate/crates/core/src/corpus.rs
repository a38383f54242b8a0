//! In-memory dataset: probability maps with labels and cached features.

use std::collections::HashMap;

use crate::model::{classify, ImageFeatures, Label, ProbMap, ThetaParams, DEFAULT_CUTOFF};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub id: String,
    pub ground_truth: Label,
    pub map: ProbMap,
    pub features: ImageFeatures,
    /// Target-model probability, once the corpus has been annotated.
    pub model_prob: Option<f64>,
}

impl CorpusImage {
    pub fn new(id: impl Into<String>, ground_truth: Label, map: ProbMap) -> Self {
        let features = ImageFeatures::from_map(&map);
        Self {
            id: id.into(),
            ground_truth,
            map,
            features,
            model_prob: None,
        }
    }

    pub fn model_label(&self) -> Option<Label> {
        self.model_prob.map(|p| classify(p, DEFAULT_CUTOFF))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    images: Vec<CorpusImage>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(images: Vec<CorpusImage>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if by_id.insert(img.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(img.id.clone()));
            }
        }
        Ok(Self { images, by_id })
    }

    pub fn images(&self) -> &[CorpusImage] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&CorpusImage> {
        self.index_of(id).map(|i| &self.images[i])
    }

    /// Records the target model's probability on every image.
    pub fn annotate(&mut self, theta: &ThetaParams) {
        for img in &mut self.images {
            img.model_prob = Some(img.features.prob(theta));
        }
    }
}
