//! Selection of explanatory teaching sets.
//!
//! A teaching set holds one true positive, true negative, false positive
//! and false negative example (categories taken from the target model's
//! predictions). Candidate sets are drawn uniformly; for each one a learner
//! with the target's architecture is trained on the four examples, labelled
//! with the target model's predictions, and scored by the probability it
//! assigns to the target image. A candidate is accepted when that score is
//! within `epsilon` of the target model's label.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::corpus::{Corpus, CorpusImage};
use crate::model::{classify, ImageFeatures, Label, ThetaParams, DEFAULT_CUTOFF};
use crate::training::{train_theta, TrainConfig, TrainError, TrainItem};

/// Confusion category of an image under the target model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "tp")]
    TruePositive,
    #[serde(rename = "tn")]
    TrueNegative,
    #[serde(rename = "fp")]
    FalsePositive,
    #[serde(rename = "fn")]
    FalseNegative,
}

impl Category {
    /// Presentation order: TP, TN, FP, FN.
    pub const ALL: [Category; 4] = [
        Category::TruePositive,
        Category::TrueNegative,
        Category::FalsePositive,
        Category::FalseNegative,
    ];

    pub fn of(model_label: Label, ground_truth: Label) -> Self {
        match (model_label, ground_truth) {
            (Label::Present, Label::Present) => Category::TruePositive,
            (Label::Absent, Label::Absent) => Category::TrueNegative,
            (Label::Present, Label::Absent) => Category::FalsePositive,
            (Label::Absent, Label::Present) => Category::FalseNegative,
        }
    }

    /// The label the target model predicts for images in this category.
    pub fn model_label(self) -> Label {
        match self {
            Category::TruePositive | Category::FalsePositive => Label::Present,
            Category::TrueNegative | Category::FalseNegative => Label::Absent,
        }
    }

    pub fn ground_truth(self) -> Label {
        match self {
            Category::TruePositive | Category::FalseNegative => Label::Present,
            Category::TrueNegative | Category::FalsePositive => Label::Absent,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Category::TruePositive => "tp",
            Category::TrueNegative => "tn",
            Category::FalsePositive => "fp",
            Category::FalseNegative => "fn",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TeachingError {
    #[error("no {0} examples available")]
    PoolEmpty(Category),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("unknown image id {0:?}")]
    UnknownId(String),
    #[error("image {0:?} has no target-model label")]
    MissingModelLabel(String),
    #[error("target {0:?} appears in the example pools")]
    TargetInPools(String),
    #[error("invalid teaching config: {0}")]
    InvalidConfig(String),
    #[error(
        "no teaching set satisfied epsilon = {epsilon:e} among {n_candidates} candidates \
         (best learner probability {best_prob})"
    )]
    NoTeachingSetFound {
        epsilon: f64,
        n_candidates: usize,
        best_prob: f64,
    },
    #[error(transparent)]
    Training(#[from] TrainError),
}

/// Image ids per confusion category, in corpus order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryPools {
    pub tp: Vec<String>,
    pub tn: Vec<String>,
    pub fp: Vec<String>,
    #[serde(rename = "fn")]
    pub fn_: Vec<String>,
}

impl CategoryPools {
    pub fn pool(&self, c: Category) -> &[String] {
        match c {
            Category::TruePositive => &self.tp,
            Category::TrueNegative => &self.tn,
            Category::FalsePositive => &self.fp,
            Category::FalseNegative => &self.fn_,
        }
    }

    fn pool_mut(&mut self, c: Category) -> &mut Vec<String> {
        match c {
            Category::TruePositive => &mut self.tp,
            Category::TrueNegative => &mut self.tn,
            Category::FalsePositive => &mut self.fp,
            Category::FalseNegative => &mut self.fn_,
        }
    }

    pub fn sizes(&self) -> [usize; 4] {
        Category::ALL.map(|c| self.pool(c).len())
    }

    pub fn total(&self) -> usize {
        self.sizes().iter().sum()
    }

    pub fn ensure_non_empty(&self) -> Result<(), TeachingError> {
        match Category::ALL.into_iter().find(|c| self.pool(*c).is_empty()) {
            Some(c) => Err(TeachingError::PoolEmpty(c)),
            None => Ok(()),
        }
    }
}

/// Partitions every image except `exclude` by the target model's prediction
/// against ground truth.
pub fn categorize(corpus: &Corpus, theta_target: &ThetaParams, exclude: Option<&str>) -> CategoryPools {
    let mut pools = CategoryPools::default();
    for img in corpus.images() {
        if Some(img.id.as_str()) == exclude {
            continue;
        }
        let label = classify(img.features.prob(theta_target), DEFAULT_CUTOFF);
        pools
            .pool_mut(Category::of(label, img.ground_truth))
            .push(img.id.clone());
    }
    pools
}

/// [`categorize`], failing when any of the four pools is empty.
pub fn build_category_pools(
    corpus: &Corpus,
    theta_target: &ThetaParams,
    exclude: Option<&str>,
) -> Result<CategoryPools, TeachingError> {
    if corpus.is_empty() {
        return Err(TeachingError::EmptyDataset);
    }
    let pools = categorize(corpus, theta_target, exclude);
    pools.ensure_non_empty()?;
    Ok(pools)
}

/// One draw from each pool, in TP, TN, FP, FN order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidateIds {
    pub tp: String,
    pub tn: String,
    pub fp: String,
    #[serde(rename = "fn")]
    pub fn_: String,
}

impl CandidateIds {
    pub fn get(&self, c: Category) -> &str {
        match c {
            Category::TruePositive => &self.tp,
            Category::TrueNegative => &self.tn,
            Category::FalsePositive => &self.fp,
            Category::FalseNegative => &self.fn_,
        }
    }

    pub fn in_order(&self) -> [(Category, &str); 4] {
        Category::ALL.map(|c| (c, self.get(c)))
    }
}

/// Draws one id uniformly and independently from each pool.
pub fn sample_candidate<R: Rng + ?Sized>(
    pools: &CategoryPools,
    rng: &mut R,
) -> Result<CandidateIds, TeachingError> {
    pools.ensure_non_empty()?;
    let mut pick = |c: Category| {
        let pool = pools.pool(c);
        pool[rng.random_range(0..pool.len())].clone()
    };
    Ok(CandidateIds {
        tp: pick(Category::TruePositive),
        tn: pick(Category::TrueNegative),
        fp: pick(Category::FalsePositive),
        fn_: pick(Category::FalseNegative),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachingCandidate {
    pub ids: CandidateIds,
    pub learner_theta: ThetaParams,
    pub learner_prob: f64,
}

fn resolve<'a>(corpus: &'a Corpus, id: &str) -> Result<&'a CorpusImage, TeachingError> {
    corpus
        .get(id)
        .ok_or_else(|| TeachingError::UnknownId(id.to_string()))
}

fn learner_on(
    examples: [&ImageFeatures; 4],
    target: &ImageFeatures,
    train_cfg: &TrainConfig,
) -> Result<(ThetaParams, f64), TrainError> {
    let items: Vec<TrainItem<'_>> = examples
        .iter()
        .zip(Category::ALL)
        .map(|(f, c)| TrainItem::new(f, c.model_label()))
        .collect();
    let out = train_theta(&items, train_cfg)?;
    Ok((out.theta, target.prob(&out.theta)))
}

/// Trains a learner on the four examples (labelled with the target model's
/// predictions) and scores the target image under it.
pub fn learner_posterior(
    ids: &CandidateIds,
    corpus: &Corpus,
    target: &ImageFeatures,
    train_cfg: &TrainConfig,
) -> Result<TeachingCandidate, TeachingError> {
    let mut feats = Vec::with_capacity(4);
    for (_, id) in ids.in_order() {
        feats.push(&resolve(corpus, id)?.features);
    }
    let (learner_theta, learner_prob) =
        learner_on([feats[0], feats[1], feats[2], feats[3]], target, train_cfg)?;
    Ok(TeachingCandidate {
        ids: ids.clone(),
        learner_theta,
        learner_prob,
    })
}

/// Whether a learner probability is within `epsilon` of `target_label`.
pub fn accepts(target_label: Label, learner_prob: f64, epsilon: f64) -> bool {
    match target_label {
        Label::Present => 1.0 - learner_prob < epsilon,
        Label::Absent => learner_prob < epsilon,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Uniform draw among accepted candidates.
    #[default]
    UniformAmongAccepted,
    /// The candidate whose learner probability is closest to the target label.
    MaximumPosterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeachingConfig {
    pub n_candidates: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub selection_mode: SelectionMode,
}

impl Default for TeachingConfig {
    fn default() -> Self {
        Self {
            n_candidates: 10_000,
            epsilon: 1e-6,
            seed: 0,
            selection_mode: SelectionMode::UniformAmongAccepted,
        }
    }
}

impl TeachingConfig {
    pub fn validate(&self) -> Result<(), TeachingError> {
        if self.n_candidates == 0 {
            return Err(TeachingError::InvalidConfig("n_candidates must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(TeachingError::InvalidConfig("epsilon must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeachingSet {
    pub target_id: String,
    /// Target model's label for the target image.
    pub target_label: Label,
    pub examples: CandidateIds,
    pub learner_theta: ThetaParams,
    pub learner_prob: f64,
    /// Position of the chosen candidate in evaluation order.
    pub candidate_index: usize,
    pub acceptance_count: usize,
    pub n_candidates: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub selection_mode: SelectionMode,
}

/// RNG for candidate `index`: one ChaCha stream per candidate, so draws do
/// not depend on evaluation order.
pub fn candidate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

// Stream reserved for the final uniform pick.
const SELECTION_STREAM: u64 = u64::MAX;

/// Every evaluated candidate, in evaluation order.
pub fn evaluate_candidates(
    target: &CorpusImage,
    pools: &CategoryPools,
    corpus: &Corpus,
    cfg: &TeachingConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<TeachingCandidate>, TeachingError> {
    cfg.validate()?;
    train_cfg.validate()?;
    pools.ensure_non_empty()?;
    for c in Category::ALL {
        for id in pools.pool(c) {
            if *id == target.id {
                return Err(TeachingError::TargetInPools(id.clone()));
            }
            resolve(corpus, id)?;
        }
    }
    (0..cfg.n_candidates)
        .into_par_iter()
        .map(|i| {
            let mut rng = candidate_rng(cfg.seed, i as u64);
            let ids = sample_candidate(pools, &mut rng)?;
            learner_posterior(&ids, corpus, &target.features, train_cfg)
        })
        .collect()
}

/// Samples candidate sets, scores them with the learner and picks one whose
/// learner probability satisfies the epsilon criterion for the target.
pub fn select_teaching_set(
    target: &CorpusImage,
    pools: &CategoryPools,
    corpus: &Corpus,
    cfg: &TeachingConfig,
    train_cfg: &TrainConfig,
) -> Result<TeachingSet, TeachingError> {
    let target_label = target
        .model_label()
        .ok_or_else(|| TeachingError::MissingModelLabel(target.id.clone()))?;
    let evaluated = evaluate_candidates(target, pools, corpus, cfg, train_cfg)?;

    // Closeness to the target label; higher is better.
    let score = |p: f64| match target_label {
        Label::Present => p,
        Label::Absent => -p,
    };
    let accepted: Vec<usize> = evaluated
        .iter()
        .enumerate()
        .filter(|(_, c)| accepts(target_label, c.learner_prob, cfg.epsilon))
        .map(|(i, _)| i)
        .collect();

    if accepted.is_empty() {
        let best_prob = evaluated
            .iter()
            .map(|c| c.learner_prob)
            .reduce(|a, b| if score(b) > score(a) { b } else { a })
            .unwrap_or(f64::NAN);
        return Err(TeachingError::NoTeachingSetFound {
            epsilon: cfg.epsilon,
            n_candidates: cfg.n_candidates,
            best_prob,
        });
    }

    let chosen = match cfg.selection_mode {
        SelectionMode::UniformAmongAccepted => {
            let mut rng = candidate_rng(cfg.seed, SELECTION_STREAM);
            accepted[rng.random_range(0..accepted.len())]
        }
        SelectionMode::MaximumPosterior => {
            let mut best = accepted[0];
            for &i in &accepted[1..] {
                if score(evaluated[i].learner_prob) > score(evaluated[best].learner_prob) {
                    best = i;
                }
            }
            best
        }
    };
    let pick = &evaluated[chosen];
    Ok(TeachingSet {
        target_id: target.id.clone(),
        target_label,
        examples: pick.ids.clone(),
        learner_theta: pick.learner_theta,
        learner_prob: pick.learner_prob,
        candidate_index: chosen,
        acceptance_count: accepted.len(),
        n_candidates: cfg.n_candidates,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        selection_mode: cfg.selection_mode,
    })
}
