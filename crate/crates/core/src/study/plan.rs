//! Study plans: which targets appear in which block, in which order.
//!
//! Target selection is a function of the materials alone; the participant
//! seed only drives pair-to-block assignment, trial order within each block
//! and the order of the two certification blocks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Label, ProbMap};
use crate::study::pairing::{pair_by_l1, PairingError};
use crate::teaching::Category;

pub const TRIALS_PER_BLOCK: usize = 8;
pub const PREDICTION_PER_CATEGORY: usize = 2;
pub const CERTIFICATION_PER_CATEGORY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Prediction,
    CertExamples,
    CertNoExamples,
}

impl Block {
    pub fn is_certification(self) -> bool {
        self != Block::Prediction
    }

    pub fn shows_examples(self) -> bool {
        self != Block::CertNoExamples
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Block::Prediction => "prediction",
            Block::CertExamples => "cert_examples",
            Block::CertNoExamples => "cert_no_examples",
        }
    }
}

/// A candidate target image with its explanation bundle, if one exists.
#[derive(Debug, Clone)]
pub struct StudyTarget {
    pub id: String,
    pub ground_truth: Label,
    pub ai_label: Label,
    pub ai_prob: f64,
    pub map: ProbMap,
    /// Name of the bundle directory holding the ten images.
    pub bundle: Option<String>,
}

impl StudyTarget {
    pub fn category(&self) -> Category {
        Category::of(self.ai_label, self.ground_truth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub block: Block,
    pub target_id: String,
    pub category: Category,
    pub ground_truth: Label,
    pub ai_label: Label,
    pub ai_prob: f64,
    pub bundle: String,
    pub show_ai_judgement: bool,
}

impl TrialSpec {
    fn new(t: &StudyTarget, block: Block) -> Self {
        Self {
            block,
            target_id: t.id.clone(),
            category: t.category(),
            ground_truth: t.ground_truth,
            ai_label: t.ai_label,
            ai_prob: t.ai_prob,
            bundle: t.bundle.clone().expect("selected targets have bundles"),
            show_ai_judgement: block.is_certification(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPlan {
    pub seed: u64,
    pub prediction_block: Vec<TrialSpec>,
    pub cert_examples_block: Vec<TrialSpec>,
    pub cert_no_examples_block: Vec<TrialSpec>,
    /// Order in which the two certification blocks run.
    pub block_order: [Block; 2],
    /// Same-category certification pairs, first member in `cert_examples`.
    pub pairs: Vec<(String, String)>,
}

impl StudyPlan {
    pub fn block(&self, b: Block) -> &[TrialSpec] {
        match b {
            Block::Prediction => &self.prediction_block,
            Block::CertExamples => &self.cert_examples_block,
            Block::CertNoExamples => &self.cert_no_examples_block,
        }
    }

    /// All 24 trials in presentation order.
    pub fn trials(&self) -> Vec<&TrialSpec> {
        std::iter::once(Block::Prediction)
            .chain(self.block_order)
            .flat_map(|b| self.block(b))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("category {category}: need {needed} targets with bundles, {available} available")]
    InsufficientCategory {
        category: Category,
        needed: usize,
        available: usize,
    },
    #[error(transparent)]
    Pairing(#[from] PairingError),
}

/// Builds one participant's plan.
///
/// Per category, eligible targets (those with bundles) are taken in id
/// order: the first two go to the prediction block, the next four are
/// paired by minimum total L1 distance and split across the two
/// certification blocks.
pub fn build_study_plan(targets: &[StudyTarget], participant_seed: u64) -> Result<StudyPlan, PlanError> {
    let needed = PREDICTION_PER_CATEGORY + CERTIFICATION_PER_CATEGORY;
    let mut rng = ChaCha8Rng::seed_from_u64(participant_seed);
    let mut prediction = Vec::with_capacity(TRIALS_PER_BLOCK);
    let mut with_examples = Vec::with_capacity(TRIALS_PER_BLOCK);
    let mut without_examples = Vec::with_capacity(TRIALS_PER_BLOCK);
    let mut pairs = Vec::new();

    for category in Category::ALL {
        let mut eligible: Vec<&StudyTarget> = targets
            .iter()
            .filter(|t| t.category() == category && t.bundle.is_some())
            .collect();
        eligible.sort_by(|a, b| a.id.cmp(&b.id));
        if eligible.len() < needed {
            return Err(PlanError::InsufficientCategory {
                category,
                needed,
                available: eligible.len(),
            });
        }
        let (pred, rest) = eligible.split_at(PREDICTION_PER_CATEGORY);
        prediction.extend(pred.iter().map(|t| TrialSpec::new(t, Block::Prediction)));

        let cert = &rest[..CERTIFICATION_PER_CATEGORY];
        let cands: Vec<(String, &ProbMap)> = cert.iter().map(|t| (t.id.clone(), &t.map)).collect();
        for (a, b) in pair_by_l1(&cands)? {
            let (ex, no_ex) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let find = |id: &str| *cert.iter().find(|t| t.id == id).expect("paired id");
            with_examples.push(TrialSpec::new(find(&ex), Block::CertExamples));
            without_examples.push(TrialSpec::new(find(&no_ex), Block::CertNoExamples));
            pairs.push((ex, no_ex));
        }
    }

    prediction.shuffle(&mut rng);
    with_examples.shuffle(&mut rng);
    without_examples.shuffle(&mut rng);
    let block_order = if rng.random_bool(0.5) {
        [Block::CertExamples, Block::CertNoExamples]
    } else {
        [Block::CertNoExamples, Block::CertExamples]
    };

    Ok(StudyPlan {
        seed: participant_seed,
        prediction_block: prediction,
        cert_examples_block: with_examples,
        cert_no_examples_block: without_examples,
        block_order,
        pairs,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use std::collections::HashSet;

    /// Six targets per category with distinct one-pixel maps.
    pub(crate) fn minimal_targets() -> Vec<StudyTarget> {
        let mut out = Vec::new();
        for (ci, c) in Category::ALL.into_iter().enumerate() {
            for k in 0..6 {
                let v = (ci * 6 + k) as f32 / 30.0;
                out.push(StudyTarget {
                    id: format!("{}{k}", c.short()),
                    ground_truth: c.ground_truth(),
                    ai_label: c.model_label(),
                    ai_prob: if c.model_label().is_present() { 0.9 } else { 0.1 },
                    map: ProbMap::new(2, 1, vec![v, 1.0 - v]).unwrap(),
                    bundle: Some(format!("b-{}{k}", c.short())),
                });
            }
        }
        out
    }

    fn count(block: &[TrialSpec], c: Category) -> usize {
        block.iter().filter(|t| t.category == c).count()
    }

    #[test]
    fn minimal_dataset_uses_every_image() {
        let targets = minimal_targets();
        let plan = build_study_plan(&targets, 1).unwrap();
        let used: HashSet<&str> = plan.trials().iter().map(|t| t.target_id.as_str()).collect();
        assert_eq!(used.len(), 24);
        for c in Category::ALL {
            assert_eq!(count(&plan.prediction_block, c), 2);
            assert_eq!(count(&plan.cert_examples_block, c), 2);
            assert_eq!(count(&plan.cert_no_examples_block, c), 2);
        }
        assert!(plan.prediction_block.iter().all(|t| !t.show_ai_judgement));
        assert!(plan.cert_examples_block.iter().all(|t| t.show_ai_judgement));
        for (a, b) in &plan.pairs {
            assert_eq!(a[..2], b[..2], "pair {a} {b} crosses categories");
        }
    }

    #[test]
    fn seeds_change_order_not_targets() {
        let targets = minimal_targets();
        let a = build_study_plan(&targets, 1).unwrap();
        let b = build_study_plan(&targets, 2).unwrap();
        let ids = |p: &StudyPlan| {
            let mut v: Vec<String> = p.trials().iter().map(|t| t.target_id.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(ids(&a), ids(&b));
        let pred = |p: &StudyPlan| {
            let mut v: Vec<String> = p.prediction_block.iter().map(|t| t.target_id.clone()).collect();
            v.sort();
            v
        };
        assert_eq!(pred(&a), pred(&b));
        let unordered = |p: &StudyPlan| {
            let mut v: Vec<(String, String)> = p
                .pairs
                .iter()
                .map(|(x, y)| if x < y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) })
                .collect();
            v.sort();
            v
        };
        assert_eq!(unordered(&a), unordered(&b));
        assert_ne!(a.trials(), b.trials());
        assert_eq!(build_study_plan(&targets, 1).unwrap(), a);
    }

    #[test]
    fn short_category_is_reported() {
        let mut targets = minimal_targets();
        targets.retain(|t| t.id != "fn5" && t.id != "fn4" && t.id != "fn3");
        assert_eq!(
            build_study_plan(&targets, 0),
            Err(PlanError::InsufficientCategory {
                category: Category::FalseNegative,
                needed: 6,
                available: 3
            })
        );
    }

    #[test]
    fn targets_without_bundles_are_skipped() {
        let mut targets = minimal_targets();
        targets[0].bundle = None;
        assert!(matches!(
            build_study_plan(&targets, 0),
            Err(PlanError::InsufficientCategory { available: 5, .. })
        ));
    }
}
