//! Participant sessions: the per-trial phase machine, response validation
//! and append-only persistence.
//!
//! Prediction trials run `diagnose → examples → target → predict`; the
//! predict response carries the feedback. Certification trials run
//! `view → certify`. Every completed phase is stored as one [`PhaseRecord`]
//! line in `<sessions-dir>/<session-id>.jsonl`, so a session can be rebuilt
//! by replaying its file.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::model::Label;
use crate::study::plan::{build_study_plan, Block, PlanError, StudyPlan, StudyTarget, TrialSpec};
use crate::teaching::Category;

pub const SESSION_SCHEMA_VERSION: u32 = 1;
pub const TOTAL_TRIALS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Diagnose,
    Examples,
    Target,
    Predict,
    View,
    Certify,
}

impl Phase {
    pub fn sequence(block: Block) -> &'static [Phase] {
        match block {
            Block::Prediction => &[Phase::Diagnose, Phase::Examples, Phase::Target, Phase::Predict],
            _ => &[Phase::View, Phase::Certify],
        }
    }

    /// Phases that produce an exported response row.
    pub fn is_rating(self) -> bool {
        matches!(self, Phase::Diagnose | Phase::Predict | Phase::Certify)
    }
}

/// Certification justifications, in on-screen order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Justification {
    CorrectAnswer,
    AppropriatelyConfident,
    LookedRightPlace,
    ExamplesInformative,
    NotCertain,
    Other,
}

impl Justification {
    pub const ALL: [Justification; 6] = [
        Justification::CorrectAnswer,
        Justification::AppropriatelyConfident,
        Justification::LookedRightPlace,
        Justification::ExamplesInformative,
        Justification::NotCertain,
        Justification::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Justification::CorrectAnswer => "The robot got the correct answer",
            Justification::AppropriatelyConfident => "The robot was appropriately confident",
            Justification::LookedRightPlace => "The robot looked in the right place",
            Justification::ExamplesInformative => "The examples are informative",
            Justification::NotCertain => "I am not certain I should certify",
            Justification::Other => "Other",
        }
    }

    /// Options 4 to 6 need a free-text elaboration.
    pub fn requires_text(self) -> bool {
        matches!(
            self,
            Justification::ExamplesInformative | Justification::NotCertain | Justification::Other
        )
    }

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Justification::CorrectAnswer => "correct_answer",
            Justification::AppropriatelyConfident => "appropriately_confident",
            Justification::LookedRightPlace => "looked_right_place",
            Justification::ExamplesInformative => "examples_informative",
            Justification::NotCertain => "not_certain",
            Justification::Other => "other",
        }
    }
}

/// A participant's answer for the current phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Submission {
    Diagnose {
        trial_index: usize,
        diagnosis: i64,
    },
    Examples {
        trial_index: usize,
    },
    Target {
        trial_index: usize,
    },
    Predict {
        trial_index: usize,
        prediction: i64,
    },
    View {
        trial_index: usize,
    },
    Certify {
        trial_index: usize,
        certify: bool,
        agree_with_ai: bool,
        justifications: Vec<Justification>,
        #[serde(default)]
        free_text: String,
    },
}

impl Submission {
    pub fn phase(&self) -> Phase {
        match self {
            Submission::Diagnose { .. } => Phase::Diagnose,
            Submission::Examples { .. } => Phase::Examples,
            Submission::Target { .. } => Phase::Target,
            Submission::Predict { .. } => Phase::Predict,
            Submission::View { .. } => Phase::View,
            Submission::Certify { .. } => Phase::Certify,
        }
    }

    pub fn trial_index(&self) -> usize {
        match self {
            Submission::Diagnose { trial_index, .. }
            | Submission::Examples { trial_index }
            | Submission::Target { trial_index }
            | Submission::Predict { trial_index, .. }
            | Submission::View { trial_index }
            | Submission::Certify { trial_index, .. } => *trial_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("out of order: expected {expected}, got trial {got_trial} phase {got_phase:?}")]
    OutOfOrder {
        expected: String,
        got_trial: usize,
        got_phase: Phase,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("session storage: {0}")]
    Storage(String),
}

impl From<io::Error> for SessionError {
    fn from(e: io::Error) -> Self {
        SessionError::Storage(e.to_string())
    }
}

/// One completed phase, as persisted and exported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub session_id: String,
    pub trial_index: usize,
    pub block: Block,
    pub block_trial_index: usize,
    pub phase: Phase,
    pub target_id: String,
    pub category: Category,
    pub ai_label: Label,
    pub ground_truth: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agree_with_ai: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub justifications: Vec<Justification>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub free_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_correct: Option<bool>,
    /// Milliseconds since the Unix epoch when the phase became current.
    pub shown_at_ms: u64,
    pub submitted_at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionLine {
    Header {
        schema_version: u32,
        session_id: String,
        seed: u64,
        created_at_ms: u64,
    },
    Record(PhaseRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    /// Whether the prediction fell on the same side of 50 as the AI label.
    pub correct: bool,
    pub ai_label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub trial_index: usize,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    pub done: bool,
}

/// A trial as the participant sees it in the current phase. Never carries
/// the target's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub trial_index: usize,
    pub total_trials: usize,
    pub block: Block,
    pub block_trial_index: usize,
    pub phase: Phase,
    pub bundle: String,
    pub target: TargetView,
    /// Whether the bundle's four examples (TP, TN, FP, FN) are shown.
    pub show_examples: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ai_judgement: Option<AiJudgement>,
    /// The participant's own diagnosis, echoed on the reminder screen.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reminder_diagnosis: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetView {
    pub id: String,
    pub show_saliency: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AiJudgement {
    pub label: Label,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextTrial {
    Trial(TrialView),
    Done,
}

fn rating(v: i64, what: &str) -> Result<u8, SessionError> {
    if !(0..=100).contains(&v) {
        return Err(SessionError::Validation(format!("{what} {v} outside 0..=100")));
    }
    if v == 50 {
        return Err(SessionError::Validation(format!("{what} of exactly 50 is not allowed")));
    }
    Ok(v as u8)
}

/// In-memory state of one participant.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub seed: u64,
    pub created_at_ms: u64,
    plan: StudyPlan,
    trial: usize,
    phase: usize,
    phase_shown_at_ms: u64,
    pending_diagnosis: Option<u8>,
    records: Vec<PhaseRecord>,
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        seed: u64,
        targets: &[StudyTarget],
        now_ms: u64,
    ) -> Result<Self, SessionError> {
        Ok(Self {
            id: id.into(),
            seed,
            created_at_ms: now_ms,
            plan: build_study_plan(targets, seed)?,
            trial: 0,
            phase: 0,
            phase_shown_at_ms: now_ms,
            pending_diagnosis: None,
            records: Vec::new(),
        })
    }

    pub fn plan(&self) -> &StudyPlan {
        &self.plan
    }

    pub fn records(&self) -> &[PhaseRecord] {
        &self.records
    }

    pub fn is_done(&self) -> bool {
        self.trial >= TOTAL_TRIALS
    }

    fn current(&self) -> Option<(&TrialSpec, Phase)> {
        let spec = *self.plan.trials().get(self.trial)?;
        Some((spec, Phase::sequence(spec.block)[self.phase]))
    }

    fn block_position(&self) -> usize {
        // Blocks are contiguous runs of eight.
        self.trial % crate::study::plan::TRIALS_PER_BLOCK
    }

    pub fn next_trial(&self) -> NextTrial {
        let Some((spec, phase)) = self.current() else {
            return NextTrial::Done;
        };
        let show_examples = spec.block.shows_examples()
            && matches!(phase, Phase::Examples | Phase::Target | Phase::Predict | Phase::View | Phase::Certify);
        NextTrial::Trial(TrialView {
            trial_index: self.trial,
            total_trials: TOTAL_TRIALS,
            block: spec.block,
            block_trial_index: self.block_position(),
            phase,
            bundle: spec.bundle.clone(),
            target: TargetView {
                id: spec.target_id.clone(),
                show_saliency: !matches!(phase, Phase::Diagnose | Phase::Examples),
            },
            show_examples,
            ai_judgement: spec.show_ai_judgement.then_some(AiJudgement {
                label: spec.ai_label,
                prob: spec.ai_prob,
            }),
            reminder_diagnosis: if phase == Phase::Predict {
                self.pending_diagnosis
            } else {
                None
            },
        })
    }

    /// Validates `sub` against the current trial and phase and, on success,
    /// returns the record to persist. State is not modified.
    pub fn prepare(&self, sub: &Submission, now_ms: u64) -> Result<(PhaseRecord, Ack), SessionError> {
        let Some((spec, phase)) = self.current() else {
            return Err(SessionError::OutOfOrder {
                expected: "nothing (session complete)".into(),
                got_trial: sub.trial_index(),
                got_phase: sub.phase(),
            });
        };
        if sub.trial_index() != self.trial || sub.phase() != phase {
            return Err(SessionError::OutOfOrder {
                expected: format!("trial {} phase {:?}", self.trial, phase),
                got_trial: sub.trial_index(),
                got_phase: sub.phase(),
            });
        }
        let mut rec = PhaseRecord {
            session_id: self.id.clone(),
            trial_index: self.trial,
            block: spec.block,
            block_trial_index: self.block_position(),
            phase,
            target_id: spec.target_id.clone(),
            category: spec.category,
            ai_label: spec.ai_label,
            ground_truth: spec.ground_truth,
            diagnosis: None,
            prediction: None,
            certify: None,
            agree_with_ai: None,
            justifications: Vec::new(),
            free_text: String::new(),
            feedback_correct: None,
            shown_at_ms: self.phase_shown_at_ms,
            submitted_at_ms: now_ms,
        };
        let mut feedback = None;
        match sub {
            Submission::Diagnose { diagnosis, .. } => {
                rec.diagnosis = Some(rating(*diagnosis, "diagnosis")?);
            }
            Submission::Predict { prediction, .. } => {
                let p = rating(*prediction, "prediction")?;
                let correct = (p > 50) == spec.ai_label.is_present();
                rec.prediction = Some(p);
                rec.diagnosis = self.pending_diagnosis;
                rec.feedback_correct = Some(correct);
                feedback = Some(Feedback {
                    correct,
                    ai_label: spec.ai_label,
                });
            }
            Submission::Certify {
                certify,
                agree_with_ai,
                justifications,
                free_text,
                ..
            } => {
                if justifications.is_empty() {
                    return Err(SessionError::Validation(
                        "select at least one justification".into(),
                    ));
                }
                let mut js = justifications.clone();
                js.sort();
                js.dedup();
                if js.iter().any(|j| j.requires_text()) && free_text.trim().is_empty() {
                    return Err(SessionError::Validation(
                        "the selected justification requires a free-text elaboration".into(),
                    ));
                }
                rec.certify = Some(*certify);
                rec.agree_with_ai = Some(*agree_with_ai);
                rec.justifications = js;
                rec.free_text = free_text.clone();
            }
            Submission::Examples { .. } | Submission::Target { .. } | Submission::View { .. } => {}
        }
        let last_phase = self.phase + 1 == Phase::sequence(spec.block).len();
        let ack = Ack {
            trial_index: self.trial,
            phase,
            feedback,
            done: last_phase && self.trial + 1 == TOTAL_TRIALS,
        };
        Ok((rec, ack))
    }

    /// Advances the phase pointer past `rec`, which must come from
    /// [`Session::prepare`] (or a replayed file) for the current phase.
    pub fn apply(&mut self, rec: PhaseRecord) -> Result<(), SessionError> {
        let Some((spec, phase)) = self.current() else {
            return Err(SessionError::Storage("record beyond end of session".into()));
        };
        if rec.trial_index != self.trial || rec.phase != phase {
            return Err(SessionError::Storage(format!(
                "record for trial {} phase {:?} does not match trial {} phase {:?}",
                rec.trial_index, rec.phase, self.trial, phase
            )));
        }
        let n_phases = Phase::sequence(spec.block).len();
        if rec.phase == Phase::Diagnose {
            self.pending_diagnosis = rec.diagnosis;
        }
        self.phase_shown_at_ms = rec.submitted_at_ms;
        self.records.push(rec);
        self.phase += 1;
        if self.phase == n_phases {
            self.phase = 0;
            self.trial += 1;
            self.pending_diagnosis = None;
        }
        Ok(())
    }

    pub fn record_response(&mut self, sub: &Submission, now_ms: u64) -> Result<Ack, SessionError> {
        let (rec, ack) = self.prepare(sub, now_ms)?;
        self.apply(rec)?;
        Ok(ack)
    }
}

pub fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn append_line(f: &mut File, line: &SessionLine) -> io::Result<()> {
    let mut s = serde_json::to_string(line).map_err(io::Error::other)?;
    s.push('\n');
    f.write_all(s.as_bytes())?;
    f.sync_data()
}

/// Reads every line of a session file. A trailing partial line (from an
/// interrupted write) is ignored.
pub fn read_session_file(path: &Path) -> Result<Vec<SessionLine>, SessionError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let n = lines.len();
    for (i, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(l) => out.push(l),
            Err(_) if i + 1 == n => break,
            Err(e) => {
                return Err(SessionError::Storage(format!("{}: line {}: {e}", path.display(), i + 1)))
            }
        }
    }
    Ok(out)
}

struct Live {
    session: Session,
    file: File,
}

/// Sessions on disk plus their in-memory state.
///
/// Each session has its own lock, so requests for one session are
/// serialized while different sessions proceed independently. Writers hold
/// the shared side of `snapshot`; exports take the exclusive side.
pub struct SessionStore {
    dir: PathBuf,
    targets: Vec<StudyTarget>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
    snapshot: RwLock<()>,
}

impl SessionStore {
    /// Opens `dir`, replaying any existing session files.
    pub fn open(dir: impl Into<PathBuf>, targets: Vec<StudyTarget>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            let lines = read_session_file(&path)?;
            let Some(SessionLine::Header {
                session_id,
                seed,
                created_at_ms,
                ..
            }) = lines.first().cloned()
            else {
                continue;
            };
            let mut session = Session::new(session_id.clone(), seed, &targets, created_at_ms)?;
            for line in lines.into_iter().skip(1) {
                if let SessionLine::Record(r) = line {
                    session.apply(r)?;
                }
            }
            let file = OpenOptions::new().append(true).open(&path)?;
            sessions.insert(session_id, Arc::new(Mutex::new(Live { session, file })));
        }
        Ok(Self {
            dir,
            targets,
            sessions: Mutex::new(sessions),
            snapshot: RwLock::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn targets(&self) -> &[StudyTarget] {
        &self.targets
    }

    fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Creates a session with a fresh opaque id. Returns `(id, seed)`.
    pub fn create(&self, seed: Option<u64>) -> Result<(String, u64), SessionError> {
        let _guard = self.snapshot.read().expect("snapshot lock");
        let seed = seed.unwrap_or_else(rand::random);
        let now = now_ms();
        let mut map = self.sessions.lock().expect("session map lock");
        let id = loop {
            let id = format!("{:032x}", rand::random::<u128>());
            if !map.contains_key(&id) {
                break id;
            }
        };
        let session = Session::new(id.clone(), seed, &self.targets, now)?;
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(self.path_for(&id))?;
        append_line(
            &mut file,
            &SessionLine::Header {
                schema_version: SESSION_SCHEMA_VERSION,
                session_id: id.clone(),
                seed,
                created_at_ms: now,
            },
        )?;
        map.insert(id.clone(), Arc::new(Mutex::new(Live { session, file })));
        Ok((id, seed))
    }

    fn live(&self, id: &str) -> Result<Arc<Mutex<Live>>, SessionError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn next_trial(&self, id: &str) -> Result<NextTrial, SessionError> {
        let live = self.live(id)?;
        let guard = live.lock().expect("session lock");
        Ok(guard.session.next_trial())
    }

    /// Validates, persists, then advances. Nothing changes if the write fails.
    pub fn record_response(&self, id: &str, sub: &Submission) -> Result<Ack, SessionError> {
        let live = self.live(id)?;
        let _guard = self.snapshot.read().expect("snapshot lock");
        let mut live = live.lock().expect("session lock");
        let (rec, ack) = live.session.prepare(sub, now_ms())?;
        append_line(&mut live.file, &SessionLine::Record(rec.clone()))?;
        live.session.apply(rec)?;
        Ok(ack)
    }

    /// Runs `f` while no session is being written.
    pub fn with_snapshot<T>(&self, f: impl FnOnce(&Path) -> T) -> T {
        let _guard = self.snapshot.write().expect("snapshot lock");
        f(&self.dir)
    }
}
