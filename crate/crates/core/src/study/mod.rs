//! User-study protocol: plans, sessions and response export.

pub mod export;
pub mod pairing;
pub mod plan;
pub mod session;

pub use export::{export_sessions, write_export, Export, ExportRow};
pub use pairing::{pair_by_l1, PairingError};
pub use plan::{build_study_plan, Block, PlanError, StudyPlan, StudyTarget, TrialSpec};
pub use session::{
    Ack, Feedback, Justification, NextTrial, Phase, PhaseRecord, Session, SessionError, SessionStore, Submission,
    TrialView,
};
