//! Out-of-distribution detection on frozen pre-trained embeddings.
//!
//! The crate covers the whole post-hoc workflow: embedding matrices and
//! manifests on disk ([`store`]), classifier heads trained on frozen
//! features ([`probe`]), eleven OOD scores behind one fit/score contract
//! ([`scorers`]), AUROC-based reporting ([`evaluator`]) and synthetic
//! feature-space scenarios with concentrated and scattered OOD data
//! ([`synth`]). [`cli`] backs the `oodkit` binary.

pub mod cli;
pub mod error;
pub mod evaluator;
pub mod pipeline;
pub mod probe;
pub mod scorers;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use evaluator::{auroc, fpr_at_tpr, EvalReport};
pub use pipeline::ProbeKind;
pub use probe::{LinearHead, MlpHead, ProbeConfig, ProbeHead};
pub use scorers::{fit, score, FittedScorer, Method, ScoreVector, ScorerParams};
pub use store::{DatasetSplit, EmbeddingMatrix, LabelVector, Manifest, Role};
pub use synth::{generate_scenario, Scenario, ScenarioConfig};
