//! Training-free path deviation detection for vision-language navigation agents.
//!
//! The crate scores the attention heads of a frozen navigation model for
//! spatiotemporal alignment and anomaly sensitivity, monitors the selected
//! heads' entropy online to flag deviations, and validates rollback to the
//! last safe checkpoint in a small skid-steer simulator.
//!
//! Pipeline, in module order:
//!
//! - [`trace`]: the ATRC binary episode-trace format.
//! - [`labeler`]: ground-truth Normal/Anomaly phase labels from a reference path.
//! - [`heads`]: alignment scoring, Cohen's d sensitivity and head selection.
//! - [`detector`]: streaming relative-entropy detector with safe checkpoints.
//! - [`eval`]: episode/step metrics, heuristic baselines and the grid sweep.
//! - [`synth`]: deterministic synthetic traces with planted navigation heads.
//! - [`recovery`]: costmap, smoother, potential-field controller and rollback loop.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel` feature
//! (on by default) they run on rayon, otherwise sequentially.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detector;
pub mod eval;
pub mod exec;
pub mod heads;
pub mod labeler;
pub mod recovery;
pub mod synth;
pub mod trace;

pub use exec::Exec;
pub use trace::{ActionKind, AttentionMatrix, AttentionRecord, EpisodeTrace, HeadId, Pose};
