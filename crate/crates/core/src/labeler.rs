//! Ground-truth Normal/Anomaly phase labels from a reference path.
//!
//! Each step tracks the closest forward waypoint (the index never regresses)
//! and the distance delta to it. A step's action is judged by the pose it
//! leads to: step `t` deviates when it is translational and `Δd_{t+1} > 0`
//! without reaching a new waypoint, and is on-track when translational with
//! `Δd_{t+1} <= 0` or a waypoint advance. Rotations, stops and the final step
//! (no outcome yet) are neutral for both counters.
//!
//! The machine starts Normal. `p` consecutive deviating steps (neutral steps
//! skipped) latch Anomaly, labelled back to the first step of that run.
//! Once in Anomaly, `p` consecutive on-track steps truncate the episode just
//! before that run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{ActionKind, EpisodeTrace, Pose};

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("label invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelerConfig {
    pub patience: usize,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        LabelerConfig { patience: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub index: usize,
    pub last_distance: f64,
}

impl TargetState {
    pub fn initial() -> Self {
        TargetState { index: 0, last_distance: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    #[serde(rename = "N")]
    Normal,
    #[serde(rename = "A")]
    Anomaly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EpisodeCategory {
    OnlyN,
    OnlyA,
    NtoA,
}

impl EpisodeCategory {
    /// True when the episode contains any Anomaly step.
    pub fn is_anomalous(self) -> bool {
        self != EpisodeCategory::OnlyN
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEpisode {
    /// Labels for the retained steps (all steps unless truncated).
    pub labels: Vec<PhaseLabel>,
    pub category: EpisodeCategory,
    /// Δd_t for every step of the original episode.
    pub delta_distances: Vec<f64>,
    /// Target waypoint index per step of the original episode.
    pub target_indices: Vec<usize>,
    /// Last retained step when the episode was truncated.
    pub truncated_at: Option<usize>,
}

impl LabeledEpisode {
    /// First Anomaly step, if any.
    pub fn onset(&self) -> Option<usize> {
        self.labels.iter().position(|l| *l == PhaseLabel::Anomaly)
    }
}

/// JSON sidecar written next to each trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSidecar {
    #[serde(rename = "episodeId")]
    pub episode_id: String,
    pub labels: Vec<PhaseLabel>,
    pub category: EpisodeCategory,
    #[serde(rename = "truncatedAt")]
    pub truncated_at: Option<usize>,
}

impl LabelSidecar {
    pub fn new(episode_id: &str, labeled: &LabeledEpisode) -> Self {
        LabelSidecar {
            episode_id: episode_id.to_string(),
            labels: labeled.labels.clone(),
            category: labeled.category,
            truncated_at: labeled.truncated_at,
        }
    }
}

/// Advances the target to the closest waypoint at or after the current index.
/// Ties go to the lowest index.
pub fn update_target(state: TargetState, pose: &Pose, path: &[[f64; 2]]) -> Result<TargetState, LabelError> {
    if path.is_empty() {
        return Err(LabelError::Config("reference path is empty".into()));
    }
    let start = state.index.min(path.len() - 1);
    let mut best = (start, pose.distance_to(path[start]));
    for (i, w) in path.iter().enumerate().skip(start + 1) {
        let d = pose.distance_to(*w);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(TargetState { index: best.0, last_distance: best.1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Deviating,
    OnTrack,
    Neutral,
}

fn outcomes(actions: &[ActionKind], delta: &[f64], advanced: &[bool]) -> Vec<Outcome> {
    (0..actions.len())
        .map(|t| {
            if !actions[t].is_translational() || t + 1 >= actions.len() {
                Outcome::Neutral
            } else if !advanced[t + 1] && delta[t + 1] > 0.0 {
                Outcome::Deviating
            } else {
                Outcome::OnTrack
            }
        })
        .collect()
}

/// Labels one episode. Requires a reference path.
pub fn label_episode(trace: &EpisodeTrace, config: &LabelerConfig) -> Result<LabeledEpisode, LabelError> {
    let path = trace
        .reference_path
        .as_deref()
        .ok_or_else(|| LabelError::Config(format!("episode {} has no reference path", trace.episode_id)))?;
    let poses = trace.poses();
    let actions = trace.actions();
    label_walk(&poses, &actions, path, config)
}

/// Labels a pose/action sequence against a reference path.
pub fn label_walk(
    poses: &[Pose],
    actions: &[ActionKind],
    path: &[[f64; 2]],
    config: &LabelerConfig,
) -> Result<LabeledEpisode, LabelError> {
    if config.patience == 0 {
        return Err(LabelError::Config("patience must be at least 1".into()));
    }
    if poses.len() != actions.len() {
        return Err(LabelError::Config("pose and action sequences differ in length".into()));
    }
    if poses.is_empty() {
        return Err(LabelError::Config("episode has no steps".into()));
    }
    let n = poses.len();
    let mut target_indices = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut advanced = Vec::with_capacity(n);
    let mut state = update_target(TargetState::initial(), &poses[0], path)?;
    target_indices.push(state.index);
    delta.push(0.0);
    advanced.push(false);
    for pose in &poses[1..] {
        let next = update_target(state, pose, path)?;
        if next.index > state.index {
            delta.push(0.0);
            advanced.push(true);
        } else {
            delta.push(next.last_distance - state.last_distance);
            advanced.push(false);
        }
        target_indices.push(next.index);
        state = next;
    }

    let outcome = outcomes(actions, &delta, &advanced);
    let p = config.patience;
    let mut onset = None;
    let mut truncated_at = None;
    let mut run_start = 0;
    let mut run_len = 0;
    for (t, o) in outcome.iter().enumerate() {
        match (onset.is_some(), o) {
            (_, Outcome::Neutral) => continue,
            (false, Outcome::Deviating) | (true, Outcome::OnTrack) => {
                if run_len == 0 {
                    run_start = t;
                }
                run_len += 1;
            }
            _ => run_len = 0,
        }
        if run_len == p {
            if onset.is_none() {
                onset = Some(run_start);
                run_len = 0;
            } else {
                // run_start > onset since the run began after the latch
                truncated_at = Some(run_start - 1);
                break;
            }
        }
    }

    let retained = truncated_at.map_or(n, |t| t + 1);
    let labels: Vec<PhaseLabel> = (0..retained)
        .map(|t| match onset {
            Some(o) if t >= o => PhaseLabel::Anomaly,
            _ => PhaseLabel::Normal,
        })
        .collect();
    let category = categorize_episode(&labels)?;
    Ok(LabeledEpisode { labels, category, delta_distances: delta, target_indices, truncated_at })
}

/// OnlyN / OnlyA / NtoA from a label sequence. An Anomaly followed by a
/// Normal label is an upstream bug.
pub fn categorize_episode(labels: &[PhaseLabel]) -> Result<EpisodeCategory, LabelError> {
    if labels.is_empty() {
        return Err(LabelError::Config("empty label sequence".into()));
    }
    if let Some(i) = labels.windows(2).position(|w| w[0] == PhaseLabel::Anomaly && w[1] == PhaseLabel::Normal) {
        return Err(LabelError::Invariant(format!("Normal label at step {} follows Anomaly", i + 1)));
    }
    let has_n = labels[0] == PhaseLabel::Normal;
    let has_a = labels[labels.len() - 1] == PhaseLabel::Anomaly;
    Ok(match (has_n, has_a) {
        (true, false) => EpisodeCategory::OnlyN,
        (false, true) => EpisodeCategory::OnlyA,
        _ => EpisodeCategory::NtoA,
    })
}
