//! Streaming path-deviation detector.
//!
//! Each step the mean normalized attention entropy `E_t` of the navigation
//! heads is compared with its rolling mean over the previous `W` steps:
//!
//! ```text
//! R_t = E_t / (mean(E_{t-W} .. E_{t-1}) + eps)
//! ```
//!
//! Anomaly latches after `P` consecutive steps with `R_t > tau`. While the
//! episode is still Normal (and, by default, `R_t <= tau`) the detector keeps
//! a safe checkpoint of pose, visual history, entropy buffer and attention.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labeler::PhaseLabel;
use crate::trace::{AttentionMatrix, AttentionRecord, EpisodeTrace, HeadId, Pose};

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("attention row has no mass")]
    DegenerateRow,
    #[error("head {0} missing from record")]
    MissingHead(HeadId),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("no step has been processed yet")]
    EmptyState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub heads: Vec<HeadId>,
    /// Rolling window length W.
    pub window: usize,
    /// Threshold tau on the relative entropy score.
    pub threshold: f64,
    /// Consecutive exceedances P needed to latch Anomaly.
    pub patience: usize,
    pub epsilon: f64,
    /// Refresh the checkpoint only on sub-threshold Normal steps.
    #[serde(default = "yes")]
    pub refresh_requires_subthreshold: bool,
}

fn yes() -> bool {
    true
}

impl DetectorConfig {
    pub fn new(heads: Vec<HeadId>, window: usize, patience: usize, threshold: f64) -> Self {
        DetectorConfig { heads, window, threshold, patience, epsilon: 1e-8, refresh_requires_subthreshold: true }
    }

    /// Deployed configuration: three heads, W=10, P=9, tau=0.95.
    pub fn deployment() -> Self {
        Self::new(crate::heads::DEPLOYMENT_HEADS.to_vec(), 10, 9, 0.95)
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.heads.is_empty() {
            return Err(DetectorError::Config("at least one head required".into()));
        }
        if self.window == 0 || self.patience == 0 {
            return Err(DetectorError::Config("window and patience must be at least 1".into()));
        }
        if !(self.threshold > 0.0) || !(self.epsilon > 0.0) {
            return Err(DetectorError::Config("threshold and epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Normalized Shannon entropy of a nonnegative row, in [0, 1].
pub fn frame_entropy(row: &[f32]) -> Result<f64, DetectorError> {
    let total: f64 = row.iter().map(|&v| v as f64).sum();
    if !(total > 0.0) {
        return Err(DetectorError::DegenerateRow);
    }
    if row.len() < 2 {
        return Ok(0.0);
    }
    let h: f64 = row
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v as f64 / total;
            -p * p.ln()
        })
        .sum();
    Ok((h / (row.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Frame-averaged entropy of one head's matrix.
pub fn head_entropy(matrix: &AttentionMatrix) -> Result<f64, DetectorError> {
    let mut sum = 0.0;
    for row in matrix.iter_rows() {
        sum += frame_entropy(row)?;
    }
    Ok(sum / matrix.rows() as f64)
}

/// `E_t`: mean over `heads` of the frame-averaged entropy.
pub fn step_entropy(record: &AttentionRecord, heads: &[HeadId]) -> Result<f64, DetectorError> {
    if heads.is_empty() {
        return Err(DetectorError::Config("empty head set".into()));
    }
    let mut sum = 0.0;
    for &h in heads {
        sum += head_entropy(record.head(h).ok_or(DetectorError::MissingHead(h))?)?;
    }
    Ok(sum / heads.len() as f64)
}

/// Rollback target captured on trusted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafeCheckpoint {
    pub step: u32,
    pub pose: Pose,
    #[serde(rename = "visualHistoryIds")]
    pub visual_history: Vec<u64>,
    #[serde(rename = "entropyBuffer")]
    pub entropy_buffer: Vec<f64>,
    pub attention: Vec<HeadAttention>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadAttention {
    #[serde(flatten)]
    pub head: HeadId,
    pub matrix: AttentionMatrix,
}

/// What the detector keeps from a step besides its entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct StepContext {
    pub step: u32,
    pub pose: Pose,
    pub frame_ids: Vec<u64>,
    pub attention: BTreeMap<HeadId, AttentionMatrix>,
}

impl StepContext {
    /// Context of a trace record; frames are identified by the step at which
    /// they were observed.
    pub fn from_record(record: &AttentionRecord, frames: usize, heads: &[HeadId]) -> Self {
        let t = record.step as u64;
        let first = (t + 1).saturating_sub(frames as u64);
        StepContext {
            step: record.step,
            pose: record.pose,
            frame_ids: (first..=t).collect(),
            attention: heads.iter().filter_map(|h| record.head(*h).map(|m| (*h, m.clone()))).collect(),
        }
    }
}

/// One emitted detector line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutput {
    pub step: u32,
    #[serde(rename = "E")]
    pub entropy: f64,
    /// Relative entropy score; absent during warm-up.
    #[serde(rename = "R")]
    pub ratio: Option<f64>,
    #[serde(rename = "exceedCount")]
    pub exceed_count: usize,
    pub phase: PhaseLabel,
}

/// Scalar core of the detector: rolling buffer, exceedance counter and latch.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMonitor {
    window: usize,
    threshold: f64,
    patience: usize,
    epsilon: f64,
    buffer: VecDeque<f64>,
    exceed_count: usize,
    phase: PhaseLabel,
    steps_seen: usize,
}

/// Result of feeding one entropy value to a [`RatioMonitor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorStep {
    pub ratio: Option<f64>,
    pub exceed_count: usize,
    pub phase: PhaseLabel,
    /// The step is trusted enough to refresh the checkpoint.
    pub refresh: bool,
}

impl RatioMonitor {
    pub fn new(window: usize, patience: usize, threshold: f64, epsilon: f64) -> Self {
        RatioMonitor {
            window,
            threshold,
            patience,
            epsilon,
            buffer: VecDeque::with_capacity(window + 1),
            exceed_count: 0,
            phase: PhaseLabel::Normal,
            steps_seen: 0,
        }
    }

    pub fn phase(&self) -> PhaseLabel {
        self.phase
    }

    pub fn steps_seen(&self) -> usize {
        self.steps_seen
    }

    /// Entropies of the last `W` steps, oldest first.
    pub fn buffer(&self) -> impl ExactSizeIterator<Item = &f64> {
        self.buffer.iter()
    }

    pub fn push(&mut self, entropy: f64, subthreshold_refresh: bool) -> Result<MonitorStep, DetectorError> {
        if !entropy.is_finite() {
            return Err(DetectorError::Input(format!("entropy {entropy} is not finite")));
        }
        let ratio = if self.steps_seen < self.window {
            None
        } else {
            let mean = self.buffer.iter().sum::<f64>() / self.window as f64;
            Some(entropy / (mean + self.epsilon))
        };
        let refresh = match ratio {
            None => self.phase == PhaseLabel::Normal,
            Some(r) => {
                let exceeded = r > self.threshold;
                if exceeded {
                    self.exceed_count = (self.exceed_count + 1).min(self.patience);
                    if self.exceed_count == self.patience {
                        self.phase = PhaseLabel::Anomaly;
                    }
                } else {
                    self.exceed_count = 0;
                }
                self.phase == PhaseLabel::Normal && (!subthreshold_refresh || !exceeded)
            }
        };
        self.buffer.push_back(entropy);
        if self.buffer.len() > self.window {
            self.buffer.pop_front();
        }
        self.steps_seen += 1;
        Ok(MonitorStep { ratio, exceed_count: self.exceed_count, phase: self.phase, refresh })
    }
}

/// Full detector state for one episode stream.
#[derive(Debug, Clone)]
pub struct DetectorState {
    config: DetectorConfig,
    monitor: RatioMonitor,
    checkpoint: Option<SafeCheckpoint>,
}

impl DetectorState {
    pub fn new(config: DetectorConfig) -> Result<Self, DetectorError> {
        config.validate()?;
        let monitor = RatioMonitor::new(config.window, config.patience, config.threshold, config.epsilon);
        Ok(DetectorState { config, monitor, checkpoint: None })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn phase(&self) -> PhaseLabel {
        self.monitor.phase()
    }

    pub fn steps_seen(&self) -> usize {
        self.monitor.steps_seen()
    }

    /// Feeds one step. The context is stored as the new checkpoint when the
    /// step qualifies.
    pub fn update(&mut self, entropy: f64, context: StepContext) -> Result<StepOutput, DetectorError> {
        let snapshot: Vec<f64> = self.monitor.buffer().copied().collect();
        let out = self.monitor.push(entropy, self.config.refresh_requires_subthreshold)?;
        if out.refresh {
            self.checkpoint = Some(SafeCheckpoint {
                step: context.step,
                pose: context.pose,
                visual_history: context.frame_ids,
                entropy_buffer: snapshot,
                attention: context.attention.into_iter().map(|(head, matrix)| HeadAttention { head, matrix }).collect(),
            });
        }
        Ok(StepOutput {
            step: context.step,
            entropy,
            ratio: out.ratio,
            exceed_count: out.exceed_count,
            phase: out.phase,
        })
    }

    /// Computes `E_t` from the record and updates.
    pub fn observe(&mut self, record: &AttentionRecord, frames: usize) -> Result<StepOutput, DetectorError> {
        let entropy = step_entropy(record, &self.config.heads)?;
        let context = StepContext::from_record(record, frames, &self.config.heads);
        self.update(entropy, context)
    }

    /// Most recent safe checkpoint; frozen once Anomaly latches.
    pub fn current_checkpoint(&self) -> Result<&SafeCheckpoint, DetectorError> {
        self.checkpoint.as_ref().ok_or(DetectorError::EmptyState)
    }
}

/// Runs the detector over a whole trace.
pub fn detect_trace(
    trace: &EpisodeTrace,
    config: &DetectorConfig,
) -> Result<(Vec<StepOutput>, Option<SafeCheckpoint>), DetectorError> {
    let mut state = DetectorState::new(config.clone())?;
    let outputs = trace
        .records
        .iter()
        .map(|r| state.observe(r, trace.frames))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((outputs, state.checkpoint))
}

/// Per-step phases from a precomputed entropy series (no checkpointing).
pub fn phases_from_entropies(
    entropies: &[f64],
    window: usize,
    patience: usize,
    threshold: f64,
    epsilon: f64,
) -> Result<Vec<PhaseLabel>, DetectorError> {
    let mut m = RatioMonitor::new(window, patience, threshold, epsilon);
    entropies.iter().map(|&e| m.push(e, true).map(|s| s.phase)).collect()
}
