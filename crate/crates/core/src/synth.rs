//! Deterministic synthetic episodes with planted navigation heads.
//!
//! Planted heads attend along the ideal diagonal (a point mass at the ideal
//! token for each frame, with a fraction `noise` of it spilled onto the
//! neighbouring tokens) until the deviation onset, and near-uniformly from the
//! onset on. Every other head draws random rows throughout. Poses walk the
//! reference path one waypoint per step and leave it perpendicularly at the
//! onset.
//!
//! All randomness is a pure function of `(seed, episode, step, head, row,
//! token)`, so any element can be regenerated in isolation and parallel
//! generation equals serial generation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::labeler::EpisodeCategory;
use crate::trace::{wrap_angle, ActionKind, AttentionMatrix, AttentionRecord, EpisodeTrace, HeadId, Pose};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("configuration error: {0}")]
    Config(String),
}

/// Spacing between consecutive waypoints and the forward step length.
pub const STEP_LENGTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct SynthSpec {
    pub seed: u64,
    pub episodes: usize,
    /// Instruction tokens N.
    pub tokens: usize,
    /// History frames T.
    pub frames: usize,
    /// Steps per episode.
    pub steps: usize,
    pub anomaly_fraction: f64,
    /// Inclusive range the deviation onset is drawn from.
    pub onset_range: [usize; 2],
    /// Fraction of each planted peak spilled onto its neighbours.
    pub noise: f64,
    pub layers: u16,
    pub heads_per_layer: u16,
    /// Heads written to the traces; all heads when absent.
    pub stored_heads: Option<Vec<HeadId>>,
    pub planted_heads: Vec<HeadId>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            episodes: 400,
            tokens: 22,
            frames: 8,
            steps: 32,
            anomaly_fraction: 0.5,
            onset_range: [12, 24],
            noise: 0.1,
            layers: 8,
            heads_per_layer: 8,
            stored_heads: None,
            planted_heads: vec![HeadId::new(2, 5), HeadId::new(5, 1), HeadId::new(6, 3)],
        }
    }
}

impl SynthSpec {
    /// Stored heads in (layer, head) order.
    pub fn heads(&self) -> Vec<HeadId> {
        let mut heads = match &self.stored_heads {
            Some(h) => h.clone(),
            None => (0..self.layers)
                .flat_map(|l| (0..self.heads_per_layer).map(move |h| HeadId::new(l, h)))
                .collect(),
        };
        heads.sort();
        heads.dedup();
        heads
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::Config(m));
        if self.episodes < 2 {
            return err(format!("need at least 2 episodes, got {}", self.episodes));
        }
        if self.tokens < 2 || self.frames < 2 || self.steps < 2 {
            return err("tokens, frames and steps must each be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.noise) || !(0.0..=1.0).contains(&self.anomaly_fraction) {
            return err("noise and anomalyFraction must lie in [0, 1]".into());
        }
        let [lo, hi] = self.onset_range;
        if lo > hi || hi >= self.steps {
            return err(format!("onset range [{lo}, {hi}] outside an episode of {} steps", self.steps));
        }
        let heads = self.heads();
        if heads.is_empty() {
            return err("no stored heads".into());
        }
        if let Some(h) = heads.iter().find(|h| h.layer >= self.layers || h.head >= self.heads_per_layer) {
            return err(format!("stored head {h} outside the {}x{} model", self.layers, self.heads_per_layer));
        }
        if let Some(h) = self.planted_heads.iter().find(|h| !heads.contains(h)) {
            return err(format!("planted head {h} is not stored"));
        }
        let anomalous = self.anomalous_count();
        if anomalous == 0 || anomalous == self.episodes {
            return err(format!(
                "anomalyFraction {} leaves one class empty out of {} episodes",
                self.anomaly_fraction, self.episodes
            ));
        }
        Ok(())
    }

    fn anomalous_count(&self) -> usize {
        (self.anomaly_fraction * self.episodes as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

/// Category, onset and split of one episode index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodePlan {
    pub index: usize,
    pub onset: Option<usize>,
    pub split: Split,
}

impl EpisodePlan {
    pub fn category(&self) -> EpisodeCategory {
        match self.onset {
            None => EpisodeCategory::OnlyN,
            Some(0) => EpisodeCategory::OnlyA,
            Some(_) => EpisodeCategory::NtoA,
        }
    }
}

/// Seeded assignment of every episode index to a class and a split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub episodes: Vec<EpisodePlan>,
}

impl SplitPlan {
    pub fn new(spec: &SynthSpec) -> Result<Self, SynthError> {
        spec.validate()?;
        let seed = spec.seed;
        let mut order: Vec<usize> = (0..spec.episodes).collect();
        order.sort_by_key(|&i| (key(seed, &[Tag::Class as u64, i as u64]), i));
        let anomalous = spec.anomalous_count();
        let mut onset = vec![None; spec.episodes];
        let [lo, hi] = spec.onset_range;
        for &i in &order[..anomalous] {
            let span = (hi - lo + 1) as u64;
            onset[i] = Some(lo + (key(seed, &[Tag::Onset as u64, i as u64]) % span) as usize);
        }

        let mut split = vec![Split::Val; spec.episodes];
        for anomalous_class in [false, true] {
            let mut members: Vec<usize> = (0..spec.episodes).filter(|&i| onset[i].is_some() == anomalous_class).collect();
            members.sort_by_key(|&i| (key(seed, &[Tag::Split as u64, i as u64]), i));
            for &i in &members[..members.len() / 2] {
                split[i] = Split::Train;
            }
        }
        Ok(SplitPlan {
            episodes: (0..spec.episodes).map(|index| EpisodePlan { index, onset: onset[index], split: split[index] }).collect(),
        })
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.episodes.iter().filter(|p| p.split == split).map(|p| p.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthEpisode {
    pub trace: EpisodeTrace,
    pub gt_onset: Option<usize>,
    pub gt_category: EpisodeCategory,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(rename = "episodeId")]
    pub episode_id: String,
    #[serde(rename = "gtOnset")]
    pub gt_onset: Option<usize>,
    #[serde(rename = "gtCategory")]
    pub gt_category: EpisodeCategory,
    pub split: Split,
}

impl SynthEpisode {
    pub fn manifest_entry(&self) -> ManifestEntry {
        ManifestEntry {
            episode_id: self.trace.episode_id.clone(),
            gt_onset: self.gt_onset,
            gt_category: self.gt_category,
            split: self.split,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub train: Vec<SynthEpisode>,
    pub val: Vec<SynthEpisode>,
}

pub fn episode_id(index: usize) -> String {
    format!("ep{index:05}")
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Tag {
    Class = 1,
    Onset,
    Split,
    Heading,
    Side,
    Spill,
    Uniform,
    Random,
}

fn mix(mut z: u64) -> u64 {
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(seed: u64, parts: &[u64]) -> u64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    for &p in parts {
        h = mix(h.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ p);
    }
    h
}

/// Uniform in [0, 1).
fn unit(seed: u64, parts: &[u64]) -> f64 {
    (key(seed, parts) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn ideal_token(k: usize, frames: usize, tokens: usize) -> usize {
    ((k * (tokens - 1)) as f64 / (frames - 1) as f64).round() as usize
}

fn head_code(h: HeadId) -> u64 {
    ((h.layer as u64) << 16) | h.head as u64
}

fn planted_matrix(spec: &SynthSpec, index: usize, step: usize, head: HeadId) -> AttentionMatrix {
    let (t, n) = (spec.frames, spec.tokens);
    let mut m = AttentionMatrix::zeros(t, n);
    for k in 0..t {
        let peak = ideal_token(k, t, n);
        let row = m.row_mut(k);
        row[peak] = (1.0 - spec.noise) as f32;
        let spill = spec.noise;
        if spill > 0.0 {
            let u = unit(spec.seed, &[Tag::Spill as u64, index as u64, step as u64, head_code(head), k as u64]);
            match (peak > 0, peak + 1 < n) {
                (true, true) => {
                    row[peak - 1] += (spill * u) as f32;
                    row[peak + 1] += (spill * (1.0 - u)) as f32;
                }
                (true, false) => row[peak - 1] += spill as f32,
                (false, true) => row[peak + 1] += spill as f32,
                (false, false) => row[peak] += spill as f32,
            }
        }
    }
    m
}

fn dispersed_matrix(spec: &SynthSpec, index: usize, step: usize, head: HeadId) -> AttentionMatrix {
    let (t, n) = (spec.frames, spec.tokens);
    let mut data = Vec::with_capacity(t * n);
    for k in 0..t {
        for j in 0..n {
            let u = unit(spec.seed, &[Tag::Uniform as u64, index as u64, step as u64, head_code(head), k as u64, j as u64]);
            data.push((1.0 + 0.2 * (u - 0.5)) as f32);
        }
    }
    AttentionMatrix::new(t, n, data)
}

fn random_matrix(spec: &SynthSpec, index: usize, step: usize, head: HeadId) -> AttentionMatrix {
    let (t, n) = (spec.frames, spec.tokens);
    let mut data = Vec::with_capacity(t * n);
    for k in 0..t {
        for j in 0..n {
            let u = unit(spec.seed, &[Tag::Random as u64, index as u64, step as u64, head_code(head), k as u64, j as u64]);
            // strictly positive so no row is ever empty
            data.push((1.0 - u) as f32);
        }
    }
    AttentionMatrix::new(t, n, data)
}

fn build_episode(spec: &SynthSpec, plan: &EpisodePlan, heads: &[HeadId]) -> SynthEpisode {
    let index = plan.index;
    let heading = 2.0 * std::f64::consts::PI * unit(spec.seed, &[Tag::Heading as u64, index as u64]);
    let side = if unit(spec.seed, &[Tag::Side as u64, index as u64]) < 0.5 { 1.0 } else { -1.0 };
    let (dir, perp) = ((heading.cos(), heading.sin()), (-side * heading.sin(), side * heading.cos()));
    let path: Vec<[f64; 2]> =
        (0..spec.steps).map(|i| [i as f64 * STEP_LENGTH * dir.0, i as f64 * STEP_LENGTH * dir.1]).collect();
    let along = wrap_angle(heading) as f32;
    let away = wrap_angle(perp.1.atan2(perp.0)) as f32;

    let records = (0..spec.steps)
        .map(|step| {
            let deviating = plan.onset.is_some_and(|o| step >= o);
            let pose = match plan.onset {
                Some(o) if step > o => {
                    let off = (step - o) as f64 * STEP_LENGTH;
                    let base = path[o];
                    Pose::new((base[0] + off * perp.0) as f32, (base[1] + off * perp.1) as f32, 0.0, away)
                }
                _ => Pose::new(path[step][0] as f32, path[step][1] as f32, 0.0, along),
            };
            let mut matrices = BTreeMap::new();
            for &h in heads {
                let m = if spec.planted_heads.contains(&h) {
                    if deviating {
                        dispersed_matrix(spec, index, step, h)
                    } else {
                        planted_matrix(spec, index, step, h)
                    }
                } else {
                    random_matrix(spec, index, step, h)
                };
                matrices.insert(h, m);
            }
            AttentionRecord { step: step as u32, heads: matrices, pose, action: ActionKind::Forward(STEP_LENGTH as f32) }
        })
        .collect();

    SynthEpisode {
        trace: EpisodeTrace {
            episode_id: episode_id(index),
            tokens: spec.tokens,
            frames: spec.frames,
            layer_count: spec.layers,
            head_count: spec.heads_per_layer,
            stored_heads: heads.to_vec(),
            records,
            reference_path: Some(path),
        },
        gt_onset: plan.onset,
        gt_category: plan.category(),
        split: plan.split,
    }
}

/// Generates episode `index` of the dataset described by `spec`.
pub fn gen_episode(spec: &SynthSpec, index: usize) -> Result<SynthEpisode, SynthError> {
    let plan = SplitPlan::new(spec)?;
    gen_planned(spec, &plan, index)
}

/// Generates one episode from a precomputed plan.
pub fn gen_planned(spec: &SynthSpec, plan: &SplitPlan, index: usize) -> Result<SynthEpisode, SynthError> {
    let p = plan
        .episodes
        .get(index)
        .ok_or_else(|| SynthError::Config(format!("episode {index} outside a dataset of {}", plan.episodes.len())))?;
    Ok(build_episode(spec, p, &spec.heads()))
}

/// Generates the full dataset split 50/50 per category.
pub fn gen_dataset(spec: &SynthSpec, exec: Exec) -> Result<SynthDataset, SynthError> {
    let plan = SplitPlan::new(spec)?;
    let heads = spec.heads();
    let all = exec.map(&plan.episodes, |p| build_episode(spec, p, &heads));
    let (train, val) = all.into_iter().partition(|e| e.split == Split::Train);
    Ok(SynthDataset { train, val })
}
