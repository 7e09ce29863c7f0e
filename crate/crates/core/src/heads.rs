//! Navigation-head scoring and selection.
//!
//! A head is first scored for spatiotemporal alignment on ideal episodes:
//! frame energy uniformity, focus sharpness, proximity of the attention
//! center of mass to the ideal diagonal, and smoothness of its forward
//! shift. The best `M` candidates are then ranked by how strongly their
//! focus sharpness separates Normal from Anomaly steps (Cohen's d), and the
//! top `K` form the navigation head set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::labeler::{EpisodeCategory, LabeledEpisode, PhaseLabel};
use crate::trace::{AttentionMatrix, EpisodeTrace, HeadId};

#[derive(Debug, Error, PartialEq)]
pub enum HeadError {
    #[error("attention row has no mass")]
    DegenerateRow,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("zero pooled variance with different means ({mean_normal} vs {mean_anomaly})")]
    DegenerateVariance { mean_normal: f64, mean_anomaly: f64 },
    #[error("head {head}: {source}")]
    Head { head: HeadId, source: Box<HeadError> },
}

/// Per-frame statistics of one attention row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    pub energy: f64,
    /// Center of mass in token-index units.
    pub center: f64,
    pub spread: f64,
    /// Probability mass within the peak window around the center.
    pub window_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentComponents {
    pub uniform: f64,
    pub peak: f64,
    pub diag: f64,
    pub shift: f64,
}

impl AlignmentComponents {
    /// `uniform * peak * (lambda * diag + (1 - lambda) * shift)`.
    pub fn combined(&self, lambda: f64) -> f64 {
        self.uniform * self.peak * (lambda * self.diag + (1.0 - lambda) * self.shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadScore {
    #[serde(flatten)]
    pub head: HeadId,
    #[serde(rename = "iDiag")]
    pub i_diag: f64,
    #[serde(rename = "cohensD")]
    pub cohens_d: f64,
    #[serde(rename = "nN")]
    pub n_normal: usize,
    #[serde(rename = "nA")]
    pub n_anomaly: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    /// Weight of diagonal proximity against shift smoothness.
    pub lambda: f64,
    /// Peak window half-width in tokens; `None` means `max(1, round(0.05 N))`.
    pub window: Option<usize>,
    /// Candidate pool size `M` taken by alignment score.
    pub pool_size: usize,
    /// Final head count `K`.
    pub k: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { lambda: 0.5, window: None, pool_size: 32, k: 3 }
    }
}

impl SelectionConfig {
    pub fn window_for(&self, tokens: usize) -> usize {
        self.window.unwrap_or_else(|| ((0.05 * tokens as f64).round() as usize).max(1))
    }

    fn check(&self) -> Result<(), HeadError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(HeadError::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.k == 0 || self.k > self.pool_size {
            return Err(HeadError::Config(format!("need 1 <= K <= M, got K={} M={}", self.k, self.pool_size)));
        }
        Ok(())
    }
}

/// Standard deviation of the discrete uniform distribution over `n` positions.
pub fn max_spread(n: usize) -> f64 {
    let n = n as f64;
    ((n * n - 1.0) / 12.0).sqrt()
}

/// Statistics of a single row with peak window half-width `window`.
pub fn row_stats(row: &[f32], window: usize) -> Result<FrameStats, HeadError> {
    let energy: f64 = row.iter().map(|&v| v as f64).sum();
    if !(energy > 0.0) {
        return Err(HeadError::DegenerateRow);
    }
    let center: f64 = row.iter().enumerate().map(|(j, &v)| j as f64 * v as f64).sum::<f64>() / energy;
    let variance: f64 = row
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let d = j as f64 - center;
            v as f64 * d * d
        })
        .sum::<f64>()
        / energy;
    let r = window as f64;
    let lo = (center - r).ceil().max(0.0) as usize;
    let hi = ((center + r).floor() as usize).min(row.len() - 1);
    let window_mass = if lo <= hi { row[lo..=hi].iter().map(|&v| v as f64).sum::<f64>() / energy } else { 0.0 };
    Ok(FrameStats { energy, center, spread: variance.max(0.0).sqrt(), window_mass: window_mass.min(1.0) })
}

/// Per-frame statistics of a T×N matrix; all-zero rows yield `DegenerateRow`.
pub fn frame_stats(matrix: &AttentionMatrix, window: usize) -> Vec<Result<FrameStats, HeadError>> {
    matrix.iter_rows().map(|row| row_stats(row, window)).collect()
}

/// Mean focus sharpness over the frames; degenerate frames contribute 0.
/// Defined for any T >= 1.
pub fn peak_score(matrix: &AttentionMatrix, window: usize) -> f64 {
    let sigma_max = max_spread(matrix.cols());
    let t = matrix.rows() as f64;
    frame_stats(matrix, window)
        .into_iter()
        .map(|s| s.map_or(0.0, |s| peak_term(&s, sigma_max)))
        .sum::<f64>()
        / t
}

// Rows split between the two ends spread wider than a uniform row, so the
// sharpness half is floored at 0 to keep the term in [0, 1].
fn peak_term(s: &FrameStats, sigma_max: f64) -> f64 {
    0.5 * ((1.0 - s.spread / sigma_max).max(0.0) + s.window_mass)
}

/// The four alignment components of one attention matrix.
pub fn alignment_components(matrix: &AttentionMatrix, config: &SelectionConfig) -> Result<AlignmentComponents, HeadError> {
    let (t, n) = (matrix.rows(), matrix.cols());
    if t < 2 || n < 2 {
        return Err(HeadError::Config(format!("alignment needs T >= 2 and N >= 2, got {t}x{n}")));
    }
    let window = config.window_for(n);
    let stats = frame_stats(matrix, window);
    let sigma_max = max_spread(n);
    let span = (n - 1) as f64;
    let ideal = |k: usize| k as f64 * span / (t - 1) as f64;
    let tf = t as f64;

    let max_energy = stats.iter().filter_map(|s| s.as_ref().ok()).map(|s| s.energy).fold(0.0, f64::max);
    let uniform = if max_energy > 0.0 {
        stats.iter().map(|s| s.as_ref().map_or(0.0, |s| s.energy / max_energy)).sum::<f64>() / tf
    } else {
        0.0
    };
    let peak = stats.iter().map(|s| s.as_ref().map_or(0.0, |s| peak_term(s, sigma_max))).sum::<f64>() / tf;
    let diag = stats
        .iter()
        .enumerate()
        .map(|(k, s)| s.as_ref().map_or(0.0, |s| 1.0 - (s.center - ideal(k)).abs() / span))
        .sum::<f64>()
        / tf;
    let ideal_step = span / (t - 1) as f64;
    let shift = stats
        .windows(2)
        .map(|w| match (&w[0], &w[1]) {
            (Ok(prev), Ok(cur)) => {
                let dc = cur.center - prev.center;
                let forward = if dc > 0.0 { 1.0 } else { 0.0 };
                let ratio = dc / ideal_step - 1.0;
                forward + (-0.5 * ratio * ratio).exp()
            }
            _ => 0.0,
        })
        .sum::<f64>()
        / (2.0 * (t - 1) as f64);

    Ok(AlignmentComponents { uniform, peak, diag, shift })
}

/// Alignment score of one head: mean combined score over the final-step
/// matrices of the ideal episodes.
pub fn i_diag<'a, I>(final_matrices: I, config: &SelectionConfig) -> Result<f64, HeadError>
where
    I: IntoIterator<Item = &'a AttentionMatrix>,
{
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in final_matrices {
        sum += alignment_components(m, config)?.combined(config.lambda);
        count += 1;
    }
    if count == 0 {
        return Err(HeadError::Config("no ideal episodes".into()));
    }
    Ok(sum / count as f64)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Effect size `|mean_N - mean_A| / pooled_sd` with sample variances.
pub fn cohens_d(normal: &[f64], anomaly: &[f64]) -> Result<f64, HeadError> {
    if normal.len() < 2 || anomaly.len() < 2 {
        return Err(HeadError::Config(format!(
            "Cohen's d needs at least 2 samples per group, got {} and {}",
            normal.len(),
            anomaly.len()
        )));
    }
    let (mn, vn) = mean_var(normal);
    let (ma, va) = mean_var(anomaly);
    let (nn, na) = (normal.len() as f64, anomaly.len() as f64);
    let pooled = (((nn - 1.0) * vn + (na - 1.0) * va) / (nn + na - 2.0)).sqrt();
    if pooled == 0.0 {
        if mn == ma {
            return Ok(0.0);
        }
        return Err(HeadError::DegenerateVariance { mean_normal: mn, mean_anomaly: ma });
    }
    Ok((mn - ma).abs() / pooled)
}

/// Samples gathered for one head across episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeadSamples {
    /// Combined alignment score per ideal episode.
    pub alignment: Vec<f64>,
    pub peak_normal: Vec<f64>,
    pub peak_anomaly: Vec<f64>,
}

impl HeadSamples {
    pub fn merge(&mut self, other: HeadSamples) {
        self.alignment.extend(other.alignment);
        self.peak_normal.extend(other.peak_normal);
        self.peak_anomaly.extend(other.peak_anomaly);
    }

    pub fn score(&self, head: HeadId) -> Result<HeadScore, HeadError> {
        let wrap = |e| HeadError::Head { head, source: Box::new(e) };
        if self.alignment.is_empty() {
            return Err(wrap(HeadError::Config("no ideal episodes".into())));
        }
        let i_diag = self.alignment.iter().sum::<f64>() / self.alignment.len() as f64;
        let cohens_d = cohens_d(&self.peak_normal, &self.peak_anomaly).map_err(wrap)?;
        Ok(HeadScore {
            head,
            i_diag,
            cohens_d,
            n_normal: self.peak_normal.len(),
            n_anomaly: self.peak_anomaly.len(),
        })
    }
}

/// Episodes whose final matrix feeds the alignment score: no Anomaly phase,
/// standing in for perfect-SPL runs.
pub fn is_ideal(labeled: &LabeledEpisode) -> bool {
    labeled.category == EpisodeCategory::OnlyN
}

/// Samples of one head in one labeled episode. Only retained (labeled)
/// steps contribute sharpness samples.
pub fn head_samples(
    trace: &EpisodeTrace,
    labeled: &LabeledEpisode,
    head: HeadId,
    config: &SelectionConfig,
) -> Result<HeadSamples, HeadError> {
    let window = config.window_for(trace.tokens);
    let mut out = HeadSamples::default();
    for (rec, label) in trace.records.iter().zip(&labeled.labels) {
        let m = rec.head(head).ok_or_else(|| HeadError::Config(format!("head {head} missing from trace")))?;
        let peak = peak_score(m, window);
        match label {
            PhaseLabel::Normal => out.peak_normal.push(peak),
            PhaseLabel::Anomaly => out.peak_anomaly.push(peak),
        }
    }
    if is_ideal(labeled) {
        let last = labeled.labels.len().min(trace.records.len());
        if last > 0 {
            let m = &trace.records[last - 1].heads[&head];
            out.alignment.push(alignment_components(m, config)?.combined(config.lambda));
        }
    }
    Ok(out)
}

/// Samples for every stored head of one episode.
pub fn episode_samples(
    trace: &EpisodeTrace,
    labeled: &LabeledEpisode,
    config: &SelectionConfig,
) -> Result<BTreeMap<HeadId, HeadSamples>, HeadError> {
    trace
        .stored_heads
        .iter()
        .map(|&h| head_samples(trace, labeled, h, config).map(|s| (h, s)))
        .collect()
}

/// Scores every stored head over a labeled corpus. Heads are scored
/// independently (in parallel under `Exec::Parallel`); output is sorted by head.
pub fn score_heads(
    corpus: &[(EpisodeTrace, LabeledEpisode)],
    config: &SelectionConfig,
    exec: Exec,
) -> Result<Vec<HeadScore>, HeadError> {
    let first = corpus.first().ok_or_else(|| HeadError::Config("empty corpus".into()))?;
    let mut heads = first.0.stored_heads.clone();
    heads.sort();
    exec.try_map(&heads, |&head| {
        let mut acc = HeadSamples::default();
        for (trace, labeled) in corpus {
            acc.merge(head_samples(trace, labeled, head, config)?);
        }
        acc.score(head)
    })
}

/// Scores heads from per-episode sample tables merged in episode order.
pub fn score_from_samples(tables: Vec<BTreeMap<HeadId, HeadSamples>>) -> Result<Vec<HeadScore>, HeadError> {
    let mut merged: BTreeMap<HeadId, HeadSamples> = BTreeMap::new();
    for table in tables {
        for (h, s) in table {
            merged.entry(h).or_default().merge(s);
        }
    }
    merged.iter().map(|(h, s)| s.score(*h)).collect()
}

/// Top-`M` heads by alignment, re-ranked by Cohen's d, truncated to `K`.
/// Ties break by (layer, head) ascending.
pub fn select_nav_heads(scores: &[HeadScore], config: &SelectionConfig) -> Result<Vec<HeadId>, HeadError> {
    config.check()?;
    if scores.len() < config.pool_size {
        return Err(HeadError::Config(format!(
            "{} scored heads, but the candidate pool needs {}",
            scores.len(),
            config.pool_size
        )));
    }
    let mut pool: Vec<&HeadScore> = scores.iter().collect();
    pool.sort_by(|a, b| b.i_diag.total_cmp(&a.i_diag).then(a.head.cmp(&b.head)));
    pool.truncate(config.pool_size);
    pool.sort_by(|a, b| b.cohens_d.total_cmp(&a.cohens_d).then(a.head.cmp(&b.head)));
    Ok(pool.iter().take(config.k).map(|s| s.head).collect())
}

/// Head set used on the deployed robot.
pub const DEPLOYMENT_HEADS: [HeadId; 3] = [HeadId::new(21, 12), HeadId::new(16, 1), HeadId::new(14, 1)];
