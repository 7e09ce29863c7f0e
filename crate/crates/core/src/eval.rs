//! Episode- and step-level metrics, heuristic baselines, and the detector
//! hyperparameter sweep.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{head_entropy, DetectorConfig, DetectorError};
use crate::exec::Exec;
use crate::labeler::{EpisodeCategory, LabeledEpisode, PhaseLabel};
use crate::trace::{ActionKind, EpisodeTrace, HeadId, Pose};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0} is undefined: no episodes in its denominator class")]
    UndefinedMetric(&'static str),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("no configuration keeps FER within {cap} ({} evaluated)", .table.len())]
    NoFeasibleConfig { cap: f64, table: Vec<SweepRow> },
    #[error(transparent)]
    Detector(#[from] DetectorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    #[serde(rename = "episodeId")]
    pub episode_id: String,
    #[serde(rename = "gtCategory")]
    pub gt_category: EpisodeCategory,
    #[serde(rename = "detectionStep")]
    pub detection_step: Option<usize>,
    /// Steps from ground-truth onset to detection (negative when early).
    pub latency: Option<i64>,
}

impl EpisodeResult {
    /// Builds the result from ground-truth labels and latched flags.
    pub fn from_flags(episode_id: &str, labels: &[PhaseLabel], category: EpisodeCategory, flags: &[PhaseLabel]) -> Self {
        let detection_step = flags.iter().position(|f| *f == PhaseLabel::Anomaly);
        let onset = labels.iter().position(|l| *l == PhaseLabel::Anomaly);
        let latency = match (detection_step, onset) {
            (Some(d), Some(o)) => Some(d as i64 - o as i64),
            _ => None,
        };
        EpisodeResult { episode_id: episode_id.to_string(), gt_category: category, detection_step, latency }
    }

    pub fn flagged(&self) -> bool {
        self.detection_step.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    #[serde(rename = "EDR")]
    pub edr: f64,
    #[serde(rename = "FER")]
    pub fer: f64,
    #[serde(rename = "Gap")]
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub precision: f64,
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub episode: EpisodeMetrics,
    #[serde(flatten)]
    pub step: StepMetrics,
    #[serde(rename = "meanLatency")]
    pub mean_latency: Option<f64>,
}

/// EDR over anomalous episodes, FER over OnlyN episodes, Gap = EDR - FER.
pub fn episode_metrics(results: &[EpisodeResult]) -> Result<EpisodeMetrics, EvalError> {
    let (mut anomalous, mut detected, mut normal, mut false_flags) = (0usize, 0usize, 0usize, 0usize);
    for r in results {
        if r.gt_category.is_anomalous() {
            anomalous += 1;
            detected += r.flagged() as usize;
        } else {
            normal += 1;
            false_flags += r.flagged() as usize;
        }
    }
    if anomalous == 0 {
        return Err(EvalError::UndefinedMetric("EDR"));
    }
    if normal == 0 {
        return Err(EvalError::UndefinedMetric("FER"));
    }
    let edr = detected as f64 / anomalous as f64;
    let fer = false_flags as f64 / normal as f64;
    Ok(EpisodeMetrics { edr, fer, gap: edr - fer })
}

/// Binary step classification with Anomaly as the positive class, pooled
/// over the given (labels, flags) episode pairs.
pub fn step_metrics<'a, I>(pairs: I) -> Result<StepMetrics, EvalError>
where
    I: IntoIterator<Item = (&'a [PhaseLabel], &'a [PhaseLabel])>,
{
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (labels, flags) in pairs {
        if labels.len() != flags.len() {
            return Err(EvalError::Input(format!("{} labels vs {} flags", labels.len(), flags.len())));
        }
        for (l, f) in labels.iter().zip(flags) {
            match (l, f) {
                (PhaseLabel::Anomaly, PhaseLabel::Anomaly) => tp += 1,
                (PhaseLabel::Normal, PhaseLabel::Anomaly) => fp += 1,
                (PhaseLabel::Anomaly, PhaseLabel::Normal) => fn_ += 1,
                _ => {}
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(StepMetrics { precision, recall, f1 })
}

/// Ground truth of one evaluated episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub episode_id: String,
    pub category: EpisodeCategory,
    /// Retained-step labels.
    pub labels: Vec<PhaseLabel>,
}

impl GroundTruth {
    pub fn new(episode_id: &str, labeled: &LabeledEpisode) -> Self {
        GroundTruth { episode_id: episode_id.to_string(), category: labeled.category, labels: labeled.labels.clone() }
    }
}

/// Full report for latched per-step flags, one sequence per episode aligned
/// with the retained labels. Step metrics are restricted to NtoA episodes.
pub fn evaluate_flags(truth: &[GroundTruth], flags: &[Vec<PhaseLabel>]) -> Result<MetricsReport, EvalError> {
    if truth.len() != flags.len() {
        return Err(EvalError::Input(format!("{} episodes vs {} flag sequences", truth.len(), flags.len())));
    }
    let results: Vec<EpisodeResult> = truth
        .iter()
        .zip(flags)
        .map(|(gt, f)| EpisodeResult::from_flags(&gt.episode_id, &gt.labels, gt.category, f))
        .collect();
    let episode = episode_metrics(&results)?;
    let step = step_metrics(
        truth
            .iter()
            .zip(flags)
            .filter(|(gt, _)| gt.category == EpisodeCategory::NtoA)
            .map(|(gt, f)| (gt.labels.as_slice(), f.as_slice())),
    )?;
    let latencies: Vec<i64> = results.iter().filter(|r| r.gt_category.is_anomalous()).filter_map(|r| r.latency).collect();
    let mean_latency =
        (!latencies.is_empty()).then(|| latencies.iter().sum::<i64>() as f64 / latencies.len() as f64);
    Ok(MetricsReport { episode, step, mean_latency })
}

/// Latches a raw per-step flag sequence: Anomaly from the first flag onward.
pub fn latch(flags: &[bool]) -> Vec<PhaseLabel> {
    let mut on = false;
    flags
        .iter()
        .map(|&f| {
            on |= f;
            if on {
                PhaseLabel::Anomaly
            } else {
                PhaseLabel::Normal
            }
        })
        .collect()
}

/// Position-stagnation baseline: latches once the planar displacement over the
/// last `patience` steps is below `threshold`.
pub fn baseline_stagnation(poses: &[Pose], threshold: f64, patience: usize) -> Vec<PhaseLabel> {
    let raw: Vec<bool> = (0..poses.len())
        .map(|t| t >= patience && patience > 0 && poses[t].xy_distance(&poses[t - patience]) < threshold)
        .collect();
    latch(&raw)
}

/// Action-failure baseline: a Forward step whose outcome pose moved less than
/// `move_epsilon`. The final step has no outcome and is never flagged.
pub fn baseline_action_failure(actions: &[ActionKind], poses: &[Pose], move_epsilon: f64) -> Vec<bool> {
    (0..actions.len().min(poses.len()))
        .map(|t| {
            actions[t].is_translational() && t + 1 < poses.len() && poses[t].xy_distance(&poses[t + 1]) < move_epsilon
        })
        .collect()
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P")]
    pub patience: usize,
    #[serde(rename = "W")]
    pub window: usize,
    pub tau: f64,
}

impl SweepPoint {
    fn key_cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.k, self.patience, self.window)
            .cmp(&(other.k, other.patience, other.window))
            .then(self.tau.total_cmp(&other.tau))
    }

    pub fn detector_config(&self, ranked_heads: &[HeadId], epsilon: f64) -> DetectorConfig {
        let mut cfg = DetectorConfig::new(ranked_heads[..self.k].to_vec(), self.window, self.patience, self.tau);
        cfg.epsilon = epsilon;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    #[serde(rename = "P")]
    pub patience: Vec<usize>,
    #[serde(rename = "W")]
    pub window: Vec<usize>,
    pub tau: Vec<f64>,
    #[serde(rename = "ferCap")]
    pub fer_cap: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    1e-8
}

impl SweepSpec {
    /// 10 x 10 x 10 x 9 grid: K, P, W in 1..=10 and nine thresholds.
    pub fn full_grid(fer_cap: f64) -> Self {
        SweepSpec {
            k: (1..=10).collect(),
            patience: (1..=10).collect(),
            window: (1..=10).collect(),
            tau: vec![0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3],
            fer_cap,
            epsilon: default_epsilon(),
        }
    }

    pub fn combinations(&self) -> usize {
        self.k.len() * self.patience.len() * self.window.len() * self.tau.len()
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.k.is_empty() || self.patience.is_empty() || self.window.is_empty() || self.tau.is_empty() {
            return Err(EvalError::Input("every sweep range must be nonempty".into()));
        }
        if !(self.fer_cap > 0.0 && self.fer_cap < 1.0) {
            return Err(EvalError::Input(format!("ferCap {} outside (0, 1)", self.fer_cap)));
        }
        if self.k.contains(&0) || self.patience.contains(&0) || self.window.contains(&0) {
            return Err(EvalError::Input("K, P and W values must be at least 1".into()));
        }
        if self.tau.iter().any(|t| !(*t > 0.0)) || !(self.epsilon > 0.0) {
            return Err(EvalError::Input("tau and epsilon must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub point: SweepPoint,
    #[serde(flatten)]
    pub metrics: MetricsReport,
}

pub const SWEEP_CSV_HEADER: &str = "K,P,W,tau,EDR,FER,Gap,precision,recall,F1,meanLatency";

/// Renders the result table as CSV. Floats use the shortest round-trip form,
/// so identical tables give identical bytes.
pub fn sweep_table_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let m = &r.metrics;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},",
            r.point.k,
            r.point.patience,
            r.point.window,
            r.point.tau,
            m.episode.edr,
            m.episode.fer,
            m.episode.gap,
            m.step.precision,
            m.step.recall,
            m.step.f1
        );
        if let Some(l) = m.mean_latency {
            let _ = write!(out, "{l}");
        }
        out.push('\n');
    }
    out
}

/// An episode reduced to what the sweep needs: ground truth and the per-step
/// entropy of each ranked navigation head.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEpisode {
    pub truth: GroundTruth,
    /// `head_entropy[t][i]`: frame-averaged entropy of ranked head `i` at retained step `t`.
    pub head_entropy: Vec<Vec<f64>>,
}

impl SweepEpisode {
    pub fn from_trace(trace: &EpisodeTrace, labeled: &LabeledEpisode, ranked_heads: &[HeadId]) -> Result<Self, EvalError> {
        let steps = labeled.labels.len().min(trace.records.len());
        let head_entropy = trace.records[..steps]
            .iter()
            .map(|rec| {
                ranked_heads
                    .iter()
                    .map(|h| head_entropy(rec.head(*h).ok_or(DetectorError::MissingHead(*h))?))
                    .collect::<Result<Vec<f64>, DetectorError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SweepEpisode { truth: GroundTruth::new(&trace.episode_id, labeled), head_entropy })
    }

    /// `E_t` for the top-`k` heads, summed in rank order.
    pub fn entropies(&self, k: usize) -> Vec<f64> {
        self.head_entropy.iter().map(|row| row[..k].iter().sum::<f64>() / k as f64).collect()
    }
}

/// Relative entropy scores of a whole series; `None` during warm-up.
/// Sums each window oldest-first, exactly as the streaming detector does.
pub fn ratio_series(entropies: &[f64], window: usize, epsilon: f64) -> Vec<Option<f64>> {
    (0..entropies.len())
        .map(|t| {
            (t >= window).then(|| {
                let mean = entropies[t - window..t].iter().sum::<f64>() / window as f64;
                entropies[t] / (mean + epsilon)
            })
        })
        .collect()
}

/// Latched phases from a ratio series.
pub fn phases_from_ratios(ratios: &[Option<f64>], tau: f64, patience: usize) -> Vec<PhaseLabel> {
    let mut count = 0usize;
    let mut latched = false;
    ratios
        .iter()
        .map(|r| {
            if let Some(r) = r {
                if *r > tau {
                    count += 1;
                    latched |= count >= patience;
                } else {
                    count = 0;
                }
            }
            if latched {
                PhaseLabel::Anomaly
            } else {
                PhaseLabel::Normal
            }
        })
        .collect()
}

/// Evaluates one configuration on a prepared dataset.
pub fn evaluate_point(episodes: &[SweepEpisode], point: SweepPoint, epsilon: f64) -> Result<SweepRow, EvalError> {
    let truth: Vec<GroundTruth> = episodes.iter().map(|e| e.truth.clone()).collect();
    let flags: Vec<Vec<PhaseLabel>> = episodes
        .iter()
        .map(|e| phases_from_ratios(&ratio_series(&e.entropies(point.k), point.window, epsilon), point.tau, point.patience))
        .collect();
    Ok(SweepRow { point, metrics: evaluate_flags(&truth, &flags)? })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub best: SweepRow,
    /// Every combination, sorted by (K, P, W, tau).
    pub table: Vec<SweepRow>,
}

/// Evaluates the full grid and picks the max-EDR configuration with
/// FER <= cap. Ties: lower FER, lower mean latency, then smaller config key.
pub fn grid_sweep(episodes: &[SweepEpisode], spec: &SweepSpec, exec: Exec) -> Result<SweepOutcome, EvalError> {
    spec.validate()?;
    let max_k = *spec.k.iter().max().expect("validated nonempty");
    if let Some(e) = episodes.iter().find(|e| e.head_entropy.iter().any(|row| row.len() < max_k)) {
        return Err(EvalError::Input(format!("episode {} ranks fewer than {max_k} heads", e.truth.episode_id)));
    }
    let has_normal = episodes.iter().any(|e| !e.truth.category.is_anomalous());
    let has_anomalous = episodes.iter().any(|e| e.truth.category.is_anomalous());
    if !has_normal || !has_anomalous {
        return Err(EvalError::Input("sweep needs both anomalous and OnlyN episodes".into()));
    }

    let truth: Vec<GroundTruth> = episodes.iter().map(|e| e.truth.clone()).collect();
    // ratios depend only on (K, W); thresholds and patience reuse them
    let groups: Vec<(usize, usize)> =
        spec.k.iter().flat_map(|&k| spec.window.iter().map(move |&w| (k, w))).collect();
    let grouped = exec.try_map(&groups, |&(k, w)| {
        let ratios: Vec<Vec<Option<f64>>> =
            episodes.iter().map(|e| ratio_series(&e.entropies(k), w, spec.epsilon)).collect();
        let mut rows = Vec::with_capacity(spec.patience.len() * spec.tau.len());
        for &p in &spec.patience {
            for &tau in &spec.tau {
                let flags: Vec<Vec<PhaseLabel>> = ratios.iter().map(|r| phases_from_ratios(r, tau, p)).collect();
                let point = SweepPoint { k, patience: p, window: w, tau };
                rows.push(SweepRow { point, metrics: evaluate_flags(&truth, &flags)? });
            }
        }
        Ok::<_, EvalError>(rows)
    })?;
    let mut table: Vec<SweepRow> = grouped.into_iter().flatten().collect();
    table.sort_by(|a, b| a.point.key_cmp(&b.point));

    let best = table
        .iter()
        .filter(|r| r.metrics.episode.fer <= spec.fer_cap)
        .min_by(|a, b| {
            let (ma, mb) = (&a.metrics, &b.metrics);
            mb.episode
                .edr
                .total_cmp(&ma.episode.edr)
                .then(ma.episode.fer.total_cmp(&mb.episode.fer))
                .then(
                    ma.mean_latency
                        .unwrap_or(f64::INFINITY)
                        .total_cmp(&mb.mean_latency.unwrap_or(f64::INFINITY)),
                )
                .then(a.point.key_cmp(&b.point))
        })
        .copied();
    match best {
        Some(best) => Ok(SweepOutcome { best, table }),
        None => Err(EvalError::NoFeasibleConfig { cap: spec.fer_cap, table }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PhaseLabel::{Anomaly as A, Normal as N};

    fn result(cat: EpisodeCategory, flagged: bool) -> EpisodeResult {
        EpisodeResult {
            episode_id: String::new(),
            gt_category: cat,
            detection_step: flagged.then_some(3),
            latency: None,
        }
    }

    #[test]
    fn episode_metric_counts() {
        use EpisodeCategory::*;
        let r = vec![result(NtoA, true), result(OnlyA, false), result(OnlyN, false), result(OnlyN, false)];
        let m = episode_metrics(&r).unwrap();
        assert_eq!((m.edr, m.fer, m.gap), (0.5, 0.0, 0.5));
        let all: Vec<_> = r.iter().map(|x| result(x.gt_category, true)).collect();
        let m = episode_metrics(&all).unwrap();
        assert_eq!((m.edr, m.fer, m.gap), (1.0, 1.0, 0.0));
        assert!(matches!(episode_metrics(&[result(OnlyN, true)]), Err(EvalError::UndefinedMetric("EDR"))));
        assert!(matches!(episode_metrics(&[result(NtoA, true)]), Err(EvalError::UndefinedMetric("FER"))));
    }

    #[test]
    fn step_metric_examples() {
        let labels = [N, N, A, A];
        let m = step_metrics([(&labels[..], &labels[..])]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        let none = [N; 4];
        let m = step_metrics([(&labels[..], &none[..])]).unwrap();
        assert_eq!((m.recall, m.f1), (0.0, 0.0));
        let flags = [N, A, A, A];
        let m = step_metrics([(&labels[..], &flags[..])]).unwrap();
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.recall, 1.0);
        assert!((m.f1 - 0.8).abs() < 1e-15);
        assert!(matches!(step_metrics([(&labels[..], &flags[..3])]), Err(EvalError::Input(_))));
    }

    fn still(n: usize) -> Vec<Pose> {
        vec![Pose::default(); n]
    }

    #[test]
    fn stagnation_examples() {
        let flags = baseline_stagnation(&still(5), 0.1, 3);
        assert_eq!(flags, vec![N, N, N, A, A]);
        let moving: Vec<Pose> = (0..8).map(|i| Pose::new(0.25 * i as f32, 0.0, 0.0, 0.0)).collect();
        assert!(baseline_stagnation(&moving, 0.1, 3).iter().all(|f| *f == N));
        assert_eq!(baseline_stagnation(&still(1), 0.1, 3), vec![N]);
    }

    #[test]
    fn action_failure_examples() {
        let poses = still(2);
        assert!(baseline_action_failure(&[ActionKind::Forward(0.25), ActionKind::Stop], &poses, 0.05)[0]);
        assert!(!baseline_action_failure(&[ActionKind::TurnLeft(0.5), ActionKind::Stop], &poses, 0.05)[0]);
        let moved = vec![Pose::default(), Pose::new(0.25, 0.0, 0.0, 0.0)];
        assert!(!baseline_action_failure(&[ActionKind::Forward(0.25), ActionKind::Stop], &moved, 0.05)[0]);
    }

    #[test]
    fn latch_holds() {
        assert_eq!(latch(&[false, true, false]), vec![N, A, A]);
    }

    fn sweep_episode(id: &str, cat: EpisodeCategory, labels: Vec<PhaseLabel>, entropies: Vec<f64>) -> SweepEpisode {
        SweepEpisode {
            truth: GroundTruth { episode_id: id.into(), category: cat, labels },
            head_entropy: entropies.into_iter().map(|e| vec![e]).collect(),
        }
    }

    fn toy_dataset() -> Vec<SweepEpisode> {
        use EpisodeCategory::*;
        vec![
            sweep_episode("a", NtoA, vec![N, N, N, A, A, A], vec![0.2, 0.2, 0.2, 0.9, 0.9, 0.9]),
            sweep_episode("b", NtoA, vec![N, N, N, N, A, A], vec![0.2, 0.21, 0.2, 0.2, 0.5, 0.6]),
            sweep_episode("c", OnlyN, vec![N; 6], vec![0.2, 0.2, 0.3, 0.2, 0.2, 0.2]),
            sweep_episode("d", OnlyN, vec![N; 6], vec![0.2, 0.2, 0.2, 0.2, 0.2, 0.2]),
        ]
    }

    #[test]
    fn single_combination_sweep() {
        let spec = SweepSpec { k: vec![1], patience: vec![1], window: vec![2], tau: vec![2.0], fer_cap: 0.5, epsilon: 1e-8 };
        let out = grid_sweep(&toy_dataset(), &spec, Exec::Sequential).unwrap();
        assert_eq!(out.table.len(), 1);
        assert_eq!(out.best, out.table[0]);
        assert_eq!(out.best.metrics.episode.edr, 1.0);
        assert_eq!(out.best.metrics.episode.fer, 0.0);
        // both anomalous episodes are caught exactly at their onset
        assert_eq!(out.best.metrics.mean_latency, Some(0.0));
    }

    #[test]
    fn feasibility_filter_beats_raw_edr() {
        // tau 1.2 flags c's bump (FER 0.5); tau 2.0 keeps FER 0 at equal EDR
        let spec = SweepSpec { k: vec![1], patience: vec![1], window: vec![2], tau: vec![1.2, 2.0], fer_cap: 0.1, epsilon: 1e-8 };
        let out = grid_sweep(&toy_dataset(), &spec, Exec::Sequential).unwrap();
        assert_eq!(out.table[0].metrics.episode.fer, 0.5);
        assert_eq!(out.best.point.tau, 2.0);
    }

    #[test]
    fn infeasible_sweep_keeps_table() {
        let spec = SweepSpec { k: vec![1], patience: vec![1], window: vec![2], tau: vec![1.2], fer_cap: 0.1, epsilon: 1e-8 };
        match grid_sweep(&toy_dataset(), &spec, Exec::Sequential) {
            Err(EvalError::NoFeasibleConfig { table, .. }) => assert_eq!(table.len(), 1),
            other => panic!("expected NoFeasibleConfig, got {other:?}"),
        }
    }

    #[test]
    fn sweep_rejects_bad_specs() {
        let mut spec = SweepSpec::full_grid(0.1);
        assert_eq!(spec.combinations(), 9000);
        // toy data ranks a single head
        assert!(matches!(grid_sweep(&toy_dataset(), &spec, Exec::Sequential), Err(EvalError::Input(_))));
        spec.fer_cap = 1.0;
        assert!(matches!(grid_sweep(&toy_dataset(), &spec, Exec::Sequential), Err(EvalError::Input(_))));
    }

    #[test]
    fn csv_layout() {
        let spec = SweepSpec { k: vec![1], patience: vec![1, 2], window: vec![2], tau: vec![2.0], fer_cap: 0.5, epsilon: 1e-8 };
        let out = grid_sweep(&toy_dataset(), &spec, Exec::Sequential).unwrap();
        let csv = sweep_table_csv(&out.table);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines[1], "1,1,2,2,1,0,1,1,1,1,0");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn ratio_series_matches_streaming_monitor() {
        let e = [0.3, 0.5, 0.2, 0.9, 0.4, 0.45, 1.0, 0.1];
        let mut m = crate::detector::RatioMonitor::new(3, 2, 1.1, 1e-8);
        let stream: Vec<Option<f64>> = e.iter().map(|&x| m.push(x, true).unwrap().ratio).collect();
        assert_eq!(stream, ratio_series(&e, 3, 1e-8));
    }
}
