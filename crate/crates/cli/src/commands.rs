use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sentinel_core::detector::{detect_trace, DetectorConfig, StepOutput};
use sentinel_core::eval::{evaluate_flags, grid_sweep, sweep_table_csv, EvalError, GroundTruth, SweepEpisode, SweepSpec};
use sentinel_core::heads::{episode_samples, score_from_samples, select_nav_heads, HeadScore, SelectionConfig};
use sentinel_core::labeler::{label_episode, LabelSidecar, LabelerConfig, PhaseLabel};
use sentinel_core::recovery::{generate_scenario, run_scenario, RollbackConfig, Scenario, WorldGenConfig};
use sentinel_core::synth::{gen_dataset, SynthSpec};
use sentinel_core::trace::write_trace_file;
use sentinel_core::{Exec, HeadId};

use crate::error::CliError;
use crate::io::{self, Manifest};
use crate::{DetectArgs, EvaluateArgs, LabelArgs, RollbackArgs, ScoreArgs, SelectArgs, SweepArgs, SynthArgs};

pub fn parse_heads(s: &str) -> Result<Vec<HeadId>, CliError> {
    let heads = s
        .split(',')
        .map(|h| h.trim().parse::<HeadId>().map_err(|e| CliError::invalid(format!("bad head {h:?}: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if heads.is_empty() {
        return Err(CliError::invalid("empty head list"));
    }
    Ok(heads)
}

pub fn synth(a: SynthArgs, exec: Exec) -> Result<(), CliError> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => io::read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.episodes {
        spec.episodes = n;
    }
    let data = gen_dataset(&spec, exec).map_err(CliError::invalid)?;
    io::create_dir(&a.out)?;
    let mut episodes: Vec<_> = data.train.iter().chain(&data.val).collect();
    episodes.sort_by(|x, y| x.trace.episode_id.cmp(&y.trace.episode_id));
    for ep in &episodes {
        let path = a.out.join(format!("{}.atrc", ep.trace.episode_id));
        write_trace_file(&ep.trace, &path).map_err(|e| CliError::trace(&path, e))?;
    }
    let manifest = Manifest { spec, episodes: episodes.iter().map(|e| e.manifest_entry()).collect() };
    io::write(&a.out.join(io::MANIFEST), io::to_json(&manifest).as_bytes())?;
    eprintln!("wrote {} episodes to {}", episodes.len(), a.out.display());
    Ok(())
}

pub fn label(a: LabelArgs, exec: Exec) -> Result<(), CliError> {
    if a.patience == 0 {
        return Err(CliError::invalid("--p must be at least 1"));
    }
    let cfg = LabelerConfig { patience: a.patience };
    let paths = io::trace_paths(&a.dir)?;
    let results = exec.try_map(&paths, |p| {
        let trace = sentinel_core::trace::read_trace_file(p).map_err(|e| CliError::trace(p, e))?;
        let labeled = label_episode(&trace, &cfg).map_err(|e| CliError::invalid(format!("{}: {e}", p.display())))?;
        let sidecar = LabelSidecar::new(&trace.episode_id, &labeled);
        io::write(&io::sidecar_path(&a.dir, &trace.episode_id), io::to_json(&sidecar).as_bytes())?;
        Ok::<_, CliError>(labeled.category)
    })?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in results {
        *counts.entry(format!("{c:?}")).or_default() += 1;
    }
    eprintln!("labeled {} episodes: {counts:?}", paths.len());
    Ok(())
}

pub fn score_heads(a: ScoreArgs, exec: Exec) -> Result<(), CliError> {
    let mut cfg = SelectionConfig::default();
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    cfg.window = a.window.or(cfg.window);
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(CliError::invalid(format!("--lambda {} outside [0, 1]", cfg.lambda)));
    }
    let corpus = io::load_labeled(&a.dir, a.split)?;
    let tables = exec.try_map(&corpus, |(trace, labels)| {
        episode_samples(trace, &io::as_labeled(labels), &cfg).map_err(|e| CliError::invalid(format!("{}: {e}", trace.episode_id)))
    })?;
    let scores = score_from_samples(tables).map_err(CliError::invalid)?;
    io::emit(a.out.as_deref(), &io::to_json(&scores))
}

pub fn select_heads(a: SelectArgs) -> Result<(), CliError> {
    let scores: Vec<HeadScore> = io::read_json(&a.scores)?;
    let cfg = SelectionConfig { pool_size: a.pool_size, k: a.k, ..SelectionConfig::default() };
    let heads = select_nav_heads(&scores, &cfg).map_err(CliError::invalid)?;
    let text = heads.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
    io::emit(a.out.as_deref(), &format!("{text}\n"))
}

/// Detector settings as they appear in a config file. Keys mirror the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectFile {
    heads: Option<Vec<String>>,
    #[serde(rename = "W")]
    window: Option<usize>,
    #[serde(rename = "P")]
    patience: Option<usize>,
    tau: Option<f64>,
    epsilon: Option<f64>,
}

/// Flags over config file over the deployment defaults.
pub fn detector_config(a: &DetectArgs) -> Result<DetectorConfig, CliError> {
    let file: DetectFile = match &a.config {
        Some(p) => io::read_json(p)?,
        None => DetectFile::default(),
    };
    let mut cfg = DetectorConfig::deployment();
    if let Some(h) = &file.heads {
        cfg.heads = parse_heads(&h.join(","))?;
    }
    if let Some(h) = &a.heads {
        cfg.heads = parse_heads(h)?;
    }
    cfg.window = a.window.or(file.window).unwrap_or(cfg.window);
    cfg.patience = a.patience.or(file.patience).unwrap_or(cfg.patience);
    cfg.threshold = a.tau.or(file.tau).unwrap_or(cfg.threshold);
    cfg.epsilon = a.epsilon.or(file.epsilon).unwrap_or(cfg.epsilon);
    cfg.validate().map_err(CliError::invalid)?;
    Ok(cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionLine {
    #[serde(rename = "episodeId")]
    episode_id: String,
    #[serde(flatten)]
    output: StepOutput,
}

pub fn detect(a: DetectArgs, exec: Exec) -> Result<(), CliError> {
    let cfg = detector_config(&a)?;
    let traces = io::load_traces(&a.dir)?;
    let per_episode = exec.try_map(&traces, |t| {
        let (out, _) = detect_trace(t, &cfg).map_err(|e| CliError::invalid(format!("{}: {e}", t.episode_id)))?;
        let mut text = String::new();
        for o in out {
            let line = DetectionLine { episode_id: t.episode_id.clone(), output: o };
            text.push_str(&serde_json::to_string(&line).expect("serializable"));
            text.push('\n');
        }
        Ok::<_, CliError>(text)
    })?;
    io::emit(a.out.as_deref(), &per_episode.concat())
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let raw = io::read(&a.detections)?;
    let text = String::from_utf8(raw).map_err(|e| CliError::invalid(format!("{}: {e}", a.detections.display())))?;
    let mut phases: BTreeMap<String, Vec<(u32, PhaseLabel)>> = BTreeMap::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let d: DetectionLine = serde_json::from_str(line)
            .map_err(|e| CliError::invalid(format!("{}:{}: {e}", a.detections.display(), n + 1)))?;
        phases.entry(d.episode_id).or_default().push((d.output.step, d.output.phase));
    }
    if phases.is_empty() {
        return Err(CliError::invalid("no detections"));
    }
    let mut truth = Vec::new();
    let mut flags = Vec::new();
    for (id, mut steps) in phases {
        steps.sort_by_key(|s| s.0);
        let labels = io::load_labels(&a.labels, &id)?;
        if steps.len() < labels.labels.len() {
            return Err(CliError::invalid(format!("{id}: {} detections for {} labeled steps", steps.len(), labels.labels.len())));
        }
        flags.push(steps.iter().take(labels.labels.len()).map(|s| s.1).collect());
        truth.push(GroundTruth { episode_id: id, category: labels.category, labels: labels.labels });
    }
    let report = evaluate_flags(&truth, &flags).map_err(CliError::invalid)?;
    io::emit(a.out.as_deref(), &io::to_json(&report))
}

pub fn sweep(a: SweepArgs, exec: Exec) -> Result<(), CliError> {
    let mut spec = match &a.spec {
        Some(p) => io::read_json(p)?,
        None => SweepSpec::full_grid(0.10),
    };
    if let Some(c) = a.fer_cap {
        spec.fer_cap = c;
    }
    let max_k = spec.k.iter().copied().max().unwrap_or(0);
    let ranked = match (&a.heads, &a.scores) {
        (Some(h), _) => parse_heads(h)?,
        (None, Some(p)) => {
            let scores: Vec<HeadScore> = io::read_json(p)?;
            let cfg = SelectionConfig { pool_size: scores.len().min(32), k: max_k.max(1), ..SelectionConfig::default() };
            select_nav_heads(&scores, &cfg).map_err(CliError::invalid)?
        }
        (None, None) => return Err(CliError::invalid("sweep needs --heads or --scores")),
    };
    let corpus = io::load_labeled(&a.dir, a.split)?;
    let episodes = exec.try_map(&corpus, |(trace, labels)| {
        SweepEpisode::from_trace(trace, &io::as_labeled(labels), &ranked)
            .map_err(|e| CliError::invalid(format!("{}: {e}", trace.episode_id)))
    })?;
    match grid_sweep(&episodes, &spec, exec) {
        Ok(o) => {
            if let Some(p) = &a.out {
                io::write(p, sweep_table_csv(&o.table).as_bytes())?;
            }
            io::emit(None, &io::to_json(&o.best))
        }
        Err(EvalError::NoFeasibleConfig { cap, table }) => {
            if let Some(p) = &a.out {
                io::write(p, sweep_table_csv(&table).as_bytes())?;
            }
            Err(CliError::invalid(format!("no configuration keeps FER within {cap}")))
        }
        Err(e) => Err(CliError::invalid(e)),
    }
}

pub fn rollback(a: RollbackArgs) -> Result<(), CliError> {
    let mut cfg: RollbackConfig = match &a.config {
        Some(p) => io::read_json(p)?,
        None => RollbackConfig::default(),
    };
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    let scenario: Scenario = match &a.world {
        Some(p) => io::read_json(p)?,
        None => generate_scenario(a.seed, a.index, &WorldGenConfig::default()),
    };
    let outcome = run_scenario(&scenario, &cfg).map_err(CliError::invalid)?;
    if let Some(p) = &a.out {
        io::write(p, outcome.trajectory_csv().as_bytes())?;
    }
    if let Some(p) = &a.pgm {
        io::write(p, &outcome.last_observation.to_pgm())?;
    }
    io::emit(None, &io::to_json(&outcome))
}
