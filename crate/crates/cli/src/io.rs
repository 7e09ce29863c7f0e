//! Trace-directory layout: `<id>.atrc` traces, `<id>.labels.json` sidecars
//! and an optional `manifest.json` written by `synth`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sentinel_core::labeler::{LabelSidecar, LabeledEpisode};
use sentinel_core::synth::{ManifestEntry, Split, SynthSpec};
use sentinel_core::trace::read_trace_file;
use sentinel_core::EpisodeTrace;

use crate::error::CliError;
use crate::SplitFilter;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SynthSpec,
    pub episodes: Vec<ManifestEntry>,
}

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes to `out`, or stdout when absent.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

pub fn sidecar_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.labels.json"))
}

/// Trace files in name order.
pub fn trace_paths(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.extension().is_some_and(|x| x == "atrc") {
            paths.push(p);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::invalid(format!("{}: no .atrc traces", dir.display())));
    }
    Ok(paths)
}

pub fn load_traces(dir: &Path) -> Result<Vec<EpisodeTrace>, CliError> {
    trace_paths(dir)?.iter().map(|p| read_trace_file(p).map_err(|e| CliError::trace(p, e))).collect()
}

pub fn load_labels(dir: &Path, id: &str) -> Result<LabelSidecar, CliError> {
    let path = sidecar_path(dir, id);
    if !path.exists() {
        return Err(CliError::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing label sidecar; run `sentinel label` first"),
        ));
    }
    read_json(&path)
}

/// Sidecar labels in the shape the scoring code expects.
pub fn as_labeled(s: &LabelSidecar) -> LabeledEpisode {
    LabeledEpisode {
        labels: s.labels.clone(),
        category: s.category,
        delta_distances: Vec::new(),
        target_indices: Vec::new(),
        truncated_at: s.truncated_at,
    }
}

/// Labeled traces, restricted to one split when asked.
pub fn load_labeled(dir: &Path, split: SplitFilter) -> Result<Vec<(EpisodeTrace, LabelSidecar)>, CliError> {
    let keep: Option<Vec<String>> = match split {
        SplitFilter::All => None,
        SplitFilter::Train | SplitFilter::Val => {
            let want = if split == SplitFilter::Train { Split::Train } else { Split::Val };
            let path = dir.join(MANIFEST);
            if !path.exists() {
                return Err(CliError::invalid(format!("--split needs {}", path.display())));
            }
            let m: Manifest = read_json(&path)?;
            Some(m.episodes.into_iter().filter(|e| e.split == want).map(|e| e.episode_id).collect())
        }
    };
    let mut out = Vec::new();
    for trace in load_traces(dir)? {
        if keep.as_ref().is_some_and(|k| !k.contains(&trace.episode_id)) {
            continue;
        }
        let labels = load_labels(dir, &trace.episode_id)?;
        out.push((trace, labels));
    }
    if out.is_empty() {
        return Err(CliError::invalid("no episodes selected"));
    }
    Ok(out)
}
