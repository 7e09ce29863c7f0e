//! Episode traces and the ATRC binary container.
//!
//! Layout (little-endian, no padding):
//!
//! ```text
//! "ATRC" | version u16 | header_len u32 | header JSON (UTF-8)
//! per step: action code u8, action scalar f32 | pose x,y,z,theta f32
//!           | per stored head (header order): T*N f32, row-major
//! ```
//!
//! Steps carry no explicit index in the body; the reader numbers them
//! `0..stepCount`, so writable traces must number their records the same way.

use std::collections::{BTreeMap, BTreeSet};
use std::f32::consts::PI;
use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ATRC";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("not an ATRC stream: {0}")]
    Format(String),
    #[error("truncated stream: {0}")]
    Truncated(String),
    #[error("invalid trace ({} violation(s)): {}", .0.len(), summarize(.0))]
    Validation(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn summarize(violations: &[Violation]) -> String {
    violations.iter().take(3).map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// One broken invariant. `record` is the index into `EpisodeTrace::records`
/// when the violation is step-local.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub record: Option<usize>,
    pub field: String,
    pub message: String,
}

impl Violation {
    fn header(field: &str, message: impl Into<String>) -> Self {
        Violation { record: None, field: field.to_string(), message: message.into() }
    }

    fn step(record: usize, field: &str, message: impl Into<String>) -> Self {
        Violation { record: Some(record), field: field.to_string(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.record {
            Some(r) => write!(f, "step {r}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

/// Attention head address inside the model. Orders by (layer, head).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HeadId {
    pub layer: u16,
    pub head: u16,
}

impl HeadId {
    pub const fn new(layer: u16, head: u16) -> Self {
        HeadId { layer, head }
    }
}

impl fmt::Display for HeadId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.layer, self.head)
    }
}

impl std::str::FromStr for HeadId {
    type Err = String;

    /// Parses `layer:head`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (l, h) = s.trim().split_once(':').ok_or_else(|| format!("expected layer:head, got {s:?}"))?;
        let layer = l.trim().parse().map_err(|e| format!("bad layer in {s:?}: {e}"))?;
        let head = h.trim().parse().map_err(|e| format!("bad head in {s:?}: {e}"))?;
        Ok(HeadId { layer, head })
    }
}

/// Agent pose as stored in traces.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub theta: f32,
}

impl Pose {
    pub fn new(x: f32, y: f32, z: f32, theta: f32) -> Self {
        Pose { x, y, z, theta }
    }

    /// Planar distance to another pose (z ignored).
    pub fn xy_distance(&self, other: &Pose) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx.hypot(dy)
    }

    /// Planar distance to a waypoint.
    pub fn distance_to(&self, point: [f64; 2]) -> f64 {
        (self.x as f64 - point[0]).hypot(self.y as f64 - point[1])
    }
}

/// Normalizes an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    t
}

/// Mid-level navigation action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value")]
pub enum ActionKind {
    /// Move forward by a distance in meters.
    Forward(f32),
    /// Rotate counter-clockwise by an angle in radians.
    TurnLeft(f32),
    /// Rotate clockwise by an angle in radians.
    TurnRight(f32),
    Stop,
}

impl ActionKind {
    pub fn is_translational(&self) -> bool {
        matches!(self, ActionKind::Forward(_))
    }

    fn code(&self) -> (u8, f32) {
        match *self {
            ActionKind::Forward(d) => (0, d),
            ActionKind::TurnLeft(a) => (1, a),
            ActionKind::TurnRight(a) => (2, a),
            ActionKind::Stop => (3, 0.0),
        }
    }

    fn from_code(code: u8, scalar: f32) -> Option<Self> {
        Some(match code {
            0 => ActionKind::Forward(scalar),
            1 => ActionKind::TurnLeft(scalar),
            2 => ActionKind::TurnRight(scalar),
            3 => ActionKind::Stop,
            _ => return None,
        })
    }
}

/// Row-major instruction-to-frame attention matrix: row k is history frame k
/// (oldest first), column j is instruction token j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl AttentionMatrix {
    /// Builds a matrix from row-major data. Panics if `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data does not match {rows}x{cols}");
        AttentionMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        AttentionMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        AttentionMatrix { rows: rows.len(), cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, k: usize) -> &[f32] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f32] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        // chunks_exact on an empty-column matrix would panic
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn scaled(&self, factor: f32) -> Self {
        AttentionMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// One action step of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub step: u32,
    pub heads: BTreeMap<HeadId, AttentionMatrix>,
    pub pose: Pose,
    pub action: ActionKind,
}

impl AttentionRecord {
    pub fn head(&self, id: HeadId) -> Option<&AttentionMatrix> {
        self.heads.get(&id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub episode_id: String,
    /// Instruction token count N.
    pub tokens: usize,
    /// History frame count T.
    pub frames: usize,
    pub layer_count: u16,
    pub head_count: u16,
    /// Heads present in every record, in file order.
    pub stored_heads: Vec<HeadId>,
    pub records: Vec<AttentionRecord>,
    pub reference_path: Option<Vec<[f64; 2]>>,
}

impl EpisodeTrace {
    pub fn poses(&self) -> Vec<Pose> {
        self.records.iter().map(|r| r.pose).collect()
    }

    pub fn actions(&self) -> Vec<ActionKind> {
        self.records.iter().map(|r| r.action).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    #[serde(rename = "episodeId")]
    episode_id: String,
    #[serde(rename = "N")]
    tokens: usize,
    #[serde(rename = "T")]
    frames: usize,
    #[serde(rename = "L_total")]
    layer_count: u16,
    #[serde(rename = "H_total")]
    head_count: u16,
    #[serde(rename = "storedHeads")]
    stored_heads: Vec<[u16; 2]>,
    #[serde(rename = "stepCount")]
    step_count: usize,
    #[serde(rename = "referencePath", default, skip_serializing_if = "Option::is_none")]
    reference_path: Option<Vec<[f64; 2]>>,
}

/// Checks every trace invariant. Returns an empty list iff the trace is valid.
pub fn validate_trace(trace: &EpisodeTrace) -> Vec<Violation> {
    let mut out = Vec::new();
    if trace.tokens == 0 {
        out.push(Violation::header("N", "instruction token count must be positive"));
    }
    if trace.frames == 0 {
        out.push(Violation::header("T", "frame count must be positive"));
    }
    if trace.records.is_empty() {
        out.push(Violation::header("records", "episode has no steps"));
    }
    if trace.stored_heads.is_empty() {
        out.push(Violation::header("storedHeads", "no heads declared"));
    }
    let mut seen = BTreeSet::new();
    for h in &trace.stored_heads {
        if !seen.insert(*h) {
            out.push(Violation::header("storedHeads", format!("duplicate head {h}")));
        }
        if h.layer >= trace.layer_count || h.head >= trace.head_count {
            out.push(Violation::header(
                "storedHeads",
                format!("head {h} outside {}x{} model", trace.layer_count, trace.head_count),
            ));
        }
    }
    if let Some(path) = &trace.reference_path {
        if path.iter().flatten().any(|c| !c.is_finite()) {
            out.push(Violation::header("referencePath", "non-finite waypoint"));
        }
    }

    let mut prev_step: Option<u32> = None;
    for (i, rec) in trace.records.iter().enumerate() {
        if let Some(p) = prev_step {
            if rec.step <= p {
                out.push(Violation::step(i, "step", format!("step {} does not follow {p}", rec.step)));
            }
        }
        prev_step = Some(rec.step);

        let p = rec.pose;
        if ![p.x, p.y, p.z, p.theta].iter().all(|c| c.is_finite()) {
            out.push(Violation::step(i, "pose", "non-finite coordinate"));
        } else if !(p.theta > -PI && p.theta <= PI) {
            out.push(Violation::step(i, "pose.theta", format!("{} not normalized into (-pi, pi]", p.theta)));
        }

        match rec.action {
            ActionKind::Forward(d) if !(d > 0.0 && d.is_finite()) => {
                out.push(Violation::step(i, "action", format!("forward distance {d} must be positive")))
            }
            ActionKind::TurnLeft(a) | ActionKind::TurnRight(a) if !(a > 0.0 && a.is_finite()) => {
                out.push(Violation::step(i, "action", format!("turn angle {a} must be positive")))
            }
            _ => {}
        }

        if rec.heads.len() != seen.len() || !rec.heads.keys().all(|k| seen.contains(k)) {
            out.push(Violation::step(i, "heads", "record heads differ from storedHeads"));
        }
        for (h, m) in &rec.heads {
            if m.rows() != trace.frames || m.cols() != trace.tokens {
                out.push(Violation::step(
                    i,
                    "heads",
                    format!(
                        "head {h} matrix is {}x{}, expected {}x{}",
                        m.rows(),
                        m.cols(),
                        trace.frames,
                        trace.tokens
                    ),
                ));
                continue;
            }
            if let Some(bad) = m.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                out.push(Violation::step(i, "heads", format!("head {h} has entry {bad}; entries must be finite and >= 0")));
            }
        }
    }
    out
}

/// Serializes `trace` in ATRC layout. Returns the number of bytes written.
pub fn write_trace<W: Write>(trace: &EpisodeTrace, sink: &mut W) -> Result<usize, TraceError> {
    let mut violations = validate_trace(trace);
    for (i, rec) in trace.records.iter().enumerate() {
        if rec.step as usize != i {
            violations.push(Violation::step(i, "step", format!("ATRC steps are numbered from 0; found {}", rec.step)));
        }
    }
    if !violations.is_empty() {
        return Err(TraceError::Validation(violations));
    }

    let header = Header {
        episode_id: trace.episode_id.clone(),
        tokens: trace.tokens,
        frames: trace.frames,
        layer_count: trace.layer_count,
        head_count: trace.head_count,
        stored_heads: trace.stored_heads.iter().map(|h| [h.layer, h.head]).collect(),
        step_count: trace.records.len(),
        reference_path: trace.reference_path.clone(),
    };
    let header_json = serde_json::to_vec(&header).map_err(|e| TraceError::Format(e.to_string()))?;
    let header_len = u32::try_from(header_json.len()).map_err(|_| TraceError::Format("header too large".into()))?;

    let matrix_bytes = trace.frames * trace.tokens * 4;
    let step_bytes = 5 + 16 + trace.stored_heads.len() * matrix_bytes;
    let mut buf = Vec::with_capacity(10 + header_json.len() + step_bytes * trace.records.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&header_len.to_le_bytes());
    buf.extend_from_slice(&header_json);
    for rec in &trace.records {
        let (code, scalar) = rec.action.code();
        buf.push(code);
        buf.extend_from_slice(&scalar.to_le_bytes());
        for c in [rec.pose.x, rec.pose.y, rec.pose.z, rec.pose.theta] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        for h in &trace.stored_heads {
            for v in rec.heads[h].as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    sink.write_all(&buf)?;
    Ok(buf.len())
}

/// Convenience wrapper returning the encoded bytes.
pub fn encode_trace(trace: &EpisodeTrace) -> Result<Vec<u8>, TraceError> {
    let mut out = Vec::new();
    write_trace(trace, &mut out)?;
    Ok(out)
}

struct Cursor<R> {
    inner: R,
}

impl<R: Read> Cursor<R> {
    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<(), TraceError> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => TraceError::Truncated(format!("stream ended inside {what}")),
            _ => TraceError::Io(e),
        })
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N], TraceError> {
        let mut b = [0u8; N];
        self.fill(&mut b, what)?;
        Ok(b)
    }

    fn f32(&mut self, what: &str) -> Result<f32, TraceError> {
        Ok(f32::from_le_bytes(self.array(what)?))
    }
}

/// Decodes an ATRC stream and validates the result.
pub fn read_trace<R: Read>(source: R) -> Result<EpisodeTrace, TraceError> {
    let mut cur = Cursor { inner: source };
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match cur.inner.read(&mut magic[got..])? {
            0 => break,
            n => got += n,
        }
    }
    if got < 4 {
        if magic[..got] != MAGIC[..got] {
            return Err(TraceError::Format(format!("bad magic {:?}", &magic[..got])));
        }
        return Err(TraceError::Truncated("stream ended inside magic".into()));
    }
    if &magic != MAGIC {
        return Err(TraceError::Format(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
    }
    let version = u16::from_le_bytes(cur.array("version")?);
    if version != FORMAT_VERSION {
        return Err(TraceError::Format(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(cur.array("header length")?) as usize;
    let mut header_bytes = vec![0u8; header_len];
    cur.fill(&mut header_bytes, "header")?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| TraceError::Validation(vec![Violation::header("header", e.to_string())]))?;

    let stored_heads: Vec<HeadId> = header.stored_heads.iter().map(|&[l, h]| HeadId::new(l, h)).collect();
    let (frames, tokens) = (header.frames, header.tokens);
    let cells = frames
        .checked_mul(tokens)
        .filter(|c| *c <= u32::MAX as usize)
        .ok_or_else(|| TraceError::Validation(vec![Violation::header("T*N", "matrix dimensions overflow")]))?;

    let mut records = Vec::with_capacity(header.step_count.min(1 << 16));
    let mut raw = vec![0u8; cells * 4];
    for step in 0..header.step_count {
        let what = format!("step {step} of {}", header.step_count);
        let [code] = cur.array::<1>(&what)?;
        let scalar = cur.f32(&what)?;
        let action = ActionKind::from_code(code, scalar).ok_or_else(|| {
            TraceError::Validation(vec![Violation::step(step, "action", format!("unknown action code {code}"))])
        })?;
        let pose = Pose::new(cur.f32(&what)?, cur.f32(&what)?, cur.f32(&what)?, cur.f32(&what)?);
        let mut heads = BTreeMap::new();
        for h in &stored_heads {
            cur.fill(&mut raw, &what)?;
            let data = raw.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
            heads.insert(*h, AttentionMatrix::new(frames, tokens, data));
        }
        records.push(AttentionRecord { step: step as u32, heads, pose, action });
    }

    let mut probe = [0u8; 1];
    if cur.inner.read(&mut probe)? != 0 {
        return Err(TraceError::Validation(vec![Violation::header(
            "stepCount",
            format!("body holds more than the {} declared steps", header.step_count),
        )]));
    }

    let trace = EpisodeTrace {
        episode_id: header.episode_id,
        tokens,
        frames,
        layer_count: header.layer_count,
        head_count: header.head_count,
        stored_heads,
        records,
        reference_path: header.reference_path,
    };
    let violations = validate_trace(&trace);
    if !violations.is_empty() {
        return Err(TraceError::Validation(violations));
    }
    Ok(trace)
}

pub fn read_trace_file(path: &std::path::Path) -> Result<EpisodeTrace, TraceError> {
    let file = std::fs::File::open(path)?;
    read_trace(io::BufReader::new(file))
}

pub fn write_trace_file(trace: &EpisodeTrace, path: &std::path::Path) -> Result<usize, TraceError> {
    let bytes = encode_trace(trace)?;
    std::fs::write(path, &bytes)?;
    Ok(bytes.len())
}
