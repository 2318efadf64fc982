//! Logit dumps and dataset manifests.
//!
//! A dump is one directory per sample:
//!
//! ```text
//! <sample>/meta.json     UTF-8 JSON, sorted keys, schema_version = 1
//! <sample>/natural.f32   L_n × W row-major little-endian binary32, no header
//! <sample>/reversed.f32  L_r × W, same encoding
//! ```
//!
//! `W` is the vocabulary size, or `M + 1` for dumps that keep only the top
//! `M` probabilities per row plus one bucket holding the remaining mass
//! (`truncated_top_m = M`). Spans are half-open `[start, end)` row ranges
//! covering the video tokens of each run.
//!
//! The manifest is JSON lines, one [`SampleManifest`] per line, with paths
//! relative to the manifest file.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::entropy::{softmax_f32, ProbDist};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DTYPE: &str = "f32le";
pub const META_FILE: &str = "meta.json";
pub const NATURAL_FILE: &str = "natural.f32";
pub const REVERSED_FILE: &str = "reversed.f32";

/// Whether matrix rows hold raw logits or probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Logits,
    Probs,
}

/// A half-open row range `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// Row-major `rows × cols` matrix of binary32 values, kept bit-exact.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged matrix rows".into()));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn from_le_bytes(rows: usize, cols: usize, bytes: &[u8]) -> Self {
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Matrix { rows, cols, data }
    }
}

/// Model outputs of one sample under natural and reversed frame order.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitDump {
    pub sample_id: String,
    pub vocab_size: usize,
    pub natural: Matrix,
    pub reversed: Matrix,
    pub video_span_natural: Span,
    pub video_span_reversed: Span,
    /// Token id at every natural-run position.
    pub target_token_ids_natural: Option<Vec<u32>>,
    /// Token id at every reversed-run position.
    pub target_token_ids_reversed: Option<Vec<u32>>,
    pub value_kind: ValueKind,
    pub frame_count: usize,
    pub truncated_top_m: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DumpMeta {
    schema_version: u32,
    dtype: String,
    sample_id: String,
    vocab_size: usize,
    natural_len: usize,
    reversed_len: usize,
    video_span_natural: Span,
    video_span_reversed: Span,
    #[serde(default)]
    target_token_ids_natural: Option<Vec<u32>>,
    #[serde(default)]
    target_token_ids_reversed: Option<Vec<u32>>,
    value_kind: ValueKind,
    frame_count: usize,
    #[serde(default)]
    truncated_top_m: Option<usize>,
}

impl LogitDump {
    /// Stored row width: the vocabulary, or `M + 1` for truncated dumps.
    pub fn row_width(&self) -> usize {
        self.truncated_top_m.map_or(self.vocab_size, |m| m + 1)
    }

    /// Checks the structural invariants: shapes, spans, targets.
    pub fn validate(&self) -> Result<()> {
        let width = self.row_width();
        if self.vocab_size == 0 {
            return Err(Error::InvalidInput("vocab_size must be positive".into()));
        }
        if let Some(m) = self.truncated_top_m {
            if m == 0 || m >= self.vocab_size {
                return Err(Error::InvalidInput(format!(
                    "truncated_top_m = {m} must lie in [1, vocab_size)"
                )));
            }
            if self.value_kind != ValueKind::Probs {
                return Err(Error::InvalidInput("truncated dumps must store probabilities".into()));
            }
        }
        for (name, m) in [("natural", &self.natural), ("reversed", &self.reversed)] {
            if m.cols != width {
                return Err(Error::InvalidInput(format!(
                    "{name} matrix has {} columns, expected {width}",
                    m.cols
                )));
            }
        }
        for (name, span, len) in [
            ("natural", self.video_span_natural, self.natural.rows),
            ("reversed", self.video_span_reversed, self.reversed.rows),
        ] {
            if span.start >= span.end || span.end > len {
                return Err(Error::SpanError(format!(
                    "{name} span [{}, {}) is empty or exceeds {len} rows",
                    span.start, span.end
                )));
            }
        }
        if self.video_span_natural.len() != self.video_span_reversed.len() {
            return Err(Error::SpanError(format!(
                "natural span has {} rows but reversed span has {}",
                self.video_span_natural.len(),
                self.video_span_reversed.len()
            )));
        }
        for (name, ids, len) in [
            ("natural", &self.target_token_ids_natural, self.natural.rows),
            ("reversed", &self.target_token_ids_reversed, self.reversed.rows),
        ] {
            let Some(ids) = ids else { continue };
            if ids.len() != len {
                return Err(Error::InvalidInput(format!(
                    "{name} target ids have length {}, expected {len}",
                    ids.len()
                )));
            }
            if let Some(bad) = ids.iter().find(|&&id| id as usize >= self.vocab_size) {
                return Err(Error::InvalidInput(format!(
                    "{name} target id {bad} outside vocabulary of {}",
                    self.vocab_size
                )));
            }
        }
        Ok(())
    }

    fn meta(&self) -> DumpMeta {
        DumpMeta {
            schema_version: SCHEMA_VERSION,
            dtype: DTYPE.to_string(),
            sample_id: self.sample_id.clone(),
            vocab_size: self.vocab_size,
            natural_len: self.natural.rows,
            reversed_len: self.reversed.rows,
            video_span_natural: self.video_span_natural,
            video_span_reversed: self.video_span_reversed,
            target_token_ids_natural: self.target_token_ids_natural.clone(),
            target_token_ids_reversed: self.target_token_ids_reversed.clone(),
            value_kind: self.value_kind,
            frame_count: self.frame_count,
            truncated_top_m: self.truncated_top_m,
        }
    }
}

/// Canonical `meta.json` text: sorted keys, two-space indent, trailing newline.
fn meta_text(meta: &DumpMeta) -> String {
    // serde_json's default map is ordered by key
    let value = serde_json::to_value(meta).expect("dump metadata serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("JSON values always serialize");
    text.push('\n');
    text
}

/// Writes a dump directory, creating it if needed.
pub fn write_dump(dump: &LogitDump, dir: &Path) -> Result<()> {
    dump.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(path, e))
    };
    write(META_FILE, meta_text(&dump.meta()).as_bytes())?;
    write(NATURAL_FILE, &dump.natural.to_le_bytes())?;
    write(REVERSED_FILE, &dump.reversed.to_le_bytes())?;
    Ok(())
}

fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::CorruptDump {
            path: path.to_path_buf(),
            reason: format!("expected {expected} bytes ({rows}x{cols} f32), found {}", bytes.len()),
        });
    }
    Ok(Matrix::from_le_bytes(rows, cols, &bytes))
}

/// Reads and validates a dump directory.
pub fn read_dump(dir: &Path) -> Result<LogitDump> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let schema_err = |reason: String| Error::SchemaError {
        path: meta_path.clone(),
        reason,
    };
    let meta: DumpMeta = serde_json::from_str(&text).map_err(|e| schema_err(e.to_string()))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(schema_err(format!("unsupported schema_version {}", meta.schema_version)));
    }
    if meta.dtype != DTYPE {
        return Err(schema_err(format!("unsupported dtype {:?}", meta.dtype)));
    }
    let width = meta.truncated_top_m.map_or(meta.vocab_size, |m| m + 1);
    let natural = read_matrix(&dir.join(NATURAL_FILE), meta.natural_len, width)?;
    let reversed = read_matrix(&dir.join(REVERSED_FILE), meta.reversed_len, width)?;
    let dump = LogitDump {
        sample_id: meta.sample_id,
        vocab_size: meta.vocab_size,
        natural,
        reversed,
        video_span_natural: meta.video_span_natural,
        video_span_reversed: meta.video_span_reversed,
        target_token_ids_natural: meta.target_token_ids_natural,
        target_token_ids_reversed: meta.target_token_ids_reversed,
        value_kind: meta.value_kind,
        frame_count: meta.frame_count,
        truncated_top_m: meta.truncated_top_m,
    };
    dump.validate().map_err(|e| match e {
        Error::SpanError(_) => e,
        other => schema_err(other.to_string()),
    })?;
    Ok(dump)
}

/// Probability rows of a run plus the next-token target of each row.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSlices {
    pub probs: Vec<ProbDist>,
    /// `targets[k]` is the token following row `k`. Shorter than `probs` by
    /// one when the last row has no successor in the sequence.
    pub targets: Option<Vec<usize>>,
}

/// Video-span slices of both runs.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoSlices {
    pub natural: RunSlices,
    pub reversed: RunSlices,
}

/// Stored probability rows are binary32 sums over possibly huge vocabularies,
/// so they only need to be normalized this closely before rescaling.
const PROBS_ROW_TOLERANCE: f64 = 1e-3;

fn row_dist(row: &[f32], kind: ValueKind) -> Result<ProbDist> {
    match kind {
        ValueKind::Logits => softmax_f32(row),
        ValueKind::Probs => {
            let probs: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidInput("negative or non-finite probability in dump row".into()));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > PROBS_ROW_TOLERANCE {
                return Err(Error::InvalidInput(format!("dump probability row sums to {total}")));
            }
            ProbDist::new(probs.into_iter().map(|p| p / total).collect())
        }
    }
}

/// Next-token targets for rows `span`: the id at position `k + 1`.
fn span_targets(ids: &[u32], span: Span) -> Vec<usize> {
    (span.start..span.end)
        .filter_map(|k| ids.get(k + 1).map(|&id| id as usize))
        .collect()
}

fn run_slices(matrix: &Matrix, span: Span, ids: Option<&Vec<u32>>, dump: &LogitDump) -> Result<RunSlices> {
    let probs = (span.start..span.end)
        .map(|k| row_dist(matrix.row(k), dump.value_kind))
        .collect::<Result<Vec<_>>>()?;
    // targets index the full vocabulary, which truncated rows no longer have
    let targets = match (ids, dump.truncated_top_m) {
        (Some(ids), None) => Some(span_targets(ids, span)),
        _ => None,
    };
    Ok(RunSlices { probs, targets })
}

/// Probability distributions of the video-token rows of both runs.
pub fn extract_video_slices(dump: &LogitDump) -> Result<VideoSlices> {
    let (ns, rs) = (dump.video_span_natural, dump.video_span_reversed);
    if ns.len() != rs.len() {
        return Err(Error::SliceLengthMismatch {
            natural: ns.len(),
            reversed: rs.len(),
        });
    }
    Ok(VideoSlices {
        natural: run_slices(&dump.natural, ns, dump.target_token_ids_natural.as_ref(), dump)?,
        reversed: run_slices(&dump.reversed, rs, dump.target_token_ids_reversed.as_ref(), dump)?,
    })
}

/// Every row of the natural run, for baselines evaluated on the full sequence.
pub fn extract_full_natural(dump: &LogitDump) -> Result<RunSlices> {
    let span = Span::new(0, dump.natural.rows);
    run_slices(&dump.natural, span, dump.target_token_ids_natural.as_ref(), dump)
}

/// Ground-truth membership label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Member,
    Nonmember,
}

impl Label {
    pub fn is_member(self) -> bool {
        self == Label::Member
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Member => "member",
            Label::Nonmember => "nonmember",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "member" => Ok(Label::Member),
            "nonmember" => Ok(Label::Nonmember),
            other => Err(Error::InvalidInput(format!("unknown label {other:?}"))),
        }
    }
}

/// One manifest record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleManifest {
    pub sample_id: String,
    pub label: Label,
    pub dump_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
    #[serde(default)]
    pub total_frames: usize,
}

/// Reads a JSON-lines manifest and resolves its paths against the
/// manifest's directory. Blank lines are skipped.
pub fn load_manifest(path: &Path) -> Result<Vec<SampleManifest>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::ManifestError {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let mut record: SampleManifest = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        if !seen.insert(record.sample_id.clone()) {
            return Err(err(format!("duplicate sample_id {:?}", record.sample_id)));
        }
        record.dump_dir = base.join(&record.dump_dir);
        record.frames_dir = record.frames_dir.map(|d| base.join(d));
        records.push(record);
    }
    Ok(records)
}

/// Writes records one per line; paths are written as given.
pub fn write_manifest(path: &Path, records: &[SampleManifest]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("manifest records serialize"));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> LogitDump {
        LogitDump {
            sample_id: "s0".into(),
            vocab_size: 4,
            natural: Matrix::zeros(3, 4),
            reversed: Matrix::zeros(3, 4),
            video_span_natural: Span::new(0, 2),
            video_span_reversed: Span::new(1, 3),
            target_token_ids_natural: Some(vec![0, 1, 2]),
            target_token_ids_reversed: None,
            value_kind: ValueKind::Logits,
            frame_count: 2,
            truncated_top_m: None,
        }
    }

    #[test]
    fn minimal_dump_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path().join("s0");
        write_dump(&minimal(), &d).unwrap();
        let back = read_dump(&d).unwrap();
        assert_eq!(back, minimal());
        assert!(back.natural.data().iter().all(|&v| v == 0.0));

        let copy = dir.path().join("copy");
        write_dump(&back, &copy).unwrap();
        for f in [META_FILE, NATURAL_FILE, REVERSED_FILE] {
            assert_eq!(fs::read(d.join(f)).unwrap(), fs::read(copy.join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn meta_keys_are_sorted() {
        let text = meta_text(&minimal().meta());
        let keys: Vec<&str> = text
            .lines()
            .filter_map(|l| l.strip_prefix("  \""))
            .map(|l| l.split('"').next().unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(keys.contains(&"schema_version") && keys.contains(&"dtype"));
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        write_dump(&minimal(), dir.path()).unwrap();
        let path = dir.path().join(NATURAL_FILE);
        let mut bytes = fs::read(&path).unwrap();
        bytes.pop();
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_dump(dir.path()), Err(Error::CorruptDump { .. })));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        write_dump(&minimal(), dir.path()).unwrap();
        let path = dir.path().join(META_FILE);
        let mut meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        meta.as_object_mut().unwrap().remove("vocab_size");
        fs::write(&path, meta.to_string()).unwrap();
        assert!(matches!(read_dump(dir.path()), Err(Error::SchemaError { .. })));
    }

    #[test]
    fn span_out_of_bounds_is_span_error() {
        let dir = tempfile::tempdir().unwrap();
        write_dump(&minimal(), dir.path()).unwrap();
        let path = dir.path().join(META_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("\"video_span_reversed\": [\n    1,\n    3\n  ]", "\"video_span_reversed\": [2, 4]");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_dump(dir.path()), Err(Error::SpanError(_))));
    }

    #[test]
    fn invalid_dumps_are_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = minimal();
        d.video_span_reversed = Span::new(0, 3);
        assert!(matches!(write_dump(&d, dir.path()), Err(Error::SpanError(_))));
        let mut d = minimal();
        d.target_token_ids_natural = Some(vec![0, 1, 4]);
        assert!(write_dump(&d, dir.path()).is_err());
    }

    #[test]
    fn slices_follow_spans_and_shift_targets() {
        let mut d = minimal();
        d.natural = Matrix::zeros(5, 4);
        d.reversed = Matrix::zeros(5, 4);
        d.video_span_natural = Span::new(1, 4);
        d.video_span_reversed = Span::new(2, 5);
        d.target_token_ids_natural = Some(vec![3, 2, 1, 0, 3]);
        d.target_token_ids_reversed = Some(vec![0, 1, 2, 3, 0]);
        let s = extract_video_slices(&d).unwrap();
        assert_eq!(s.natural.probs.len(), 3);
        assert_eq!(s.reversed.probs.len(), 3);
        assert_eq!(s.natural.probs[0], ProbDist::uniform(4));
        assert_eq!(s.natural.targets, Some(vec![1, 0, 3]));
        // the reversed span ends the sequence, so its last row has no target
        assert_eq!(s.reversed.targets, Some(vec![3, 0]));
    }

    #[test]
    fn probability_rows_pass_through() {
        let mut d = minimal();
        let rows = vec![vec![0.1f32, 0.2, 0.3, 0.4], vec![0.25; 4], vec![1.0, 0.0, 0.0, 0.0]];
        d.value_kind = ValueKind::Probs;
        d.natural = Matrix::from_rows(&rows).unwrap();
        d.reversed = Matrix::from_rows(&rows).unwrap();
        let s = extract_video_slices(&d).unwrap();
        for (dist, row) in s.natural.probs.iter().zip(&rows) {
            for (p, &want) in dist.probs().iter().zip(row) {
                assert!((p - f64::from(want)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn unequal_spans_are_a_slice_mismatch() {
        let mut d = minimal();
        d.video_span_reversed = Span::new(0, 3);
        assert!(matches!(
            extract_video_slices(&d),
            Err(Error::SliceLengthMismatch { natural: 2, reversed: 3 })
        ));
    }

    #[test]
    fn truncated_dumps_use_m_plus_one_columns() {
        let dir = tempfile::tempdir().unwrap();
        let mut d = minimal();
        d.vocab_size = 100;
        d.truncated_top_m = Some(3);
        d.value_kind = ValueKind::Probs;
        let row = vec![0.5f32, 0.2, 0.1, 0.2];
        d.natural = Matrix::from_rows(&vec![row.clone(); 3]).unwrap();
        d.reversed = Matrix::from_rows(&vec![row; 3]).unwrap();
        write_dump(&d, dir.path()).unwrap();
        let back = read_dump(dir.path()).unwrap();
        assert_eq!(back.row_width(), 4);
        let s = extract_video_slices(&back).unwrap();
        assert_eq!(s.natural.probs[0].len(), 4);
        assert_eq!(s.natural.targets, None);
    }

    #[test]
    fn manifest_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let lines = [
            r#"{"sample_id":"a","label":"member","dump_dir":"dumps/a","total_frames":30}"#,
            r#"{"sample_id":"b","label":"member","dump_dir":"dumps/b","frames_dir":"frames/b"}"#,
            "",
            r#"{"sample_id":"c","label":"nonmember","dump_dir":"dumps/c"}"#,
            r#"{"sample_id":"d","label":"nonmember","dump_dir":"dumps/d"}"#,
        ];
        fs::write(&path, lines.join("\n")).unwrap();
        let records = load_manifest(&path).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[0].dump_dir, dir.path().join("dumps/a"));
        assert_eq!(records[1].frames_dir, Some(dir.path().join("frames/b")));
        assert_eq!(records[0].total_frames, 30);

        fs::write(&path, [lines[0], lines[0]].join("\n")).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::ManifestError { line: 2, .. })));
        fs::write(&path, r#"{"sample_id":"a","label":"maybe","dump_dir":"x"}"#).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::ManifestError { line: 1, .. })));
    }

    #[test]
    fn large_manifest_matches_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        let records: Vec<SampleManifest> = (0..1000)
            .map(|i| SampleManifest {
                sample_id: format!("v{i:04}"),
                label: if i % 3 == 0 { Label::Member } else { Label::Nonmember },
                dump_dir: format!("dumps/v{i:04}").into(),
                frames_dir: None,
                total_frames: i,
            })
            .collect();
        write_manifest(&path, &records).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let members = text.lines().filter(|l| l.contains("\"member\"")).count();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded.len(), text.lines().count());
        assert_eq!(loaded.iter().filter(|r| r.label.is_member()).count(), members);
    }
}
