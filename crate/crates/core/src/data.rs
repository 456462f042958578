//! LIBSVM-format ingestion and deterministic stream construction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

/// How raw labels become training targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMap {
    /// Keep labels as read (regression).
    Identity,
    /// Two classes: larger → +1, smaller → −1. More: most frequent class vs rest.
    Auto,
    /// The given raw label → +1, everything else → −1.
    OneVsRest(f64),
    /// Explicit raw → target pairs; unlisted labels are an error.
    Explicit(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub path: PathBuf,
    pub dim: Option<usize>,
    pub shuffle_seed: Option<u64>,
    pub task: Task,
    pub label_map: LabelMap,
    /// Keep only the first `limit` samples of the (shuffled) order.
    pub limit: Option<usize>,
}

impl StreamSpec {
    pub fn new(path: impl Into<PathBuf>, task: Task) -> Self {
        let label_map = match task {
            Task::Classification => LabelMap::Auto,
            Task::Regression => LabelMap::Identity,
        };
        Self { path: path.into(), dim: None, shuffle_seed: None, task, label_map, limit: None }
    }
}

/// A materialized stream plus what is needed to describe it in a run manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
    /// Resolved raw → target label pairs (empty for identity).
    pub label_map: Vec<(f64, f64)>,
    /// SHA-256 of the file bytes.
    pub digest: String,
}

fn parse_sparse(line: &str, line_no: usize) -> Result<(f64, Vec<(usize, f64)>)> {
    let err = |message: String| Error::Parse { line: line_no, message };
    let content = line.split('#').next().unwrap_or("");
    let mut tokens = content.split_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let label: f64 = label_tok
        .parse()
        .map_err(|_| err(format!("bad label '{label_tok}'")))?;
    if !label.is_finite() {
        return Err(err(format!("non-finite label '{label_tok}'")));
    }
    let mut entries = Vec::new();
    let mut last = 0usize;
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("malformed feature '{tok}'")))?;
        let idx: usize = idx.parse().map_err(|_| err(format!("bad index in '{tok}'")))?;
        let val: f64 = val.parse().map_err(|_| err(format!("bad value in '{tok}'")))?;
        if idx == 0 {
            return Err(err("indices are 1-based".into()));
        }
        if idx <= last {
            return Err(err(format!("index {idx} does not increase past {last}")));
        }
        if !val.is_finite() {
            return Err(err(format!("non-finite value in '{tok}'")));
        }
        last = idx;
        entries.push((idx, val));
    }
    Ok((label, entries))
}

fn densify(entries: &[(usize, f64)], dim: usize, line_no: usize) -> Result<Vec<f64>> {
    let mut x = vec![0.0; dim];
    for &(idx, val) in entries {
        if idx > dim {
            return Err(Error::Parse {
                line: line_no,
                message: format!("index {idx} exceeds dimension {dim}"),
            });
        }
        x[idx - 1] = val;
    }
    Ok(x)
}

/// Parse one `<label> <index>:<value> ...` line into a dense sample of dimension `dim`.
pub fn parse_libsvm_line(line: &str, dim: usize, line_no: usize) -> Result<Sample> {
    let (label, entries) = parse_sparse(line, line_no)?;
    Ok(Sample { features: densify(&entries, dim, line_no)?, label })
}

/// Inverse of [`parse_libsvm_line`]; zeros are omitted.
pub fn format_libsvm_line(sample: &Sample) -> String {
    let mut out = format!("{}", sample.label);
    for (i, v) in sample.features.iter().enumerate() {
        if *v != 0.0 {
            out.push_str(&format!(" {}:{}", i + 1, v));
        }
    }
    out
}

/// Seeded Fisher–Yates permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn resolve_labels(task: Task, map: &LabelMap, labels: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &l in labels {
        counts.entry(ordered_key(l)).or_insert((l, 0)).1 += 1;
    }
    let mut distinct: Vec<(f64, usize)> = counts.into_values().collect();
    distinct.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let resolved = match map {
        LabelMap::Identity => {
            if task == Task::Classification {
                for (l, _) in &distinct {
                    if *l != 1.0 && *l != -1.0 {
                        return Err(Error::Config(format!(
                            "identity label map needs ±1 labels for classification, found {l}"
                        )));
                    }
                }
            }
            Vec::new()
        }
        LabelMap::Auto => {
            if distinct.len() == 2 {
                vec![(distinct[0].0, -1.0), (distinct[1].0, 1.0)]
            } else {
                let positive = distinct
                    .iter()
                    .fold(None::<(f64, usize)>, |best, &(l, c)| match best {
                        Some((_, bc)) if bc >= c => best,
                        _ => Some((l, c)),
                    })
                    .map(|(l, _)| l);
                distinct
                    .iter()
                    .map(|&(l, _)| (l, if Some(l) == positive { 1.0 } else { -1.0 }))
                    .collect()
            }
        }
        LabelMap::OneVsRest(pos) => distinct
            .iter()
            .map(|&(l, _)| (l, if l == *pos { 1.0 } else { -1.0 }))
            .collect(),
        LabelMap::Explicit(pairs) => {
            for (l, _) in &distinct {
                if !pairs.iter().any(|(raw, _)| raw == l) {
                    return Err(Error::Config(format!("label {l} missing from explicit label map")));
                }
            }
            pairs.clone()
        }
    };
    Ok(resolved)
}

fn ordered_key(v: f64) -> u64 {
    // Labels are finite; normalize -0.0 so it shares a bucket with 0.0.
    (if v == 0.0 { 0.0f64 } else { v }).to_bits()
}

/// Read, label-map and (optionally) shuffle a LIBSVM file.
pub fn build_stream(spec: &StreamSpec) -> Result<Dataset> {
    let ingest = |message: String| Error::Ingestion { path: spec.path.clone(), message };
    let bytes = std::fs::read(&spec.path).map_err(|e| ingest(e.to_string()))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = std::str::from_utf8(&bytes).map_err(|e| ingest(e.to_string()))?;

    let mut parsed = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (label, entries) = parse_sparse(line, i + 1)?;
        parsed.push((i + 1, label, entries));
    }
    if parsed.is_empty() {
        return Err(ingest("no samples".into()));
    }
    let max_idx = parsed
        .iter()
        .filter_map(|(_, _, e)| e.last().map(|(i, _)| *i))
        .max()
        .unwrap_or(0);
    let dim = match spec.dim {
        Some(d) if d < max_idx => {
            return Err(ingest(format!("declared dimension {d} but file uses index {max_idx}")))
        }
        Some(d) => d,
        None => max_idx,
    };
    if dim == 0 {
        return Err(ingest("samples have no features".into()));
    }

    let labels: Vec<f64> = parsed.iter().map(|(_, l, _)| *l).collect();
    let label_map = match spec.task {
        Task::Regression => Vec::new(),
        Task::Classification => resolve_labels(spec.task, &spec.label_map, &labels)?,
    };
    let map_label = |l: f64| -> f64 {
        label_map
            .iter()
            .find(|(raw, _)| *raw == l)
            .map_or(l, |(_, t)| *t)
    };

    let mut samples = Vec::with_capacity(parsed.len());
    for (line_no, label, entries) in &parsed {
        samples.push(Sample { features: densify(entries, dim, *line_no)?, label: map_label(*label) });
    }
    if let Some(seed) = spec.shuffle_seed {
        let perm = permutation(samples.len(), seed);
        let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
        samples = perm.iter().map(|&i| slots[i].take().expect("permutation")).collect();
    }
    if let Some(limit) = spec.limit {
        samples.truncate(limit);
    }
    Ok(Dataset { samples, dim, label_map, digest })
}

/// Concatenate several LIBSVM files into one (e.g. a train/test pair).
pub fn concat_files(parts: &[&Path], out: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for p in parts {
        let mut bytes = std::fs::read(p)?;
        if !bytes.ends_with(b"\n") {
            bytes.push(b'\n');
        }
        buf.extend(bytes);
    }
    crate::experiment::write_atomic(out, &buf)
}

/// Per-dimension min-max scaling to `[0, 1]`, fitted on a buffer only.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    lo: Vec<f64>,
    span: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or_else(|| Error::invalid("empty scaling buffer"))?;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for r in rows {
            for j in 0..d {
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
        }
        let span = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
        Ok(Self { lo, span })
    }

    pub fn transform(&self, x: &mut [f64]) {
        for j in 0..x.len() {
            x[j] = if self.span[j] > 0.0 { (x[j] - self.lo[j]) / self.span[j] } else { 0.0 };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn parse_direct_read() {
        let s = parse_libsvm_line("+1 1:0.5 3:2", 3, 1).unwrap();
        assert_eq!(s.label, 1.0);
        assert_eq!(s.features, vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = ["2 4:1", "1 2:1 2:3", "1 3:1 2:3", "x 1:1", "1 1-1", "1 0:2", "", "1 1:nan"];
        for (i, line) in cases.iter().enumerate() {
            match parse_libsvm_line(line, 3, 40 + i) {
                Err(Error::Parse { line, .. }) => assert_eq!(line, 40 + i),
                other => panic!("{line:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn parse_ignores_trailing_comment() {
        let s = parse_libsvm_line("-1 2:1.5 # note", 2, 1).unwrap();
        assert_eq!(s.features, vec![0.0, 1.5]);
    }

    proptest! {
        #[test]
        fn format_then_parse_is_identity(
            label in prop::sample::select(vec![-1.0, 1.0, 0.0, 3.5, -17.25]),
            feats in prop::collection::vec(prop_oneof![Just(0.0), -1e6f64..1e6], 1..40),
        ) {
            let s = Sample::new(feats.clone(), label);
            let back = parse_libsvm_line(&format_libsvm_line(&s), feats.len(), 1).unwrap();
            prop_assert_eq!(back, s);
        }
    }

    fn write_file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn stream_order_and_shuffle() {
        let lines: Vec<String> = (0..50).map(|i| format!("{} 1:{}", i % 3, i)).collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let f = write_file(&refs);

        let mut spec = StreamSpec::new(f.path(), Task::Regression);
        let plain = build_stream(&spec).unwrap();
        let order: Vec<f64> = plain.samples.iter().map(|s| s.features[0]).collect();
        assert_eq!(order, (0..50).map(f64::from).collect::<Vec<_>>());

        spec.shuffle_seed = Some(9);
        let a = build_stream(&spec).unwrap();
        let b = build_stream(&spec).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_ne!(a.samples, plain.samples);
        let mut la: Vec<f64> = a.samples.iter().map(|s| s.label).collect();
        let mut lp: Vec<f64> = plain.samples.iter().map(|s| s.label).collect();
        la.sort_by(f64::total_cmp);
        lp.sort_by(f64::total_cmp);
        assert_eq!(la, lp);
        assert_eq!(a.digest, plain.digest);
    }

    #[test]
    fn label_maps() {
        let f = write_file(&["0 1:1", "1 1:2", "0 1:3"]);
        let ds = build_stream(&StreamSpec::new(f.path(), Task::Classification)).unwrap();
        assert_eq!(ds.samples.iter().map(|s| s.label).collect::<Vec<_>>(), vec![-1.0, 1.0, -1.0]);

        let f = write_file(&["3 1:1", "1 1:2", "3 1:3", "2 1:1"]);
        let ds = build_stream(&StreamSpec::new(f.path(), Task::Classification)).unwrap();
        assert_eq!(ds.samples.iter().map(|s| s.label).collect::<Vec<_>>(), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(ds.label_map, vec![(1.0, -1.0), (2.0, -1.0), (3.0, 1.0)]);
    }

    #[test]
    fn ingestion_errors() {
        let missing = StreamSpec::new("/definitely/not/here.svm", Task::Regression);
        assert!(matches!(build_stream(&missing), Err(Error::Ingestion { .. })));

        let empty = write_file(&[]);
        assert!(matches!(
            build_stream(&StreamSpec::new(empty.path(), Task::Regression)),
            Err(Error::Ingestion { .. })
        ));

        let f = write_file(&["1 5:1"]);
        let mut spec = StreamSpec::new(f.path(), Task::Regression);
        spec.dim = Some(3);
        assert!(matches!(build_stream(&spec), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn permutation_is_permutation() {
        let mut p = permutation(100, 4);
        p.sort_unstable();
        assert_eq!(p, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn scaler_uses_buffer_range() {
        let s = MinMaxScaler::fit(&[vec![0.0, 5.0], vec![2.0, 5.0]]).unwrap();
        let mut x = vec![1.0, 7.0];
        s.transform(&mut x);
        assert_eq!(x, vec![0.5, 0.0]);
    }
}
