//! Sparse vectors and LIBSVM-format data handling.
//!
//! Feature indices are 1-based in files and 0-based in memory. Vectors store
//! strictly increasing indices and never hold an explicit zero.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Sparse vector as parallel index/value arrays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from (index, value) pairs: sorts by index and drops
    /// exact zeros. Indices must be unique.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if let Some(&last) = indices.last() {
                assert!(i > last, "duplicate feature index {i}");
            }
            if v != 0.0 {
                indices.push(i);
                values.push(v);
            }
        }
        SparseVector { indices, values }
    }

    pub fn empty() -> Self {
        SparseVector::default()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest stored index plus one; 0 for the empty vector.
    pub fn dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Dot product by merge-walk over the sorted index lists.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = 0.0;
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Squared Euclidean distance by merge-walk over the sorted index lists.
pub fn squared_distance(a: &SparseVector, b: &SparseVector) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => {
                acc += a.values[i] * a.values[i];
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                acc += b.values[j] * b.values[j];
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let d = a.values[i] - b.values[j];
                acc += d * d;
                i += 1;
                j += 1;
            }
        }
    }
    while i < a.indices.len() {
        acc += a.values[i] * a.values[i];
        i += 1;
    }
    while j < b.indices.len() {
        acc += b.values[j] * b.values[j];
        j += 1;
    }
    acc
}

/// Linear combination `c1*a + c2*b` over the union of indices, dropping
/// coordinates that come out exactly zero.
pub fn blend(c1: f64, a: &SparseVector, c2: f64, b: &SparseVector) -> SparseVector {
    let mut indices = Vec::with_capacity(a.nnz() + b.nnz());
    let mut values = Vec::with_capacity(a.nnz() + b.nnz());
    let mut push = |i: usize, v: f64| {
        if v != 0.0 {
            indices.push(i);
            values.push(v);
        }
    };
    let (mut i, mut j) = (0, 0);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => {
                push(a.indices[i], c1 * a.values[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                push(b.indices[j], c2 * b.values[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                push(a.indices[i], c1 * a.values[i] + c2 * b.values[j]);
                i += 1;
                j += 1;
            }
        }
    }
    while i < a.indices.len() {
        push(a.indices[i], c1 * a.values[i]);
        i += 1;
    }
    while j < b.indices.len() {
        push(b.indices[j], c2 * b.values[j]);
        j += 1;
    }
    SparseVector { indices, values }
}

/// One labeled training point.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Always +1 or -1.
    pub label: f64,
    pub features: SparseVector,
}

impl Example {
    /// Renders the example in LIBSVM text form with 1-based indices.
    pub fn to_libsvm_line(&self) -> String {
        let mut line = String::from(if self.label > 0.0 { "+1" } else { "-1" });
        for (i, v) in self.features.iter() {
            line.push_str(&format!(" {}:{}", i + 1, v));
        }
        line
    }
}

/// Parses one LIBSVM record. Text after `#` is a comment. The raw label is
/// mapped to +1 when positive and -1 otherwise. Feature indices are 1-based
/// in the text; duplicates are an error.
pub fn parse_libsvm_record(line: &str) -> Result<Example> {
    let bad = |message: &str| Error::Record {
        message: message.to_string(),
        content: line.to_string(),
    };
    let text = line.split('#').next().unwrap_or("").trim();
    let mut tokens = text.split_whitespace();
    let raw_label = tokens.next().ok_or_else(|| bad("empty record"))?;
    let raw_label: f64 = raw_label
        .parse()
        .map_err(|_| bad(&format!("unparseable label {raw_label:?}")))?;
    let label = if raw_label > 0.0 { 1.0 } else { -1.0 };

    let mut pairs: Vec<(usize, f64)> = Vec::new();
    for tok in tokens {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| bad(&format!("feature {tok:?} is not index:value")))?;
        let idx: usize = idx
            .parse()
            .map_err(|_| bad(&format!("unparseable feature index {idx:?}")))?;
        if idx < 1 {
            return Err(bad("feature index must be >= 1"));
        }
        let val: f64 = val
            .parse()
            .map_err(|_| bad(&format!("unparseable feature value {val:?}")))?;
        if pairs.iter().any(|&(i, _)| i == idx - 1) {
            return Err(bad(&format!("duplicate feature index {idx}")));
        }
        pairs.push((idx - 1, val));
    }
    Ok(Example {
        label,
        features: SparseVector::from_pairs(pairs),
    })
}

/// A labeled dataset with its ambient dimension (max feature index + 1).
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub dim: usize,
}

impl Dataset {
    pub fn from_examples(examples: Vec<Example>) -> Self {
        let dim = examples.iter().map(|e| e.features.dim()).max().unwrap_or(0);
        Dataset { examples, dim }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Writes the dataset in LIBSVM text form, one record per line.
    pub fn save_libsvm(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&e.to_libsvm_line());
            out.push('\n');
        }
        let mut f = File::create(path).map_err(io_err)?;
        f.write_all(out.as_bytes()).map_err(io_err)
    }
}

/// Loads a LIBSVM text file. Blank lines and pure-comment lines are skipped;
/// any malformed line fails with its 1-based line number.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut examples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.split('#').next().unwrap_or("").trim().is_empty() {
            continue;
        }
        let example = parse_libsvm_record(&line).map_err(|e| Error::File {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        examples.push(example);
    }
    Ok(Dataset::from_examples(examples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(pairs: &[(usize, f64)]) -> SparseVector {
        SparseVector::from_pairs(pairs.to_vec())
    }

    #[test]
    fn parse_basic_record() {
        let e = parse_libsvm_record("+1 3:0.5 7:-2").unwrap();
        assert_eq!(e.label, 1.0);
        assert_eq!(e.features, sv(&[(2, 0.5), (6, -2.0)]));
    }

    #[test]
    fn parse_label_only_record() {
        let e = parse_libsvm_record("-1 ").unwrap();
        assert_eq!(e.label, -1.0);
        assert!(e.features.is_empty());
    }

    #[test]
    fn parse_nonpositive_label_maps_to_minus_one() {
        // Raw label 0 is not positive, so it becomes -1.
        let e = parse_libsvm_record("0 1:1.0").unwrap();
        assert_eq!(e.label, -1.0);
        assert_eq!(e.features, sv(&[(0, 1.0)]));
    }

    #[test]
    fn parse_strips_comments() {
        let e = parse_libsvm_record("+1 1:2 # measured twice").unwrap();
        assert_eq!(e.features, sv(&[(0, 2.0)]));
    }

    #[test]
    fn parse_drops_explicit_zeros() {
        let e = parse_libsvm_record("+1 2:0.0 5:1").unwrap();
        assert_eq!(e.features, sv(&[(4, 1.0)]));
    }

    #[test]
    fn parse_rejects_malformed_records() {
        assert!(parse_libsvm_record("").is_err());
        assert!(parse_libsvm_record("abc 1:1").is_err());
        assert!(parse_libsvm_record("+1 0:1").is_err()); // 1-based on disk
        assert!(parse_libsvm_record("+1 2:1 2:3").is_err()); // duplicate
        assert!(parse_libsvm_record("+1 2:xyz").is_err());
        assert!(parse_libsvm_record("+1 2").is_err());
    }

    #[test]
    fn squared_distance_hand_computed() {
        // a = {1:1, 3:2}, b = {3:1, 4:-1}: 1^2 + (2-1)^2 + 1^2 = 3.
        let a = sv(&[(1, 1.0), (3, 2.0)]);
        let b = sv(&[(3, 1.0), (4, -1.0)]);
        assert_eq!(squared_distance(&a, &b), 3.0);
        assert_eq!(squared_distance(&a, &a), 0.0);
        assert_eq!(squared_distance(&a, &SparseVector::empty()), 5.0);
    }

    #[test]
    fn dot_and_norm() {
        let a = sv(&[(0, 2.0), (2, -1.0)]);
        let b = sv(&[(2, 3.0), (9, 1.0)]);
        assert_eq!(a.dot(&b), -3.0);
        assert_eq!(a.norm_sq(), 5.0);
        assert_eq!(a.dim(), 3);
    }

    #[test]
    fn blend_takes_union_and_drops_zeros() {
        let a = sv(&[(0, 2.0)]);
        let b = sv(&[(1, 4.0)]);
        assert_eq!(blend(0.5, &a, 0.5, &b), sv(&[(0, 1.0), (1, 2.0)]));
        // 1*a - 1*a cancels exactly and the coordinate disappears.
        assert!(blend(1.0, &a, -1.0, &a).is_empty());
    }

    #[test]
    fn load_small_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.libsvm");
        std::fs::write(&path, "+1 1:1 3:2\n# comment line\n\n-1 2:0.5\n").unwrap();
        let data = load_libsvm(&path).unwrap();
        assert_eq!(data.len(), 2);
        assert_eq!(data.dim, 3);
        assert_eq!(data.examples[0].features, sv(&[(0, 1.0), (2, 2.0)]));
        assert_eq!(data.examples[1].label, -1.0);
    }

    #[test]
    fn load_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.libsvm");
        std::fs::write(&path, "").unwrap();
        let data = load_libsvm(&path).unwrap();
        assert_eq!(data.len(), 0);
        assert_eq!(data.dim, 0);
    }

    #[test]
    fn load_reports_offending_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.libsvm");
        std::fs::write(&path, "+1 1:1\n+1 0:9\n-1 2:1\n").unwrap();
        let err = load_libsvm(&path).unwrap_err().to_string();
        assert!(err.contains(":2:"), "no line number in {err:?}");
    }

    #[test]
    fn load_missing_file_is_io_error() {
        assert!(load_libsvm(Path::new("/nonexistent/x.libsvm")).is_err());
    }

    #[test]
    fn round_trip_line() {
        let e = parse_libsvm_record("-1 2:0.25 10:-3.5").unwrap();
        assert_eq!(e.to_libsvm_line(), "-1 2:0.25 10:-3.5");
        assert_eq!(parse_libsvm_record(&e.to_libsvm_line()).unwrap(), e);
    }

    prop_compose! {
        fn arb_sparse()(pairs in proptest::collection::btree_map(1usize..60, -8.0f64..8.0, 0..12)) -> SparseVector {
            SparseVector::from_pairs(pairs.into_iter().filter(|&(_, v)| v != 0.0).collect())
        }
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_nonnegative(a in arb_sparse(), b in arb_sparse()) {
            let d = squared_distance(&a, &b);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d.to_bits(), squared_distance(&b, &a).to_bits());
        }

        #[test]
        fn libsvm_line_round_trips(label in prop_oneof![Just(1.0), Just(-1.0)], features in arb_sparse()) {
            let e = Example { label, features };
            let back = parse_libsvm_record(&e.to_libsvm_line()).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
