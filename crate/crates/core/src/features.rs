//! Character 4-gram features and labeled corpus ingestion.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// Default number of leading bytes that contribute features (35 KiB).
pub const DEFAULT_PREFIX_LIMIT: usize = 35 * 1024;
/// Default size of the hashed feature space.
pub const DEFAULT_HASH_SPACE: u32 = 1_000_000;

/// Sorted, duplicate-free feature indices of one document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SparseBinaryVector {
    indices: Vec<u32>,
    dim: u32,
}

impl SparseBinaryVector {
    /// Validates sortedness, uniqueness and range.
    pub fn new(indices: Vec<u32>, dim: u32) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::Dimension(format!("index {last} >= dim {dim}")));
            }
        }
        Ok(SparseBinaryVector { indices, dim })
    }

    /// Sorts and deduplicates arbitrary indices first.
    pub fn from_unsorted(mut indices: Vec<u32>, dim: u32) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        Self::new(indices, dim)
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: u32) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.indices.iter().map(|&i| w[i as usize]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim as usize];
        for &i in &self.indices {
            out[i as usize] = 1.0;
        }
        out
    }

    /// One line of the debug dump: space-separated indices.
    pub fn dump_line(&self) -> String {
        let parts: Vec<String> = self.indices.iter().map(u32::to_string).collect();
        parts.join(" ")
    }

    pub fn parse_dump_line(line: &str, dim: u32) -> Result<Self> {
        let indices = line
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|e| Error::InvalidArgument(format!("bad index {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indices, dim)
    }
}

/// Binary presence of every 4-byte window within the first `prefix_limit`
/// bytes. Windows pack big-endian into a `u32` that is reduced mod `hash_space`.
pub fn extract_fourgrams(document: &[u8], prefix_limit: usize, hash_space: u32) -> SparseBinaryVector {
    assert!(hash_space >= 1, "hash space must be nonempty");
    let prefix = &document[..document.len().min(prefix_limit)];
    let indices: Vec<u32> = prefix
        .windows(4)
        .map(|w| u32::from_be_bytes([w[0], w[1], w[2], w[3]]) % hash_space)
        .collect();
    SparseBinaryVector::from_unsorted(indices, hash_space).expect("indices reduced mod dim")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusRecord {
    pub path: PathBuf,
    pub label: Label,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub records: Vec<CorpusRecord>,
    pub spam: usize,
    pub ham: usize,
}

impl CorpusManifest {
    pub fn total(&self) -> usize {
        self.spam + self.ham
    }

    pub fn spam_fraction(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            self.spam as f64 / self.total() as f64
        }
    }
}

/// Reads `label_file` (lines `filename<TAB>spam|ham`) and extracts features
/// for each referenced document under `root`, in filename order.
pub fn ingest_corpus(
    root: &Path,
    label_file: &Path,
    prefix_limit: usize,
    hash_space: u32,
) -> Result<(LabeledDataset, CorpusManifest)> {
    let text = fs::read_to_string(label_file)?;
    let mut entries: Vec<(String, Label)> = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (name, label) = line.split_once('\t').ok_or_else(|| {
            Error::Corpus(format!("line {}: expected filename<TAB>label", lineno + 1))
        })?;
        let label = match label.trim() {
            "spam" => Label::Positive,
            "ham" => Label::Negative,
            other => {
                return Err(Error::Corpus(format!(
                    "line {}: unknown label {other:?}",
                    lineno + 1
                )))
            }
        };
        if !seen.insert(name.to_string()) {
            return Err(Error::Corpus(format!("duplicate filename {name:?}")));
        }
        entries.push((name.to_string(), label));
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));

    let mut dataset = LabeledDataset::new(hash_space);
    let mut manifest = CorpusManifest::default();
    for (name, label) in entries {
        let path = root.join(&name);
        let bytes = fs::read(&path)
            .map_err(|e| Error::Corpus(format!("{}: {e}", path.display())))?;
        dataset.push(extract_fourgrams(&bytes, prefix_limit, hash_space), label)?;
        match label {
            Label::Positive => manifest.spam += 1,
            Label::Negative => manifest.ham += 1,
        }
        manifest.records.push(CorpusRecord { path, label });
    }
    Ok((dataset, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_documents_are_empty() {
        assert!(extract_fourgrams(b"abc", DEFAULT_PREFIX_LIMIT, 1_000_000).is_empty());
        assert!(extract_fourgrams(b"", DEFAULT_PREFIX_LIMIT, 1_000_000).is_empty());
    }

    #[test]
    fn hand_enumerated_windows() {
        let v = extract_fourgrams(b"abcd", DEFAULT_PREFIX_LIMIT, 1_000_000);
        assert_eq!(v.indices(), &[0x6162_6364u32 % 1_000_000]);
        assert_eq!(v.indices(), &[837_924]);

        let v = extract_fourgrams(b"abcde", DEFAULT_PREFIX_LIMIT, u32::MAX);
        assert_eq!(v.indices(), &[0x6162_6364, 0x6263_6465]);

        let v = extract_fourgrams(b"aaaaaaa", DEFAULT_PREFIX_LIMIT, u32::MAX);
        assert_eq!(v.nnz(), 1);
    }

    #[test]
    fn sparse_vector_invariants() {
        assert!(SparseBinaryVector::new(vec![1, 1], 5).is_err());
        assert!(SparseBinaryVector::new(vec![2, 1], 5).is_err());
        assert!(SparseBinaryVector::new(vec![5], 5).is_err());
        let v = SparseBinaryVector::from_unsorted(vec![3, 1, 3], 5).unwrap();
        assert_eq!(v.indices(), &[1, 3]);
        assert_eq!(v.dump_line(), "1 3");
        assert_eq!(SparseBinaryVector::parse_dump_line("1 3", 5).unwrap(), v);
    }

    proptest! {
        #[test]
        fn prefix_limit_isolates_tails(
            head in proptest::collection::vec(any::<u8>(), 0..200),
            tail_a in proptest::collection::vec(any::<u8>(), 0..50),
            tail_b in proptest::collection::vec(any::<u8>(), 0..50),
        ) {
            let limit = head.len();
            let a = [head.clone(), tail_a].concat();
            let b = [head, tail_b].concat();
            prop_assert_eq!(extract_fourgrams(&a, limit, 997), extract_fourgrams(&b, limit, 997));
        }

        #[test]
        fn cardinality_bound(doc in proptest::collection::vec(any::<u8>(), 0..300), m in 1u32..500) {
            let limit = 128;
            let v = extract_fourgrams(&doc, limit, m);
            let windows = doc.len().min(limit).saturating_sub(3);
            prop_assert!(v.nnz() <= windows.min(m as usize));
        }
    }

    #[test]
    fn ingest_reads_labels_in_filename_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.eml"), b"hello world").unwrap();
        fs::write(dir.path().join("a.eml"), b"buy cheap pills").unwrap();
        let labels = dir.path().join("labels.tsv");
        fs::write(&labels, "b.eml\tham\na.eml\tspam\n").unwrap();
        let (ds, manifest) = ingest_corpus(dir.path(), &labels, DEFAULT_PREFIX_LIMIT, 1000).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.labels(), vec![Label::Positive, Label::Negative]);
        assert_eq!(manifest.spam, 1);
        assert_eq!(manifest.ham, 1);
        assert!(manifest.records[0].path.ends_with("a.eml"));
    }

    #[test]
    fn ingest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let labels = dir.path().join("labels.tsv");
        fs::write(&labels, "").unwrap();
        let (ds, manifest) = ingest_corpus(dir.path(), &labels, 100, 10).unwrap();
        assert!(ds.is_empty());
        assert_eq!(manifest.total(), 0);

        fs::write(dir.path().join("x"), b"abcd").unwrap();
        fs::write(&labels, "x\tspam\nx\tham\n").unwrap();
        assert!(matches!(ingest_corpus(dir.path(), &labels, 100, 10), Err(Error::Corpus(_))));
        fs::write(&labels, "x\tmaybe\n").unwrap();
        assert!(matches!(ingest_corpus(dir.path(), &labels, 100, 10), Err(Error::Corpus(_))));
        fs::write(&labels, "x spam\n").unwrap();
        assert!(matches!(ingest_corpus(dir.path(), &labels, 100, 10), Err(Error::Corpus(_))));
        fs::write(&labels, "missing\tspam\n").unwrap();
        assert!(matches!(ingest_corpus(dir.path(), &labels, 100, 10), Err(Error::Corpus(_))));
    }
}
