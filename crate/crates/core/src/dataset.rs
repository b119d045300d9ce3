use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;

/// Class label; spam is `+1`, ham is `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> i64 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.sign() as f64
    }

    pub fn from_sign(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::InvalidArgument(format!("label must be +1 or -1, got {other}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabeledDataset {
    instances: Vec<(SparseBinaryVector, Label)>,
    dim: u32,
}

impl LabeledDataset {
    pub fn new(dim: u32) -> Self {
        LabeledDataset {
            instances: Vec::new(),
            dim,
        }
    }

    pub fn from_instances(dim: u32, instances: Vec<(SparseBinaryVector, Label)>) -> Result<Self> {
        let mut ds = Self::new(dim);
        for (x, y) in instances {
            ds.push(x, y)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, x: SparseBinaryVector, y: Label) -> Result<()> {
        if let Some(&last) = x.indices().last() {
            if last >= self.dim {
                return Err(Error::Dimension(format!(
                    "feature index {last} >= dataset dim {}",
                    self.dim
                )));
            }
        }
        self.instances.push((x, y));
        Ok(())
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[(SparseBinaryVector, Label)] {
        &self.instances
    }

    pub fn iter(&self) -> impl Iterator<Item = &(SparseBinaryVector, Label)> {
        self.instances.iter()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.instances.iter().map(|(_, y)| *y).collect()
    }

    pub fn positives(&self) -> usize {
        self.instances
            .iter()
            .filter(|(_, y)| *y == Label::Positive)
            .count()
    }

    /// The instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        LabeledDataset {
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
            dim: self.dim,
        }
    }

    /// Consecutive blocks of `size` instances; the last one may be shorter.
    pub fn blocks(&self, size: usize) -> impl Iterator<Item = LabeledDataset> + '_ {
        assert!(size >= 1, "block size must be >= 1");
        self.instances.chunks(size).map(move |chunk| LabeledDataset {
            instances: chunk.to_vec(),
            dim: self.dim,
        })
    }

    /// Splits into the first `n` instances and the rest.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        (
            LabeledDataset {
                instances: self.instances[..n].to_vec(),
                dim: self.dim,
            },
            LabeledDataset {
                instances: self.instances[n..].to_vec(),
                dim: self.dim,
            },
        )
    }

    /// Concatenation of two datasets over the same feature space.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("{} vs {}", self.dim, other.dim)));
        }
        let mut instances = self.instances.clone();
        instances.extend(other.instances.iter().cloned());
        Ok(LabeledDataset {
            instances,
            dim: self.dim,
        })
    }

    /// Text form: a `dim <d>` line, then one `+1|-1<TAB>indices` line per
    /// instance.
    pub fn to_text(&self) -> String {
        let mut out = format!("dim {}\n", self.dim);
        for (x, y) in &self.instances {
            out.push_str(if *y == Label::Positive { "+1\t" } else { "-1\t" });
            out.push_str(&x.dump_line());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let dim = lines
            .next()
            .and_then(|l| l.strip_prefix("dim "))
            .and_then(|d| d.trim().parse().ok())
            .ok_or_else(|| Error::Corpus("dataset must start with 'dim <d>'".into()))?;
        let mut ds = Self::new(dim);
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (label, rest) = line.split_once('\t').unwrap_or((line, ""));
            let y = match label.trim() {
                "+1" | "1" => Label::Positive,
                "-1" => Label::Negative,
                other => return Err(Error::Corpus(format!("line {}: bad label {other:?}", lineno + 2))),
            };
            ds.push(SparseBinaryVector::parse_dump_line(rest, dim)?, y)?;
        }
        Ok(ds)
    }

    /// Largest number of active features in any instance.
    pub fn max_nnz(&self) -> usize {
        self.instances.iter().map(|(x, _)| x.nnz()).max().unwrap_or(0)
    }
}
