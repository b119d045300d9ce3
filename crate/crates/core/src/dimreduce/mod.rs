//! Feature-space reduction.
//!
//! The data-independent methods (random-hyperplane LSH, hash-space folding,
//! uniform feature sampling) are fully determined by the [`ReductionSpec`],
//! so every data owner reproduces the same mapping without sharing data.
//! Document-frequency pruning and multinomial sampling need corpus
//! statistics. PCA is the data-dependent baseline and is never run on
//! private training data.

mod lsh;
mod pca;
mod select;

use std::fmt;
use std::str::FromStr;

pub use lsh::{hyperplane_entry, lsh_project, lsh_signature};
pub use pca::{jacobi_eigen, pca_fit, pca_project, PcaState};
pub use select::{document_frequencies, fit_selection, DfSampler};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Lsh,
    HashSpace,
    DfPrune,
    Uniform,
    Multinomial,
    Pca,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Lsh,
        Method::HashSpace,
        Method::DfPrune,
        Method::Uniform,
        Method::Multinomial,
        Method::Pca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lsh => "lsh",
            Method::HashSpace => "hashspace",
            Method::DfPrune => "dfprune",
            Method::Uniform => "uniform",
            Method::Multinomial => "multinomial",
            Method::Pca => "pca",
        }
    }

    /// Whether the mapping depends only on the [`ReductionSpec`], never on data.
    pub fn is_data_independent(self) -> bool {
        matches!(self, Method::Lsh | Method::HashSpace | Method::Uniform)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown reduction method {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionSpec {
    pub method: Method,
    pub source_dim: u32,
    pub target_dim: u32,
    pub seed: u64,
    /// Minimum document frequency kept by `dfprune`.
    pub df_threshold: u32,
    /// Modulus of `hashspace`; equals `target_dim` for that method.
    pub hash_modulus: u32,
}

impl ReductionSpec {
    pub fn new(method: Method, source_dim: u32, target_dim: u32, seed: u64) -> Result<Self> {
        let spec = ReductionSpec {
            method,
            source_dim,
            target_dim,
            seed,
            df_threshold: 1,
            hash_modulus: target_dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_dim > self.source_dim {
            return Err(Error::InvalidArgument(format!(
                "target dim {} exceeds source dim {}",
                self.target_dim, self.source_dim
            )));
        }
        if self.method == Method::HashSpace && (self.hash_modulus == 0 || self.hash_modulus != self.target_dim) {
            return Err(Error::InvalidArgument(
                "hashspace needs hash_modulus == target_dim >= 1".into(),
            ));
        }
        Ok(())
    }

    fn header(&self) -> String {
        format!(
            "method={}\nsource_dim={}\ntarget_dim={}\nseed={}\ndf_threshold={}\nhash_modulus={}\n",
            self.method,
            self.source_dim,
            self.target_dim,
            self.seed,
            self.df_threshold,
            self.hash_modulus
        )
    }

    fn parse_header(lines: &[&str]) -> Result<Self> {
        let get = |key: &str| -> Result<String> {
            lines
                .iter()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_string)
                .ok_or_else(|| Error::Config(format!("projection header lacks {key}")))
        };
        let num = |v: String, key: &str| -> Result<u64> {
            v.parse()
                .map_err(|_| Error::Config(format!("bad {key} value {v:?}")))
        };
        let spec = ReductionSpec {
            method: get("method")?.parse()?,
            source_dim: num(get("source_dim")?, "source_dim")? as u32,
            target_dim: num(get("target_dim")?, "target_dim")? as u32,
            seed: num(get("seed")?, "seed")?,
            df_threshold: num(get("df_threshold")?, "df_threshold")? as u32,
            hash_modulus: num(get("hash_modulus")?, "hash_modulus")? as u32,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `i -> i mod m`, deduplicated.
pub fn hashspace_reduce(spec: &ReductionSpec, x: &SparseBinaryVector) -> Result<SparseBinaryVector> {
    if spec.method != Method::HashSpace {
        return Err(Error::InvalidArgument("spec is not a hashspace spec".into()));
    }
    let m = spec.hash_modulus;
    SparseBinaryVector::from_unsorted(x.indices().iter().map(|&i| i % m).collect(), m)
}

/// Everything needed to map a document into the reduced space.
#[derive(Clone, Debug, PartialEq)]
pub enum ProjectionState {
    Lsh(ReductionSpec),
    HashSpace(ReductionSpec),
    /// `dfprune`, `uniform` and `multinomial`: kept feature indices.
    Selection {
        spec: ReductionSpec,
        indices: Vec<u32>,
    },
    Pca {
        spec: ReductionSpec,
        pca: PcaState,
    },
}

/// A reduced document.
#[derive(Clone, Debug, PartialEq)]
pub enum Reduced {
    Binary(SparseBinaryVector),
    Dense(Vec<f64>),
}

impl ProjectionState {
    /// Fits the state. Data-independent methods ignore `corpus`.
    pub fn fit(spec: &ReductionSpec, corpus: &LabeledDataset) -> Result<Self> {
        spec.validate()?;
        match spec.method {
            Method::Lsh => Ok(ProjectionState::Lsh(spec.clone())),
            Method::HashSpace => Ok(ProjectionState::HashSpace(spec.clone())),
            Method::DfPrune | Method::Uniform | Method::Multinomial => {
                let docs: Vec<&SparseBinaryVector> = corpus.iter().map(|(x, _)| x).collect();
                Ok(ProjectionState::Selection {
                    spec: spec.clone(),
                    indices: fit_selection(spec, &docs)?,
                })
            }
            Method::Pca => {
                let rows: Vec<Vec<f64>> = corpus.iter().map(|(x, _)| x.to_dense()).collect();
                let pca = pca_fit(&rows, spec.target_dim as usize, spec.seed)?;
                Ok(ProjectionState::Pca {
                    spec: spec.clone(),
                    pca,
                })
            }
        }
    }

    pub fn spec(&self) -> &ReductionSpec {
        match self {
            ProjectionState::Lsh(s) | ProjectionState::HashSpace(s) => s,
            ProjectionState::Selection { spec, .. } | ProjectionState::Pca { spec, .. } => spec,
        }
    }

    /// Dimension of the reduced space.
    pub fn output_dim(&self) -> u32 {
        match self {
            ProjectionState::Selection { indices, .. } => indices.len() as u32,
            other => other.spec().target_dim,
        }
    }

    pub fn project(&self, x: &SparseBinaryVector) -> Result<Reduced> {
        match self {
            ProjectionState::Lsh(spec) => Ok(Reduced::Binary(lsh_project(spec, x)?)),
            ProjectionState::HashSpace(spec) => Ok(Reduced::Binary(hashspace_reduce(spec, x)?)),
            ProjectionState::Selection { indices, .. } => {
                let kept = x
                    .indices()
                    .iter()
                    .filter_map(|i| indices.binary_search(i).ok().map(|p| p as u32))
                    .collect();
                Ok(Reduced::Binary(SparseBinaryVector::new(kept, indices.len() as u32)?))
            }
            ProjectionState::Pca { pca, .. } => Ok(Reduced::Dense(pca_project(pca, &x.to_dense())?)),
        }
    }

    /// Projects a whole dataset; only binary-valued methods qualify, since
    /// the training protocol consumes binary features.
    pub fn project_dataset(&self, data: &LabeledDataset) -> Result<LabeledDataset> {
        if let ProjectionState::Pca { .. } = self {
            return Err(Error::InvalidArgument(
                "PCA output is real-valued and cannot feed the binary-feature protocol".into(),
            ));
        }
        let mut out = LabeledDataset::new(self.output_dim());
        for (x, y) in data.iter() {
            match self.project(x)? {
                Reduced::Binary(v) => out.push(v, *y)?,
                Reduced::Dense(_) => unreachable!("checked above"),
            }
        }
        Ok(out)
    }

    /// Spec header, a `--` separator, then the fitted body.
    pub fn to_text(&self) -> String {
        let mut out = self.spec().header();
        out.push_str("--\n");
        match self {
            ProjectionState::Lsh(_) | ProjectionState::HashSpace(_) => {}
            ProjectionState::Selection { indices, .. } => {
                let parts: Vec<String> = indices.iter().map(u32::to_string).collect();
                out.push_str(&parts.join(" "));
                out.push('\n');
            }
            ProjectionState::Pca { pca, .. } => {
                let line = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
                out.push_str(&line(&pca.mean));
                out.push('\n');
                out.push_str(&line(&pca.eigenvalues));
                out.push('\n');
                for row in &pca.basis {
                    out.push_str(&line(row));
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let sep = lines
            .iter()
            .position(|l| *l == "--")
            .ok_or_else(|| Error::Config("projection state lacks '--' separator".into()))?;
        let spec = ReductionSpec::parse_header(&lines[..sep])?;
        let body = &lines[sep + 1..];
        let floats = |line: &str| -> Result<Vec<f64>> {
            line.split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Config(format!("bad number {t:?}"))))
                .collect()
        };
        match spec.method {
            Method::Lsh => Ok(ProjectionState::Lsh(spec)),
            Method::HashSpace => Ok(ProjectionState::HashSpace(spec)),
            Method::DfPrune | Method::Uniform | Method::Multinomial => {
                let indices = body
                    .first()
                    .map(|l| SparseBinaryVector::parse_dump_line(l, spec.source_dim))
                    .transpose()?
                    .map(|v| v.indices().to_vec())
                    .unwrap_or_default();
                Ok(ProjectionState::Selection { spec, indices })
            }
            Method::Pca => {
                if body.len() < 2 {
                    return Err(Error::Config("PCA body truncated".into()));
                }
                let mean = floats(body[0])?;
                let eigenvalues = floats(body[1])?;
                let basis = body[2..].iter().map(|l| floats(l)).collect::<Result<Vec<_>>>()?;
                Ok(ProjectionState::Pca {
                    spec,
                    pca: PcaState {
                        mean,
                        basis,
                        eigenvalues,
                    },
                })
            }
        }
    }
}
