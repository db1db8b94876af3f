//! JSON model files: a chain, a BMAP/GI/1 queue or a MAP/GI^(a,b)/1 queue,
//! plus solver options.
//!
//! Matrices are arrays of rows. A block sequence lists its explicit blocks
//! from `k_min` upwards and may carry a rank-one tail
//! `M(k) = v wᵀ P(T = k)` beyond them.
//!
//! ```json
//! {
//!   "kind": "bmap-queue",
//!   "bmap": { "c": [[-0.4]], "d": [[[0.4]]] },
//!   "service": { "kind": "pareto", "alpha": 2.5, "scale": 1.5 },
//!   "regime": { "regime": "service-dominant" },
//!   "options": { "levels": 2000 }
//! }
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockseq::{MatrixSeq, SeqError};
use crate::bmapq::{Bmap, QueueError, QueueModel, Regime};
use crate::bulkq::BulkModel;
use crate::gig1core::{ChainError, Gig1Chain};
use crate::heavytail::{DiscreteDist, ServiceDist};

/// Failures while reading or assembling a model.
#[derive(Debug, Error)]
pub enum ModelError {
    /// Not valid JSON or not matching the schema.
    #[error("cannot parse model: {0}")]
    Parse(#[from] serde_json::Error),
    /// Ragged or empty matrix.
    #[error("malformed matrix {name}: {reason}")]
    Matrix {
        /// Field holding the matrix.
        name: String,
        /// What is wrong.
        reason: String,
    },
    /// Sequence assembly failed.
    #[error(transparent)]
    Seq(#[from] SeqError),
    /// Chain assembly failed.
    #[error(transparent)]
    Chain(#[from] ChainError),
    /// Queue assembly failed.
    #[error(transparent)]
    Queue(#[from] QueueError),
}

/// Dense matrix as an array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixSpec(pub Vec<Vec<f64>>);

impl MatrixSpec {
    /// Checks shape and converts.
    pub fn to_matrix(&self, name: &str) -> Result<DMatrix<f64>, ModelError> {
        let bad = |reason: &str| ModelError::Matrix { name: name.to_string(), reason: reason.to_string() };
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, |r| r.len());
        if rows == 0 || cols == 0 {
            return Err(bad("empty"));
        }
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(bad("rows have different lengths"));
        }
        Ok(DMatrix::from_fn(rows, cols, |i, j| self.0[i][j]))
    }

    /// Converts a matrix back to rows.
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        MatrixSpec((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }
}

/// `M(k) = v wᵀ P(T = k)` beyond the explicit blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneSpec {
    /// Column factor.
    pub v: Vec<f64>,
    /// Row factor.
    pub w: Vec<f64>,
    /// Level profile `T`.
    pub dist: DiscreteDist,
}

/// Block sequence starting at `k_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqSpec {
    /// Index of the first block.
    pub k_min: i64,
    /// Explicit blocks.
    #[serde(default)]
    pub head: Vec<MatrixSpec>,
    /// Optional parametric tail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<RankOneSpec>,
}

fn to_seq(name: &str, k_min: i64, head: &[MatrixSpec], tail: &Option<RankOneSpec>) -> Result<MatrixSeq, ModelError> {
    let blocks: Vec<DMatrix<f64>> =
        head.iter().enumerate().map(|(i, b)| b.to_matrix(&format!("{name}[{i}]"))).collect::<Result<_, _>>()?;
    Ok(match tail {
        None => MatrixSeq::finite(k_min, blocks)?,
        Some(t) => MatrixSeq::with_rank_one_tail(
            k_min,
            blocks,
            DVector::from_column_slice(&t.v),
            DVector::from_column_slice(&t.w),
            t.dist.clone(),
        )?,
    })
}

impl SeqSpec {
    /// Builds the sequence.
    pub fn to_seq(&self, name: &str) -> Result<MatrixSeq, ModelError> {
        to_seq(name, self.k_min, &self.head, &self.tail)
    }
}

/// GI/G/1-type chain blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// `B(0)`.
    pub b0: MatrixSpec,
    /// `B(k)`, `k ≥ 1`.
    pub b_up: SeqSpec,
    /// `B(−1), …, B(−b_max)`.
    pub b_down: Vec<MatrixSpec>,
    /// `A(k)`, `k ≥ −b_max`.
    pub a: SeqSpec,
}

impl ChainSpec {
    /// Builds the chain.
    pub fn build(&self) -> Result<Gig1Chain, ModelError> {
        let b_down = self
            .b_down
            .iter()
            .enumerate()
            .map(|(i, b)| b.to_matrix(&format!("b_down[{i}]")))
            .collect::<Result<_, _>>()?;
        Ok(Gig1Chain::new(self.b0.to_matrix("b0")?, self.b_up.to_seq("b_up")?, b_down, self.a.to_seq("a")?)?)
    }
}

/// BMAP with `d[k−1] = D(k)` and an optional rank-one tail beyond.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmapSpec {
    /// `C`.
    pub c: MatrixSpec,
    /// `D(1), D(2), …`.
    #[serde(default)]
    pub d: Vec<MatrixSpec>,
    /// Rank-one tail beyond the listed blocks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_tail: Option<RankOneSpec>,
}

impl BmapSpec {
    /// Builds the BMAP.
    pub fn build(&self) -> Result<Bmap, ModelError> {
        Ok(Bmap::new(self.c.to_matrix("c")?, to_seq("d", 1, &self.d, &self.d_tail)?)?)
    }
}

/// The model proper, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    /// A GI/G/1-type chain given by its blocks.
    Gig1 {
        /// Blocks.
        chain: ChainSpec,
    },
    /// BMAP/GI/1 queue.
    BmapQueue {
        /// Arrival process.
        bmap: BmapSpec,
        /// Service law.
        service: ServiceDist,
        /// Asymptotic regime used by `asymptote`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        regime: Option<Regime>,
    },
    /// MAP/GI^(a,b)/1 queue.
    BulkQueue {
        /// Arrival process; single arrivals only.
        map: BmapSpec,
        /// Service law.
        service: ServiceDist,
        /// Service start threshold.
        a: usize,
        /// Service capacity.
        b: usize,
    },
}

/// Solver options; flags override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Levels solved explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Tolerance on tail ratios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Simulation seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Simulation events per replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<u64>,
    /// Simulation replications.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    /// Tail-ratio window `[lo, hi]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[usize; 2]>,
    /// Truncation level of the block-elimination solve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
}

/// A model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    /// The model.
    #[serde(flatten)]
    pub model: ModelSpec,
    /// Solver options.
    #[serde(default, skip_serializing_if = "is_default")]
    pub options: SolverOptions,
}

fn is_default(o: &SolverOptions) -> bool {
    *o == SolverOptions::default()
}

/// An assembled model.
#[derive(Debug, Clone)]
pub enum Model {
    /// GI/G/1-type chain.
    Chain(Gig1Chain),
    /// BMAP/GI/1 queue with its regime, if given.
    Queue(QueueModel, Option<Regime>),
    /// Bulk-service queue.
    Bulk(BulkModel),
}

impl ModelFile {
    /// Parses a model file.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model files always serialize")
    }

    /// Assembles and validates the model.
    pub fn build(&self) -> Result<Model, ModelError> {
        Ok(match &self.model {
            ModelSpec::Gig1 { chain } => Model::Chain(chain.build()?),
            ModelSpec::BmapQueue { bmap, service, regime } => {
                Model::Queue(QueueModel::new(bmap.build()?, service.clone())?, regime.clone())
            }
            ModelSpec::BulkQueue { map, service, a, b } => {
                Model::Bulk(BulkModel::new(map.build()?, service.clone(), *a, *b)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MM1: &str = r#"{
        "kind": "bmap-queue",
        "bmap": { "c": [[-0.5]], "d": [[[0.5]]] },
        "service": { "kind": "exponential", "rate": 1.0 },
        "options": { "levels": 40 }
    }"#;

    #[test]
    fn round_trips() {
        let f = ModelFile::from_json(MM1).unwrap();
        assert_eq!(ModelFile::from_json(&f.to_json()).unwrap(), f);
        assert!(matches!(f.build().unwrap(), Model::Queue(..)));
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        let bad = MM1.replace("[[-0.5]]", "[[-0.5], [0.1, 0.2]]");
        let f = ModelFile::from_json(&bad).unwrap();
        assert!(matches!(f.build(), Err(ModelError::Matrix { .. })));
    }
}
