//! Feature matrices and the interface shared by all feature extractors.

use serde::{Deserialize, Serialize};

use crate::noise::{NoiseConfig, Shots};
use crate::{Error, Result};

/// Real matrix of measured observables, one row per input timestep.
///
/// The last column is always the constant bias 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>, // row-major
    column_labels: Vec<String>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, column_labels: Vec<String>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = column_labels.len();
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for row in &rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "feature row of length {} under {} labels",
                    row.len(),
                    n_cols
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            values,
            column_labels,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_labels(&self) -> &[String] {
        &self.column_labels
    }

    /// V * w.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.cols, "weight length mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(w).map(|(v, wk)| v * wk).sum())
            .collect()
    }

    /// V^T V + lambda I, row-major, cols x cols.
    pub fn gram_regularized(&self, lambda: f64) -> Vec<f64> {
        let d = self.cols;
        let mut g = vec![0.0f64; d * d];
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let vi = row[i];
                if vi == 0.0 {
                    continue;
                }
                for j in i..d {
                    g[i * d + j] += vi * row[j];
                }
            }
        }
        for i in 0..d {
            g[i * d + i] += lambda;
            for j in 0..i {
                g[i * d + j] = g[j * d + i];
            }
        }
        g
    }

    /// V^T y.
    pub fn t_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "target length mismatch");
        let mut out = vec![0.0f64; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v * yr;
            }
        }
        out
    }
}

/// Extraction phase, used to derive independent noise streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Encode,
    Decode,
    Reconstruct,
}

impl Phase {
    pub fn stream_index(self) -> u64 {
        match self {
            Phase::Encode => 0,
            Phase::Decode => 1,
            Phase::Reconstruct => 2,
        }
    }
}

/// Anything that maps an input sequence to a feature matrix.
///
/// Implemented by the quantum reservoir and by the baseline circuit
/// extractors, so the protocol solver is agnostic to the feature origin.
pub trait FeatureSource {
    /// Extract one feature matrix with `inputs.len()` rows.
    fn features(
        &self,
        inputs: &[f64],
        noise: &NoiseConfig,
        shots: Shots,
        rng: &mut rand_chacha::ChaCha12Rng,
    ) -> Result<FeatureMatrix>;

    /// Number of feature columns produced under `noise`.
    fn feature_dim(&self, noise: &NoiseConfig) -> usize;

    /// Stable identifier used to derive per-extractor noise streams; must
    /// differ between the two extractors of one protocol run.
    fn stream_id(&self) -> u64;
}
