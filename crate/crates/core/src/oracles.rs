//! Independent reference classifiers used to cross-check the measurement
//! pipeline.
//!
//! [`bayes_posterior`] is plain counting Bayes on categorical data.
//! [`kernel_form_predict`] keeps every training sample and forms
//! `ρ'_Y ∝ Σ_i |⟨ψ_X(x⋆)|ψ_X(x_i)⟩|² |y_i⟩⟨y_i|` directly. Neither touches a
//! training density matrix.

use crate::data::LabeledDataset;
use crate::error::{QmcError, Result};
use crate::features::Encoder;
use crate::qstate::{DensityMatrix, SquareMatrix, StateVector};
use crate::trainer::label_dictionary;

/// Minimum total kernel weight for a kernel-form prediction.
const KERNEL_WEIGHT_EPS: f64 = 1e-300;

/// Joint counts of a categorical input `x ∈ 1..=m` and a class `y ∈ 0..ℓ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteJoint {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl DiscreteJoint {
    /// Counts `(x, y)` pairs, `x` 1-based and `y` 0-based.
    pub fn from_pairs(pairs: &[(usize, usize)], categories: usize, classes: usize) -> Result<Self> {
        if pairs.is_empty() {
            return Err(QmcError::EmptyTraining);
        }
        let mut counts = vec![vec![0u64; classes]; categories];
        for &(x, y) in pairs {
            if x == 0 || x > categories {
                return Err(QmcError::InvalidCategory {
                    value: x as f64,
                    categories,
                });
            }
            if y >= classes {
                return Err(QmcError::InvalidCategory {
                    value: y as f64,
                    categories: classes,
                });
            }
            counts[x - 1][y] += 1;
        }
        Ok(Self {
            counts,
            n: pairs.len() as u64,
        })
    }

    pub fn count(&self, x: usize, y: usize) -> u64 {
        self.counts[x - 1][y]
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn categories(&self) -> usize {
        self.counts.len()
    }
}

/// `P(y | x⋆) = count(x⋆, y) / Σ_y count(x⋆, y)`.
pub fn bayes_posterior(joint: &DiscreteJoint, x_star: usize) -> Result<Vec<f64>> {
    if x_star == 0 || x_star > joint.categories() {
        return Err(QmcError::InvalidCategory {
            value: x_star as f64,
            categories: joint.categories(),
        });
    }
    let row = &joint.counts[x_star - 1];
    let total: u64 = row.iter().sum();
    if total == 0 {
        return Err(QmcError::ZeroSupport { support: 0.0 });
    }
    Ok(row.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Per-label sums of `|⟨ψ_X(x⋆)|ψ_X(x_i)⟩|²` in first-appearance label order.
fn kernel_weights(data: &LabeledDataset, encoder: &Encoder, x_star: &[f64]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(QmcError::EmptyTraining);
    }
    let (labels, remapped) = label_dictionary(data);
    let query = encoder.encode(x_star)?;
    let mut weights = vec![0.0; labels.len()];
    for (x, &y) in data.rows().zip(&remapped) {
        weights[y] += query.overlap_sq(&encoder.encode(x)?)?;
    }
    Ok(weights)
}

/// Kernel-weighted mixture of the training labels' states, unit trace.
///
/// Rows and columns follow the first-appearance label order of `data`, the
/// same order a model trained on `data` uses.
pub fn kernel_form_predict(data: &LabeledDataset, encoder: &Encoder, x_star: &[f64]) -> Result<DensityMatrix> {
    let weights = kernel_weights(data, encoder, x_star)?;
    let total: f64 = weights.iter().sum();
    if total <= KERNEL_WEIGHT_EPS {
        return Err(QmcError::ZeroSupport { support: total });
    }
    Ok(DensityMatrix::diagonal(
        &weights.iter().map(|w| w / total).collect::<Vec<_>>(),
    ))
}

/// `(1/n) Σ_i |⟨ψ_X(x⋆)|ψ_X(x_i)⟩|²`, which equals the support `Tr[πρπ]` of
/// the mixed training state.
pub fn kernel_form_support(data: &LabeledDataset, encoder: &Encoder, x_star: &[f64]) -> Result<f64> {
    Ok(kernel_weights(data, encoder, x_star)?.iter().sum::<f64>() / data.len() as f64)
}

fn encode_all(data: &LabeledDataset, encoder: &Encoder) -> Result<Vec<StateVector>> {
    if data.is_empty() {
        return Err(QmcError::EmptyTraining);
    }
    data.rows().map(|x| encoder.encode(x)).collect()
}

/// Complex Gram matrix `G_ij = ⟨ψ_X(x_i)|ψ_X(x_j)⟩`.
pub fn gram_matrix(data: &LabeledDataset, encoder: &Encoder) -> Result<SquareMatrix> {
    let states = encode_all(data, encoder)?;
    let n = states.len();
    let mut entries = Vec::with_capacity(n * n);
    for a in &states {
        for b in &states {
            entries.push(a.inner(b)?);
        }
    }
    SquareMatrix::from_entries(n, entries)
}

/// `|k(x_i, x_j)|²` for every pair of training rows.
pub fn gram_kernel(data: &LabeledDataset, encoder: &Encoder) -> Result<Vec<Vec<f64>>> {
    let states = encode_all(data, encoder)?;
    states
        .iter()
        .map(|a| states.iter().map(|b| a.overlap_sq(b)).collect())
        .collect()
}
