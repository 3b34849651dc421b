//! Prediction by projective measurement and partial trace.
//!
//! For a query `x⋆` the reference pipeline builds
//! `π = |ψ_X(x⋆)⟩⟨ψ_X(x⋆)| ⊗ Id_ℓ`, measures `ρ' = πρπ / Tr[πρπ]` and
//! returns `ρ'_Y = Tr_X[ρ']`. Because of the product structure of `π`,
//!
//! ```text
//! (ρ'_Y)_ab ∝ Σ_ij conj(ψ_i) ρ[(i,a),(j,b)] ψ_j
//! ```
//!
//! which the fast path evaluates in `O(k²ℓ²)` without forming `π` or `ρ'`.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{accuracy, LabeledDataset};
use crate::error::{QmcError, Result};
use crate::qstate::{
    outer_product, partial_trace_out_x, project_and_renormalize, BipartiteShape, DensityMatrix, SquareMatrix,
    StateVector, C64, SUPPORT_EPS, ZERO,
};
use crate::trainer::{TrainedModel, TrainingMode};

/// Output-subsystem state for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    /// `ρ'_Y`, an `ℓ×ℓ` density matrix.
    pub rho_y: DensityMatrix,
    /// Diagonal of `rho_y`.
    pub probabilities: Vec<f64>,
    /// Index of the predicted class in the model's label list.
    pub class_index: usize,
    pub label: String,
    /// `Tr[πρπ]` before normalization.
    pub support: f64,
}

/// Which implementation of the measurement to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictPath {
    #[default]
    Fast,
    /// Materializes `π` and `πρπ`; `O((kℓ)³)`, kept as a reference.
    Naive,
}

/// `|ψ⟩⟨ψ| ⊗ Id_ℓ` as a full `kℓ×kℓ` matrix.
pub fn prediction_operator(x_state: &StateVector, shape: BipartiteShape) -> Result<SquareMatrix> {
    if x_state.dim() != shape.dim_x {
        return Err(QmcError::ShapeMismatch {
            expected: shape.dim_x,
            actual: x_state.dim(),
        });
    }
    Ok(outer_product(x_state)
        .into_matrix()
        .kron(&SquareMatrix::identity(shape.dim_y)))
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict_label(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

fn finish(model: &TrainedModel, rho_y: DensityMatrix, support: f64) -> PredictionResult {
    let probabilities = rho_y.diagonal_probabilities();
    let class_index = predict_label(&probabilities);
    PredictionResult {
        rho_y,
        probabilities,
        class_index,
        label: model.labels[class_index].clone(),
        support,
    }
}

/// Reference pipeline: encode, build `π`, measure, trace out X.
pub fn predict_density_naive(model: &TrainedModel, x_star: &[f64]) -> Result<PredictionResult> {
    let x_state = model.encoder.encode(x_star)?;
    predict_state_naive(model, &x_state)
}

pub fn predict_state_naive(model: &TrainedModel, x_state: &StateVector) -> Result<PredictionResult> {
    let pi = prediction_operator(x_state, model.shape)?;
    let measured = project_and_renormalize(&model.rho, &pi)?;
    let rho_y = partial_trace_out_x(&measured.state, model.shape)?;
    Ok(finish(model, rho_y, measured.probability))
}

/// Contraction of `ρ_train` against `ψ_X(x⋆)` on both sides.
pub fn predict_density_fast(model: &TrainedModel, x_star: &[f64]) -> Result<PredictionResult> {
    let x_state = model.encoder.encode(x_star)?;
    predict_state_fast(model, &x_state)
}

pub fn predict_state_fast(model: &TrainedModel, x_state: &StateVector) -> Result<PredictionResult> {
    let shape = model.shape;
    if x_state.dim() != shape.dim_x {
        return Err(QmcError::ShapeMismatch {
            expected: shape.dim_x,
            actual: x_state.dim(),
        });
    }
    let l = shape.dim_y;
    let psi: Vec<(usize, C64)> = x_state
        .amplitudes()
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, a)| *a != ZERO)
        .collect();
    let mut reduced = vec![ZERO; l * l];
    if model.mode == TrainingMode::Classical {
        // ρ is diagonal: only i = j, a = b survive
        for &(i, amp) in &psi {
            for a in 0..l {
                let p = shape.index(i, a);
                reduced[a * l + a] += amp.norm_sqr() * model.rho.get(p, p);
            }
        }
    } else {
        let mut contracted = vec![ZERO; l];
        for &(i, amp_i) in &psi {
            let weight = amp_i.conj();
            for a in 0..l {
                let row = model.rho.matrix().row(shape.index(i, a));
                contracted.iter_mut().for_each(|c| *c = ZERO);
                for &(j, amp_j) in &psi {
                    let block = &row[j * l..(j + 1) * l];
                    for (c, r) in contracted.iter_mut().zip(block) {
                        *c += r * amp_j;
                    }
                }
                for (b, c) in contracted.iter().enumerate() {
                    reduced[a * l + b] += weight * c;
                }
            }
        }
    }
    let support: f64 = (0..l).map(|a| reduced[a * l + a].re).sum();
    if support <= SUPPORT_EPS * model.rho.trace().abs() {
        return Err(QmcError::ZeroSupport { support });
    }
    let inv = 1.0 / support;
    reduced.iter_mut().for_each(|v| *v *= inv);
    Ok(finish(model, DensityMatrix::from_entries(l, reduced)?, support))
}

pub fn predict_with(model: &TrainedModel, x_star: &[f64], path: PredictPath) -> Result<PredictionResult> {
    match path {
        PredictPath::Fast => predict_density_fast(model, x_star),
        PredictPath::Naive => predict_density_naive(model, x_star),
    }
}

/// Fast-path prediction for one query.
pub fn predict(model: &TrainedModel, x_star: &[f64]) -> Result<PredictionResult> {
    predict_density_fast(model, x_star)
}

/// Predicts every row; failures are reported per row, in input order.
pub fn predict_batch<R>(model: &TrainedModel, xs: &[R], path: PredictPath) -> Vec<Result<PredictionResult>>
where
    R: AsRef<[f64]> + Sync,
{
    xs.par_iter()
        .map(|x| predict_with(model, x.as_ref(), path))
        .collect()
}

/// What a batch reports for a query without support: every class equally likely.
pub fn uniform_probabilities(num_classes: usize) -> Vec<f64> {
    vec![1.0 / num_classes as f64; num_classes]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub n: usize,
    pub zero_support_count: usize,
}

/// Accuracy of `model` on `data`, matching labels by name.
///
/// Rows without support are scored with uniform probabilities, so they
/// predict the first class.
pub fn evaluate(model: &TrainedModel, data: &LabeledDataset, path: PredictPath) -> Result<Evaluation> {
    let rows: Vec<&[f64]> = data.rows().collect();
    let mut zero_support_count = 0;
    let mut predicted = Vec::with_capacity(rows.len());
    for result in predict_batch(model, &rows, path) {
        let index = match result {
            Ok(r) => r.class_index,
            Err(QmcError::ZeroSupport { .. }) => {
                zero_support_count += 1;
                predict_label(&uniform_probabilities(model.num_classes()))
            }
            Err(e) => return Err(e),
        };
        predicted.push(model.labels[index].as_str());
    }
    Ok(Evaluation {
        accuracy: accuracy(&predicted, &data.label_names())?,
        n: rows.len(),
        zero_support_count,
    })
}
