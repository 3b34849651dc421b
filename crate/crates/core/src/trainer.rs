//! Training-state estimation.
//!
//! A single pass over the encoded samples `|ψ_i⟩ = |ψ_X(x_i)⟩ ⊗ |y_i⟩`
//! fills one of three buffers, chosen up front by [`TrainingMode`]:
//!
//! * `Pure`: amplitude sum, finalized to `|ψ⟩⟨ψ|` with `|ψ⟩ = Σ|ψ_i⟩/‖Σ|ψ_i⟩‖`;
//! * `Mixed`: outer-product sum, finalized to `(1/n)Σ|ψ_i⟩⟨ψ_i|`;
//! * `Classical`: basis-probability sum, finalized to a diagonal matrix.
//!
//! No sample is retained. Accumulators merge, so the pass can be split
//! across threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{QmcError, Result};
use crate::features::{Encoder, EncoderSpec};
use crate::qstate::{outer_product, validate_density, BipartiteShape, DensityMatrix, StateVector, ValidityReport, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingMode {
    Pure,
    Mixed,
    Classical,
}

impl TrainingMode {
    pub const ALL: [TrainingMode; 3] = [TrainingMode::Pure, TrainingMode::Mixed, TrainingMode::Classical];

    pub fn name(&self) -> &'static str {
        match self {
            TrainingMode::Pure => "pure",
            TrainingMode::Mixed => "mixed",
            TrainingMode::Classical => "classical",
        }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainingMode {
    type Err = QmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(TrainingMode::Pure),
            "mixed" => Ok(TrainingMode::Mixed),
            "classical" => Ok(TrainingMode::Classical),
            other => Err(QmcError::InvalidParameter(format!("unknown training mode `{other}`"))),
        }
    }
}

/// Norm below which a pure-state superposition counts as cancelled.
const SUPERPOSITION_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Buffer {
    Amplitudes(Vec<C64>),
    /// Upper triangle (row-major, `q ≥ p`) of the outer-product sum.
    Outer(Vec<C64>),
    Diagonal(Vec<f64>),
}

/// Streaming sum over encoded training samples.
#[derive(Debug, Clone)]
pub struct Accumulator {
    shape: BipartiteShape,
    mode: TrainingMode,
    count: usize,
    buffer: Buffer,
}

impl Accumulator {
    pub fn new(shape: BipartiteShape, mode: TrainingMode) -> Self {
        let d = shape.dim();
        let buffer = match mode {
            TrainingMode::Pure => Buffer::Amplitudes(vec![ZERO; d]),
            TrainingMode::Mixed => Buffer::Outer(vec![ZERO; d * d]),
            TrainingMode::Classical => Buffer::Diagonal(vec![0.0; d]),
        };
        Self {
            shape,
            mode,
            count: 0,
            buffer,
        }
    }

    pub fn shape(&self) -> BipartiteShape {
        self.shape
    }

    pub fn mode(&self) -> TrainingMode {
        self.mode
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds a joint state of dimension `k·ℓ`.
    pub fn absorb(&mut self, state: &StateVector) -> Result<()> {
        self.shape.check(state.dim())?;
        let nonzero: Vec<(usize, C64)> = state
            .amplitudes()
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, a)| *a != ZERO)
            .collect();
        self.add_sparse(&nonzero);
        Ok(())
    }

    /// Adds `|x_state⟩ ⊗ |label⟩` without materializing the product.
    pub fn absorb_labeled(&mut self, x_state: &StateVector, label: usize) -> Result<()> {
        if x_state.dim() != self.shape.dim_x {
            return Err(QmcError::ShapeMismatch {
                expected: self.shape.dim_x,
                actual: x_state.dim(),
            });
        }
        if label >= self.shape.dim_y {
            return Err(QmcError::ShapeMismatch {
                expected: self.shape.dim_y,
                actual: label + 1,
            });
        }
        let nonzero: Vec<(usize, C64)> = x_state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(_, a)| **a != ZERO)
            .map(|(i, &a)| (self.shape.index(i, label), a))
            .collect();
        self.add_sparse(&nonzero);
        Ok(())
    }

    /// `nonzero` must be sorted by index.
    fn add_sparse(&mut self, nonzero: &[(usize, C64)]) {
        let d = self.shape.dim();
        match &mut self.buffer {
            Buffer::Amplitudes(sum) => {
                for &(p, a) in nonzero {
                    sum[p] += a;
                }
            }
            Buffer::Outer(sum) => {
                for (n, &(p, a)) in nonzero.iter().enumerate() {
                    let row = &mut sum[p * d..(p + 1) * d];
                    for &(q, b) in &nonzero[n..] {
                        row[q] += a * b.conj();
                    }
                }
            }
            Buffer::Diagonal(sum) => {
                for &(p, a) in nonzero {
                    sum[p] += a.norm_sqr();
                }
            }
        }
        self.count += 1;
    }

    /// Folds another accumulator of the same shape and mode into this one.
    pub fn merge(&mut self, other: Accumulator) -> Result<()> {
        if other.shape != self.shape || other.mode != self.mode {
            return Err(QmcError::InvalidParameter(
                "cannot merge accumulators of different shape or mode".into(),
            ));
        }
        match (&mut self.buffer, other.buffer) {
            (Buffer::Amplitudes(a), Buffer::Amplitudes(b)) | (Buffer::Outer(a), Buffer::Outer(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
            (Buffer::Diagonal(a), Buffer::Diagonal(b)) => {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
            _ => unreachable!("mode determines buffer"),
        }
        self.count += other.count;
        Ok(())
    }

    /// Normalizes the sum into the training density matrix.
    pub fn finalize(self) -> Result<DensityMatrix> {
        if self.count == 0 {
            return Err(QmcError::EmptyTraining);
        }
        let d = self.shape.dim();
        let inv_n = 1.0 / self.count as f64;
        match self.buffer {
            Buffer::Amplitudes(sum) => {
                let norm = crate::qstate::l2_norm(&sum);
                if norm <= SUPERPOSITION_EPS {
                    return Err(QmcError::DegenerateSuperposition);
                }
                Ok(outer_product(&StateVector::normalized(sum)?))
            }
            Buffer::Outer(mut sum) => {
                for p in 0..d {
                    sum[p * d + p] = C64::new(sum[p * d + p].re * inv_n, 0.0);
                    for q in p + 1..d {
                        let v = sum[p * d + q] * inv_n;
                        sum[p * d + q] = v;
                        sum[q * d + p] = v.conj();
                    }
                }
                DensityMatrix::from_entries(d, sum)
            }
            Buffer::Diagonal(sum) => Ok(DensityMatrix::diagonal(
                &sum.iter().map(|v| v * inv_n).collect::<Vec<_>>(),
            )),
        }
    }
}

/// Training density matrix plus everything needed to encode new inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub rho: DensityMatrix,
    pub shape: BipartiteShape,
    pub encoder: Encoder,
    /// Class names; index `a` is the output basis state `|a⟩`.
    pub labels: Vec<String>,
    pub mode: TrainingMode,
    pub n_train: usize,
}

impl TrainedModel {
    pub fn spec(&self) -> &EncoderSpec {
        &self.encoder.spec
    }

    pub fn num_classes(&self) -> usize {
        self.shape.dim_y
    }

    pub fn purity(&self) -> f64 {
        self.rho.purity()
    }

    pub fn validate(&self) -> ValidityReport {
        validate_density(&self.rho)
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }
}

/// Class names of `data` in order of first appearance, and the remapped labels.
pub(crate) fn label_dictionary(data: &LabeledDataset) -> (Vec<String>, Vec<usize>) {
    let mut order: Vec<usize> = Vec::new();
    let remapped = data
        .labels()
        .iter()
        .map(|&l| match order.iter().position(|&o| o == l) {
            Some(i) => i,
            None => {
                order.push(l);
                order.len() - 1
            }
        })
        .collect();
    let names = order.iter().map(|&l| data.class_names()[l].clone()).collect();
    (names, remapped)
}

/// Estimates the training state of `data` under a fitted encoder.
pub fn train(data: &LabeledDataset, encoder: &Encoder, mode: TrainingMode) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(QmcError::EmptyTraining);
    }
    let (labels, remapped) = label_dictionary(data);
    let shape = BipartiteShape::new(encoder.input_dim(), labels.len())?;
    let rows: Vec<&[f64]> = data.rows().collect();
    let chunk = rows.len().div_ceil(rayon::current_num_threads()).max(1);
    let acc = rows
        .par_chunks(chunk)
        .zip(remapped.par_chunks(chunk))
        .map(|(xs, ys)| {
            let mut acc = Accumulator::new(shape, mode);
            for (x, &y) in xs.iter().zip(ys) {
                acc.absorb_labeled(&encoder.encode(x)?, y)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .try_fold(Accumulator::new(shape, mode), |mut total, part| {
            total.merge(part)?;
            Ok::<_, QmcError>(total)
        })?;
    let n_train = acc.count();
    Ok(TrainedModel {
        rho: acc.finalize()?,
        shape,
        encoder: encoder.clone(),
        labels,
        mode,
        n_train,
    })
}

/// Fits the encoder on `data` and trains in one call.
pub fn fit(data: &LabeledDataset, spec: EncoderSpec, mode: TrainingMode) -> Result<TrainedModel> {
    let encoder = Encoder::fit(spec, data)?;
    train(data, &encoder, mode)
}

pub fn train_pure(data: &LabeledDataset, encoder: &Encoder) -> Result<TrainedModel> {
    train(data, encoder, TrainingMode::Pure)
}

pub fn train_mixed(data: &LabeledDataset, encoder: &Encoder) -> Result<TrainedModel> {
    train(data, encoder, TrainingMode::Mixed)
}

pub fn train_classical(data: &LabeledDataset, encoder: &Encoder) -> Result<TrainedModel> {
    train(data, encoder, TrainingMode::Classical)
}
