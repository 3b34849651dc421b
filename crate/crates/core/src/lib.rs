//! Density-matrix classification by quantum measurement.
//!
//! Samples are encoded as unit vectors by a [`FeatureMap`], paired with their
//! one-hot label and averaged into a joint density matrix `ρ_train` on
//! `H_X ⊗ H_Y`. Prediction projects the `X` factor onto the encoded query and
//! reads class probabilities off the reduced state of `Y`.

pub mod data;
pub mod error;
pub mod features;
pub mod model_io;
pub mod oracles;
pub mod predictor;
pub mod qstate;
pub mod timing;
pub mod trainer;
pub mod verify;

pub use data::{accuracy, generate, read_csv, split, write_csv, DatasetKind, LabeledDataset};
pub use error::{QmcError, Result};
pub use features::{Encoder, EncoderSpec, FeatureMap, FeatureScaler, RffProjection};
pub use model_io::{load_model, save_model, ModelFormat};
pub use predictor::{evaluate, predict, Evaluation, predict_batch, predict_with, PredictPath, PredictionResult};
pub use qstate::{
    partial_trace_out_x, tensor_product, validate_density, BipartiteShape, DensityMatrix, SquareMatrix,
    StateVector, ValidityReport, C64,
};
pub use trainer::{fit, train, Accumulator, TrainedModel, TrainingMode};
pub use verify::{run_verification, Fault, VerifyConfig, VerifyReport};
