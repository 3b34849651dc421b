//! Wall-clock measurements for training growth and prediction paths.

use std::time::Instant;

use serde::Serialize;

use crate::data::{generate, DatasetKind, LabeledDataset};
use crate::error::{QmcError, Result};
use crate::features::{Encoder, EncoderSpec, FeatureMap};
use crate::predictor::{predict_with, PredictPath};
use crate::trainer::{train, TrainedModel, TrainingMode};

pub const DEFAULT_TRAIN_SIZES: [usize; 3] = [2000, 4000, 8000];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainPoint {
    pub n: usize,
    /// Median over repeats.
    pub seconds: f64,
    pub runs: Vec<f64>,
}

/// Least-squares line `seconds ≈ slope·n + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainTiming {
    pub encoder: String,
    pub mode: TrainingMode,
    pub k: usize,
    pub l: usize,
    pub points: Vec<TrainPoint>,
    pub fit: LinearFit,
}

impl TrainTiming {
    /// `time(to) / time(from)`, if both sizes were measured.
    pub fn ratio(&self, from: usize, to: usize) -> Option<f64> {
        let at = |n| self.points.iter().find(|p| p.n == n).map(|p| p.seconds);
        Some(at(to)? / at(from)?)
    }

    /// Ratios between consecutive measured sizes.
    pub fn step_ratios(&self) -> Vec<(usize, usize, f64)> {
        self.points
            .windows(2)
            .map(|w| (w[0].n, w[1].n, w[1].seconds / w[0].seconds))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictTiming {
    pub encoder: String,
    pub mode: TrainingMode,
    pub k: usize,
    pub l: usize,
    pub queries: usize,
    /// Mean seconds per prediction.
    pub naive_seconds: f64,
    pub fast_seconds: f64,
    pub speedup: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

pub fn linear_fit(points: &[(f64, f64)]) -> LinearFit {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if sxx > 0.0 && syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit {
        slope,
        intercept: mean_y - slope * mean_x,
        r_squared,
    }
}

fn moons(n: usize, seed: u64) -> Result<LabeledDataset> {
    generate(DatasetKind::Moons, n, DatasetKind::Moons.default_noise(), seed)
}

/// Times `train` on moons datasets of each size with a fixed encoder.
///
/// The encoder is fitted once on the largest dataset so every run uses the
/// same dimensions; dataset generation is excluded from the timings.
pub fn time_training(map: FeatureMap, mode: TrainingMode, sizes: &[usize], repeats: usize, seed: u64) -> Result<TrainTiming> {
    if sizes.is_empty() || repeats == 0 {
        return Err(QmcError::InvalidParameter("timing needs at least one size and one repeat".into()));
    }
    let spec = EncoderSpec::new(map, 2)?;
    let largest = moons(*sizes.iter().max().expect("nonempty"), seed)?;
    let encoder = Encoder::fit(spec, &largest)?;
    // Untimed run so the first size does not pay for cold caches and page faults.
    train(&moons(*sizes.iter().min().expect("nonempty"), seed)?, &encoder, mode)?;
    let mut points = Vec::with_capacity(sizes.len());
    let mut shape = None;
    for &n in sizes {
        let data = moons(n, seed)?;
        let mut runs = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            let model = train(&data, &encoder, mode)?;
            runs.push(start.elapsed().as_secs_f64());
            shape = Some(model.shape);
        }
        let seconds = median(&mut runs.clone());
        points.push(TrainPoint { n, seconds, runs });
    }
    let shape = shape.expect("at least one run");
    let fit = linear_fit(&points.iter().map(|p| (p.n as f64, p.seconds)).collect::<Vec<_>>());
    Ok(TrainTiming {
        encoder: encoder.spec.map.name().into(),
        mode,
        k: shape.dim_x,
        l: shape.dim_y,
        points,
        fit,
    })
}

fn time_queries(model: &TrainedModel, queries: &[Vec<f64>], path: PredictPath) -> Result<f64> {
    let start = Instant::now();
    for q in queries {
        match predict_with(model, q, path) {
            Ok(_) | Err(QmcError::ZeroSupport { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(start.elapsed().as_secs_f64() / queries.len() as f64)
}

/// Mean per-query time of the naive and fast prediction paths on one model.
pub fn time_prediction(map: FeatureMap, mode: TrainingMode, n_train: usize, queries: usize, seed: u64) -> Result<PredictTiming> {
    if queries == 0 {
        return Err(QmcError::InvalidParameter("timing needs at least one query".into()));
    }
    let data = moons(n_train, seed)?;
    let encoder = Encoder::fit(EncoderSpec::new(map, 2)?, &data)?;
    let model = train(&data, &encoder, mode)?;
    let points: Vec<Vec<f64>> = moons(queries.max(2), seed.wrapping_add(1))?
        .rows()
        .take(queries)
        .map(<[f64]>::to_vec)
        .collect();
    let naive_seconds = time_queries(&model, &points, PredictPath::Naive)?;
    let fast_seconds = time_queries(&model, &points, PredictPath::Fast)?;
    Ok(PredictTiming {
        encoder: encoder.spec.map.name().into(),
        mode,
        k: model.shape.dim_x,
        l: model.shape.dim_y,
        queries: points.len(),
        naive_seconds,
        fast_seconds,
        speedup: naive_seconds / fast_seconds,
    })
}
