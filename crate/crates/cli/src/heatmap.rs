//! Probability grids over the plane and their P6 rendering.

use std::io::{self, Write};

use qmc_core::predictor::{predict_batch, uniform_probabilities, PredictPath};
use qmc_core::{QmcError, Result, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

/// Training range of each feature widened by 10%, or `1..=m` for one-hot.
pub fn default_bounds(model: &TrainedModel) -> Bounds {
    let (lo, hi) = match &model.encoder.scaler {
        Some(s) => (s.min.clone(), s.max.clone()),
        None => {
            let m = (model.shape.dim_x as f64).sqrt().round();
            (vec![1.0; 2], vec![m; 2])
        }
    };
    let pad = |j: usize| 0.1 * (hi[j] - lo[j]);
    Bounds {
        xmin: lo[0] - pad(0),
        xmax: hi[0] + pad(0),
        ymin: lo[1] - pad(1),
        ymax: hi[1] + pad(1),
    }
}

fn axis(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    if resolution == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..resolution)
        .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
        .collect()
}

/// Row-major grid, `x2` from `ymax` down so row 0 is the top image row.
pub struct Grid {
    pub resolution: usize,
    pub points: Vec<[f64; 2]>,
    pub p_class0: Vec<f64>,
    pub zero_support: usize,
}

pub fn compute(model: &TrainedModel, bounds: Bounds, resolution: usize) -> Result<Grid> {
    if model.spec().num_features != 2 {
        return Err(QmcError::UnsupportedDimension(model.spec().num_features));
    }
    if resolution == 0 {
        return Err(QmcError::InvalidParameter("grid resolution must be positive".into()));
    }
    let xs = axis(bounds.xmin, bounds.xmax, resolution);
    let mut ys = axis(bounds.ymin, bounds.ymax, resolution);
    ys.reverse();
    let points: Vec<[f64; 2]> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect();
    let uniform = uniform_probabilities(model.num_classes())[0];
    let mut zero_support = 0;
    let mut p_class0 = Vec::with_capacity(points.len());
    for result in predict_batch(model, &points, PredictPath::Fast) {
        p_class0.push(match result {
            Ok(r) => r.probabilities[0],
            Err(QmcError::ZeroSupport { .. }) => {
                zero_support += 1;
                uniform
            }
            Err(e) => return Err(e),
        });
    }
    Ok(Grid {
        resolution,
        points,
        p_class0,
        zero_support,
    })
}

/// Blue at 0, white at ½, red at 1.
pub fn ramp(p: f64) -> [u8; 3] {
    let p = p.clamp(0.0, 1.0);
    let channel = |t: f64| (255.0 * t).round() as u8;
    if p < 0.5 {
        let t = 2.0 * p;
        [channel(t), channel(t), 255]
    } else {
        let t = 2.0 * (1.0 - p);
        [255, channel(t), channel(t)]
    }
}

pub fn write_ppm(grid: &Grid, mut out: impl Write) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", grid.resolution, grid.resolution)?;
    for &p in &grid.p_class0 {
        out.write_all(&ramp(p))?;
    }
    out.flush()
}
