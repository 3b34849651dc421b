//! Quantum feature maps: real feature vectors and categories to unit states.
//!
//! Per-feature maps (softmax, one-hot, squeezed, coherent) are combined with
//! a tensor product, giving an input space of dimension `mⁿ`. Random Fourier
//! features map the whole vector at once into `D` dimensions.

// Negated comparisons below also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{QmcError, Result};
use crate::qstate::{tensor_all, StateVector, C64};

/// Encoder family together with the hyperparameters that family uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureMap {
    /// Square roots of a softmax over `dim` equally spaced grid points in `[0, 1]`.
    Softmax { dim: usize, beta: f64 },
    /// Basis encoding of categories `1..=categories`.
    Onehot { categories: usize },
    /// Squeezed vacuum with the feature as its phase; `dim` even Fock levels kept.
    Squeezed { dim: usize, r: f64 },
    /// Coherent state truncated to `dim` Fock levels.
    Coherent { dim: usize, gamma: f64 },
    /// Random Fourier features of the Gaussian kernel `exp(-γ‖x−y‖²)`.
    Rff { dim: usize, gamma: f64, seed: u64 },
}

impl FeatureMap {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureMap::Softmax { .. } => "softmax",
            FeatureMap::Onehot { .. } => "onehot",
            FeatureMap::Squeezed { .. } => "squeezed",
            FeatureMap::Coherent { .. } => "coherent",
            FeatureMap::Rff { .. } => "rff",
        }
    }

    /// Interval the raw features are min-max scaled onto, if any.
    pub fn scaling_target(&self) -> Option<Interval> {
        match self {
            FeatureMap::Softmax { .. } | FeatureMap::Rff { .. } => Some(Interval::UNIT),
            FeatureMap::Squeezed { .. } | FeatureMap::Coherent { .. } => Some(Interval::ZERO_PI),
            FeatureMap::Onehot { .. } => None,
        }
    }
}

/// Feature map plus the number of input features it is applied to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    #[serde(flatten)]
    pub map: FeatureMap,
    pub num_features: usize,
}

impl EncoderSpec {
    pub fn new(map: FeatureMap, num_features: usize) -> Result<Self> {
        let spec = Self { map, num_features };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QmcError::InvalidParameter(msg));
        if self.num_features == 0 {
            return bad("num_features must be positive".into());
        }
        match self.map {
            FeatureMap::Softmax { dim, beta } => {
                check_per_feature_dim(dim)?;
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad(format!("beta must be positive, got {beta}"));
                }
            }
            FeatureMap::Onehot { categories } => check_per_feature_dim(categories)?,
            FeatureMap::Squeezed { dim, r } => {
                check_per_feature_dim(dim)?;
                if !(r >= 0.0 && r.is_finite()) {
                    return bad(format!("squeezing r must be nonnegative, got {r}"));
                }
            }
            FeatureMap::Coherent { dim, gamma } => {
                check_per_feature_dim(dim)?;
                check_gamma(gamma)?;
            }
            FeatureMap::Rff { dim, gamma, .. } => {
                if dim == 0 {
                    return bad("rff dimension must be at least 1".into());
                }
                check_gamma(gamma)?;
            }
        }
        self.checked_input_dim()
            .map(|_| ())
            .ok_or_else(|| QmcError::InvalidParameter("input dimension overflows".into()))
    }

    /// Dimension `k` of the input Hilbert space.
    pub fn input_dim(&self) -> usize {
        self.checked_input_dim().expect("validated encoder spec")
    }

    fn checked_input_dim(&self) -> Option<usize> {
        match self.map {
            FeatureMap::Rff { dim, .. } => Some(dim),
            FeatureMap::Softmax { dim, .. }
            | FeatureMap::Squeezed { dim, .. }
            | FeatureMap::Coherent { dim, .. }
            | FeatureMap::Onehot { categories: dim } => {
                dim.checked_pow(u32::try_from(self.num_features).ok()?)
            }
        }
    }
}

fn check_per_feature_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(QmcError::InvalidParameter(format!(
            "per-feature dimension must be at least 2, got {dim}"
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(QmcError::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok(())
}

/// Closed interval used as min-max scaling target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };
    pub const ZERO_PI: Interval = Interval { lo: 0.0, hi: PI };

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Per-feature min-max scaler fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub target: Interval,
}

impl FeatureScaler {
    /// Fits column ranges; a constant column is a `DegenerateFeature` error.
    pub fn fit(data: &LabeledDataset, target: Interval) -> Result<Self> {
        if data.is_empty() {
            return Err(QmcError::EmptyTraining);
        }
        let n = data.num_features();
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for row in data.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        if let Some(feature) = (0..n).find(|&j| !(max[j] > min[j])) {
            return Err(QmcError::DegenerateFeature { feature });
        }
        Ok(Self { min, max, target })
    }

    pub fn num_features(&self) -> usize {
        self.min.len()
    }

    /// Scales one value of feature `j`; out-of-range values are clamped.
    pub fn scale_value(&self, j: usize, v: f64) -> f64 {
        let t = (v - self.min[j]) / (self.max[j] - self.min[j]);
        self.target.clamp(self.target.lo + t * (self.target.hi - self.target.lo))
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &v)| self.scale_value(j, v))
            .collect()
    }
}

/// Frequencies and phase offsets of a random Fourier feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffProjection {
    /// `D` rows of length `n`.
    pub frequencies: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub gamma: f64,
    pub seed: u64,
}

impl RffProjection {
    pub fn output_dim(&self) -> usize {
        self.offsets.len()
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.first().map_or(0, Vec::len)
    }

    /// Unnormalized features `z_j(x) = √(2/D)·cos(ω_j·x + b_j)`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(QmcError::ShapeMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let scale = (2.0 / self.output_dim() as f64).sqrt();
        Ok(self
            .frequencies
            .iter()
            .zip(&self.offsets)
            .map(|(w, b)| {
                let dot: f64 = w.iter().zip(x).map(|(wi, xi)| wi * xi).sum();
                scale * (dot + b).cos()
            })
            .collect())
    }
}

/// Samples `ω ~ N(0, 2γ·I)` and `b ~ U[0, 2π)` from a seeded generator.
pub fn make_rff_projection(spec: &EncoderSpec) -> Result<RffProjection> {
    spec.validate()?;
    let FeatureMap::Rff { dim, gamma, seed } = spec.map else {
        return Err(QmcError::InvalidParameter(format!(
            "{} encoder has no random projection",
            spec.map.name()
        )));
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, (2.0 * gamma).sqrt())
        .map_err(|e| QmcError::InvalidParameter(e.to_string()))?;
    let uniform = Uniform::new(0.0, 2.0 * PI).map_err(|e| QmcError::InvalidParameter(e.to_string()))?;
    let frequencies = (0..dim)
        .map(|_| (0..spec.num_features).map(|_| normal.sample(&mut rng)).collect())
        .collect();
    let offsets = (0..dim).map(|_| uniform.sample(&mut rng)).collect();
    Ok(RffProjection {
        frequencies,
        offsets,
        gamma,
        seed,
    })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `|φ(x)⟩ = Σ_j √P_j(x)|j⟩` with `P_j ∝ exp(−β(x − α_j)²)`, `α_j = j/(m−1)`.
///
/// `x` is clamped to `[0, 1]`.
pub fn encode_softmax_scalar(x: f64, m: usize, beta: f64) -> Result<StateVector> {
    check_per_feature_dim(m)?;
    if !(beta > 0.0) {
        return Err(QmcError::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let x = Interval::UNIT.clamp(x);
    let logits: Vec<f64> = (0..m)
        .map(|i| {
            let alpha = i as f64 / (m - 1) as f64;
            -beta * (x - alpha) * (x - alpha)
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    StateVector::normalized(
        weights
            .iter()
            .map(|w| C64::new((w / total).sqrt(), 0.0))
            .collect(),
    )
}

/// Basis ket `|j − 1⟩` for a category `j` in `1..=m`.
pub fn encode_onehot(j: usize, m: usize) -> Result<StateVector> {
    if j == 0 || j > m {
        return Err(QmcError::InvalidCategory {
            value: j as f64,
            categories: m,
        });
    }
    StateVector::basis(m, j - 1)
}

/// Squeezed-vacuum amplitudes before truncation renormalization.
///
/// Index `n` of the result holds the coefficient of the Fock level `|2n⟩`:
/// `(1/√cosh r)·√((2n)!)/(2ⁿ n!)·(e^{i(φ+π)} tanh r)ⁿ`.
pub fn squeezed_amplitudes(phi: f64, r: f64, m: usize) -> Vec<C64> {
    let prefactor = 1.0 / r.cosh().sqrt();
    let t = r.tanh();
    (0..m)
        .map(|n| {
            let magnitude = if n == 0 {
                prefactor
            } else if t == 0.0 {
                0.0
            } else {
                let log_mag = 0.5 * ln_factorial(2 * n) - n as f64 * 2f64.ln() - ln_factorial(n)
                    + n as f64 * t.ln();
                prefactor * log_mag.exp()
            };
            C64::from_polar(magnitude, n as f64 * (phi + PI))
        })
        .collect()
}

/// Squeezed state with phase `phi`, truncated to `m` even Fock levels.
pub fn encode_squeezed_scalar(phi: f64, r: f64, m: usize) -> Result<StateVector> {
    check_per_feature_dim(m)?;
    if !(r >= 0.0) {
        return Err(QmcError::InvalidParameter(format!("squeezing r must be nonnegative, got {r}")));
    }
    StateVector::normalized(squeezed_amplitudes(phi, r, m))
}

/// Coherent state `|(α, γ)⟩` with `α = x·e^{iθ}` truncated to `m` Fock levels.
///
/// Amplitudes are `e^{−γ|α|²/2}·αⁿ·γ^{n/2}/√(n!)`, accumulated in the log
/// domain and renormalized after truncation.
pub fn encode_coherent_scalar(x: f64, theta: f64, gamma: f64, m: usize) -> Result<StateVector> {
    check_per_feature_dim(m)?;
    check_gamma(gamma)?;
    if !(x >= 0.0) {
        return Err(QmcError::InvalidParameter(format!("coherent modulus must be nonnegative, got {x}")));
    }
    if x == 0.0 {
        return StateVector::basis(m, 0);
    }
    let log_scaled = x.ln() + 0.5 * gamma.ln();
    let log_mags: Vec<f64> = (0..m)
        .map(|n| n as f64 * log_scaled - 0.5 * ln_factorial(n))
        .collect();
    // the e^{−γ|α|²/2} prefactor cancels on renormalization
    let top = log_mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    StateVector::normalized(
        log_mags
            .iter()
            .enumerate()
            .map(|(n, l)| C64::from_polar((l - top).exp(), n as f64 * theta))
            .collect(),
    )
}

/// `z(x)/‖z(x)‖` for the given projection.
pub fn encode_rff_vector(x: &[f64], proj: &RffProjection) -> Result<StateVector> {
    let z = proj.features(x)?;
    StateVector::normalized(z.into_iter().map(|v| C64::new(v, 0.0)).collect())
}

fn category_index(v: f64, m: usize) -> Result<usize> {
    let j = v.round();
    if (v - j).abs() > 1e-9 || j < 1.0 || j > m as f64 {
        return Err(QmcError::InvalidCategory {
            value: v,
            categories: m,
        });
    }
    Ok(j as usize)
}

/// Encodes one raw feature vector.
///
/// Features are scaled with `scaler` first (not used for one-hot, where the
/// raw values are 1-based category ids). The coherent map uses the scaled
/// value `s ∈ [0, π]` as phase and `s/π ∈ [0, 1]` as modulus.
pub fn encode_sample(
    x: &[f64],
    spec: &EncoderSpec,
    scaler: Option<&FeatureScaler>,
    proj: Option<&RffProjection>,
) -> Result<StateVector> {
    if x.len() != spec.num_features {
        return Err(QmcError::ShapeMismatch {
            expected: spec.num_features,
            actual: x.len(),
        });
    }
    let scaled = || -> Result<Vec<f64>> {
        let scaler = scaler.ok_or_else(|| {
            QmcError::InvalidParameter(format!("{} encoder requires a fitted scaler", spec.map.name()))
        })?;
        if scaler.num_features() != x.len() {
            return Err(QmcError::ShapeMismatch {
                expected: scaler.num_features(),
                actual: x.len(),
            });
        }
        Ok(scaler.transform(x))
    };
    let factors: Vec<StateVector> = match spec.map {
        FeatureMap::Rff { .. } => {
            let proj = proj.ok_or_else(|| {
                QmcError::InvalidParameter("rff encoder requires a projection".into())
            })?;
            return encode_rff_vector(&scaled()?, proj);
        }
        FeatureMap::Onehot { categories } => x
            .iter()
            .map(|&v| encode_onehot(category_index(v, categories)?, categories))
            .collect::<Result<_>>()?,
        FeatureMap::Softmax { dim, beta } => scaled()?
            .into_iter()
            .map(|s| encode_softmax_scalar(s, dim, beta))
            .collect::<Result<_>>()?,
        FeatureMap::Squeezed { dim, r } => scaled()?
            .into_iter()
            .map(|s| encode_squeezed_scalar(s, r, dim))
            .collect::<Result<_>>()?,
        FeatureMap::Coherent { dim, gamma } => scaled()?
            .into_iter()
            .map(|s| encode_coherent_scalar(s / PI, s, gamma, dim))
            .collect::<Result<_>>()?,
    };
    Ok(tensor_all(&factors).expect("at least one feature"))
}

/// A feature map with everything fitted from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub scaler: Option<FeatureScaler>,
    pub projection: Option<RffProjection>,
}

impl Encoder {
    /// Fits the scaler (and draws the random projection) for `spec` on `data`.
    pub fn fit(spec: EncoderSpec, data: &LabeledDataset) -> Result<Self> {
        spec.validate()?;
        if data.num_features() != spec.num_features {
            return Err(QmcError::ShapeMismatch {
                expected: spec.num_features,
                actual: data.num_features(),
            });
        }
        let scaler = spec
            .map
            .scaling_target()
            .map(|target| FeatureScaler::fit(data, target))
            .transpose()?;
        let projection = match spec.map {
            FeatureMap::Rff { .. } => Some(make_rff_projection(&spec)?),
            _ => None,
        };
        Ok(Self {
            spec,
            scaler,
            projection,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn num_features(&self) -> usize {
        self.spec.num_features
    }

    pub fn encode(&self, x: &[f64]) -> Result<StateVector> {
        encode_sample(x, &self.spec, self.scaler.as_ref(), self.projection.as_ref())
    }
}
