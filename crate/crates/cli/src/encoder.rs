//! Encoder flags and their consistency rules.

use clap::{Args, ValueEnum};
use qmc_core::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    Softmax,
    Onehot,
    Squeezed,
    Coherent,
    Rff,
}

pub const DEFAULT_FOCK: usize = 20;
pub const DEFAULT_BETA: f64 = 70.0;
pub const DEFAULT_COHERENT_GAMMA: f64 = 70.0;
pub const DEFAULT_RFF_GAMMA: f64 = 20.0;
pub const DEFAULT_R: f64 = 2.5;
pub const DEFAULT_RFF_SEED: u64 = 42;

#[derive(Debug, Clone, Args)]
pub struct EncoderArgs {
    #[arg(long, value_enum)]
    pub encoding: Encoding,
    /// States per feature (categories for onehot). RFF uses it only for its default dimension.
    #[arg(long)]
    pub fock: Option<usize>,
    /// Softmax sharpness.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Coherent or RFF kernel scale.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Squeezing parameter.
    #[arg(long)]
    pub r: Option<f64>,
    /// Number of random Fourier features, defaults to fock^features.
    #[arg(long)]
    pub rff_dim: Option<usize>,
    #[arg(long)]
    pub rff_seed: Option<u64>,
}

fn reject(flag: &str, set: bool, encoding: Encoding, allowed: &str) -> Result<(), String> {
    if set {
        Err(format!(
            "--{flag} is not a parameter of the {} encoding (only {allowed})",
            encoding.to_possible_value().expect("no skipped variants").get_name()
        ))
    } else {
        Ok(())
    }
}

impl EncoderArgs {
    /// Builds the feature map, or a usage message for flags that do not
    /// belong to the chosen encoding.
    pub fn feature_map(&self, num_features: usize) -> Result<FeatureMap, String> {
        let e = self.encoding;
        reject("beta", self.beta.is_some() && e != Encoding::Softmax, e, "softmax")?;
        reject(
            "gamma",
            self.gamma.is_some() && !matches!(e, Encoding::Coherent | Encoding::Rff),
            e,
            "coherent and rff",
        )?;
        reject("r", self.r.is_some() && e != Encoding::Squeezed, e, "squeezed")?;
        reject("rff-dim", self.rff_dim.is_some() && e != Encoding::Rff, e, "rff")?;
        reject("rff-seed", self.rff_seed.is_some() && e != Encoding::Rff, e, "rff")?;
        let m = self.fock.unwrap_or(DEFAULT_FOCK);
        Ok(match e {
            Encoding::Softmax => FeatureMap::Softmax {
                dim: m,
                beta: self.beta.unwrap_or(DEFAULT_BETA),
            },
            Encoding::Onehot => FeatureMap::Onehot { categories: m },
            Encoding::Squeezed => FeatureMap::Squeezed {
                dim: m,
                r: self.r.unwrap_or(DEFAULT_R),
            },
            Encoding::Coherent => FeatureMap::Coherent {
                dim: m,
                gamma: self.gamma.unwrap_or(DEFAULT_COHERENT_GAMMA),
            },
            Encoding::Rff => {
                let dim = match self.rff_dim {
                    Some(d) => d,
                    None => u32::try_from(num_features)
                        .ok()
                        .and_then(|n| m.checked_pow(n))
                        .ok_or_else(|| format!("default RFF dimension {m}^{num_features} overflows; pass --rff-dim"))?,
                };
                FeatureMap::Rff {
                    dim,
                    gamma: self.gamma.unwrap_or(DEFAULT_RFF_GAMMA),
                    seed: self.rff_seed.unwrap_or(DEFAULT_RFF_SEED),
                }
            }
        })
    }
}
