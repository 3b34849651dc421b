//! Shared fixtures for the training and prediction benches.

use qmc_core::{fit, generate, DatasetKind, Encoder, EncoderSpec, FeatureMap, LabeledDataset, TrainedModel, TrainingMode};

pub const SEED: u64 = 7;

/// Two-feature maps with the given number of states per feature.
pub fn maps(states: usize) -> Vec<FeatureMap> {
    vec![
        FeatureMap::Softmax { dim: states, beta: 70.0 },
        FeatureMap::Coherent { dim: states, gamma: 70.0 },
        FeatureMap::Squeezed { dim: states, r: 2.5 },
        FeatureMap::Rff { dim: states * states, gamma: 20.0, seed: SEED },
    ]
}

pub fn moons(n: usize) -> LabeledDataset {
    generate(DatasetKind::Moons, n, 0.1, SEED).expect("moons parameters are valid")
}

pub fn encoder(map: FeatureMap, data: &LabeledDataset) -> Encoder {
    let spec = EncoderSpec::new(map, data.num_features()).expect("bench maps are valid");
    Encoder::fit(spec, data).expect("encoder fits moons")
}

pub fn model(map: FeatureMap, mode: TrainingMode, n: usize) -> TrainedModel {
    let data = moons(n);
    let spec = EncoderSpec::new(map, data.num_features()).expect("bench maps are valid");
    fit(&data, spec, mode).expect("training succeeds")
}

/// Query points drawn from a differently seeded moons set.
pub fn queries(n: usize) -> Vec<Vec<f64>> {
    generate(DatasetKind::Moons, n.max(2), 0.1, SEED + 1)
        .expect("moons parameters are valid")
        .rows()
        .take(n)
        .map(<[f64]>::to_vec)
        .collect()
}
