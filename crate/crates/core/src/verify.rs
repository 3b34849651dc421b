//! Seeded self-checks run by `qmc verify` and the acceptance suite.
//!
//! Every check compares the measurement pipeline against an independent
//! computation: counting Bayes on categorical data, the kernel-weighted
//! mixture, the naive projector path and the coherent-state closed form.
//! All training and output density matrices seen along the way go through
//! [`DensityAudit`].

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{QmcError, Result};
use crate::features::{encode_coherent_scalar, Encoder, EncoderSpec, FeatureMap};
use crate::oracles::{bayes_posterior, kernel_form_predict, kernel_form_support, DiscreteJoint};
use crate::predictor::{predict_with, PredictPath, PredictionResult};
use crate::qstate::{
    validate_density, DensityMatrix, SquareMatrix, HERMITIAN_TOL, PSD_TOL, SUPPORT_EPS, TRACE_TOL,
};
use crate::trainer::{train, TrainedModel, TrainingMode};

pub const BAYES_TOL: f64 = 1e-10;
pub const KERNEL_FORM_TOL: f64 = 1e-8;
pub const FAST_NAIVE_TOL: f64 = 1e-9;
pub const CLOSED_FORM_TOL: f64 = 1e-6;

/// Deliberate corruption used to check that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Adds 0.05 to `ρ_train[0][0]` after training.
    PerturbRho,
}

impl Fault {
    fn apply(self, model: &mut TrainedModel) {
        match self {
            Fault::PerturbRho => {
                let mut entries = model.rho.entries().to_vec();
                entries[0].re += 0.05;
                let matrix = SquareMatrix::from_entries(model.rho.dim(), entries).expect("same dimension");
                model.rho = DensityMatrix::from_matrix(matrix);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random categorical datasets for the Bayes check.
    pub bayes_datasets: usize,
    /// Random datasets per encoder for the kernel-form check.
    pub kernel_datasets: usize,
    /// Random models for the fast-vs-naive check.
    pub path_models: usize,
    pub queries_per_model: usize,
    /// Points per axis of the coherent closed-form grid.
    pub closed_form_grid: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            bayes_datasets: 200,
            kernel_datasets: 50,
            path_models: 100,
            queries_per_model: 8,
            closed_form_grid: 20,
            fault: None,
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Number of compared predictions (or kernel entries).
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn from_deviation(name: impl Into<String>, cases: usize, max_deviation: f64, tolerance: f64, mismatches: usize) -> Self {
        let passed = mismatches == 0 && max_deviation <= tolerance;
        let detail = if mismatches > 0 {
            format!("{mismatches} disagreements on zero support or failed training")
        } else {
            String::new()
        };
        Self {
            name: name.into(),
            passed,
            cases,
            max_deviation,
            tolerance,
            detail,
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, max deviation {:.3e} (tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_deviation,
            self.tolerance
        )?;
        if !self.detail.is_empty() {
            write!(f, ", {}", self.detail)?;
        }
        Ok(())
    }
}

/// Running validity summary over many density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityAudit {
    pub checked: usize,
    pub failures: usize,
    pub worst_hermiticity: f64,
    pub worst_trace: f64,
    pub min_eigenvalue: f64,
    pub first_failure: Option<String>,
}

impl Default for DensityAudit {
    fn default() -> Self {
        Self {
            checked: 0,
            failures: 0,
            worst_hermiticity: 0.0,
            worst_trace: 0.0,
            min_eigenvalue: f64::INFINITY,
            first_failure: None,
        }
    }
}

impl DensityAudit {
    pub fn record(&mut self, what: &str, rho: &DensityMatrix) {
        let report = validate_density(rho);
        self.checked += 1;
        self.worst_hermiticity = self.worst_hermiticity.max(report.hermiticity_defect);
        self.worst_trace = self.worst_trace.max(report.trace_defect);
        self.min_eigenvalue = self.min_eigenvalue.min(report.min_eigenvalue);
        if !report.passed() {
            self.failures += 1;
            self.first_failure.get_or_insert_with(|| format!("{what}: {report}"));
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn to_check(&self) -> CheckResult {
        let mut detail = format!(
            "hermiticity {:.1e}, trace {:.1e}, min eigenvalue {:.1e}",
            self.worst_hermiticity, self.worst_trace, self.min_eigenvalue
        );
        if let Some(first) = &self.first_failure {
            detail.push_str(&format!(", {} invalid, first: {first}", self.failures));
        }
        CheckResult {
            name: "density-invariants".into(),
            passed: self.passed(),
            cases: self.checked,
            max_deviation: self.worst_hermiticity.max(self.worst_trace),
            tolerance: HERMITIAN_TOL.min(TRACE_TOL),
            detail: format!("{detail} (eigenvalue floor {PSD_TOL:.0e})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed {}", self.seed)?;
        for check in &self.checks {
            writeln!(f, "{check}")?;
        }
        write!(f, "{}", if self.passed() { "all checks passed" } else { "verification FAILED" })
    }
}

pub fn run_verification(config: &VerifyConfig) -> VerifyReport {
    let mut audit = DensityAudit::default();
    let mut checks = vec![check_bayes_equivalence(config.seed, config.bayes_datasets, config.fault, &mut audit)];
    checks.extend(check_kernel_equivalence(
        config.seed,
        config.kernel_datasets,
        config.queries_per_model,
        config.fault,
        &mut audit,
    ));
    checks.push(check_fast_vs_naive(
        config.seed,
        config.path_models,
        config.queries_per_model,
        config.fault,
        &mut audit,
    ));
    checks.push(check_coherent_closed_form(config.closed_form_grid));
    checks.push(audit.to_check());
    VerifyReport {
        seed: config.seed,
        checks,
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn class_names(count: usize) -> Vec<String> {
    (0..count).map(|c| format!("c{c}")).collect()
}

fn train_checked(data: &LabeledDataset, encoder: &Encoder, mode: TrainingMode, fault: Option<Fault>, audit: &mut DensityAudit) -> Result<TrainedModel> {
    let mut model = train(data, encoder, mode)?;
    if let Some(fault) = fault {
        fault.apply(&mut model);
    }
    audit.record(&format!("rho_train ({} {})", encoder.spec.map.name(), mode), &model.rho);
    Ok(model)
}

/// Probability of each dataset class, zero for classes the model never saw.
fn probabilities_by_class(model: &TrainedModel, result: &PredictionResult, names: &[String]) -> Vec<f64> {
    names
        .iter()
        .map(|name| model.label_index(name).map_or(0.0, |i| result.probabilities[i]))
        .collect()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn is_zero_support<T>(r: &Result<T>) -> bool {
    matches!(r, Err(QmcError::ZeroSupport { .. }))
}

/// One-hot predictions under mixed and classical training equal counting
/// Bayes on random categorical datasets.
pub fn check_bayes_equivalence(seed: u64, datasets: usize, fault: Option<Fault>, audit: &mut DensityAudit) -> CheckResult {
    let mut rng = rng_for(seed, 1);
    let names = class_names(2);
    let (mut cases, mut worst, mut mismatches) = (0, 0.0f64, 0);
    for _ in 0..datasets {
        let m = rng.random_range(2..=8usize);
        let n = rng.random_range(1..=50usize);
        let pairs: Vec<(usize, usize)> = (0..n)
            .map(|_| (rng.random_range(1..=m), rng.random_range(0..2)))
            .collect();
        let data = LabeledDataset::new(
            pairs.iter().map(|&(x, _)| vec![x as f64]).collect(),
            pairs.iter().map(|&(_, y)| y).collect(),
            names.clone(),
        )
        .expect("valid categorical dataset");
        let joint = DiscreteJoint::from_pairs(&pairs, m, 2).expect("valid pairs");
        let spec = EncoderSpec::new(FeatureMap::Onehot { categories: m }, 1).expect("m ≥ 2");
        let encoder = Encoder::fit(spec, &data).expect("one-hot needs no fitting");
        for mode in [TrainingMode::Mixed, TrainingMode::Classical] {
            let model = match train_checked(&data, &encoder, mode, fault, audit) {
                Ok(model) => model,
                Err(_) => {
                    mismatches += 1;
                    continue;
                }
            };
            for x_star in 1..=m {
                cases += 1;
                let want = bayes_posterior(&joint, x_star);
                let got = predict_with(&model, &[x_star as f64], PredictPath::Fast);
                match (&want, &got) {
                    (Ok(want), Ok(got)) => {
                        audit.record("rho_y (one-hot)", &got.rho_y);
                        worst = worst.max(max_abs(want, &probabilities_by_class(&model, got, &names)));
                    }
                    _ if is_zero_support(&want) && is_zero_support(&got) => {}
                    _ => mismatches += 1,
                }
            }
        }
    }
    CheckResult::from_deviation("bayes-equivalence", cases, worst, BAYES_TOL, mismatches)
}

/// Encoders exercised by the kernel-form check, all on 2-D inputs.
pub fn kernel_check_encoders() -> Vec<FeatureMap> {
    vec![
        FeatureMap::Softmax { dim: 4, beta: 70.0 },
        FeatureMap::Coherent { dim: 8, gamma: 70.0 },
        FeatureMap::Squeezed { dim: 8, r: 2.5 },
        FeatureMap::Rff { dim: 32, gamma: 20.0, seed: 0 },
        FeatureMap::Onehot { categories: 4 },
    ]
}

fn random_point(rng: &mut ChaCha8Rng, map: &FeatureMap, num_features: usize) -> Vec<f64> {
    (0..num_features)
        .map(|_| match map {
            FeatureMap::Onehot { categories } => rng.random_range(1..=*categories) as f64,
            _ => rng.random_range(-2.0..2.0),
        })
        .collect()
}

fn random_dataset(rng: &mut ChaCha8Rng, map: &FeatureMap, num_features: usize, n: usize, classes: usize) -> LabeledDataset {
    let rows = (0..n).map(|_| random_point(rng, map, num_features)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    LabeledDataset::new(rows, labels, class_names(classes)).expect("valid random dataset")
}

/// Random dataset plus a fitted encoder, redrawn until the fit succeeds.
fn random_problem(
    rng: &mut ChaCha8Rng,
    map: &FeatureMap,
    num_features: usize,
    n: std::ops::RangeInclusive<usize>,
    classes: usize,
) -> (LabeledDataset, Encoder) {
    let map = match map {
        FeatureMap::Rff { dim, gamma, .. } => FeatureMap::Rff {
            dim: *dim,
            gamma: *gamma,
            seed: rng.random(),
        },
        other => other.clone(),
    };
    let spec = EncoderSpec::new(map, num_features).expect("valid encoder");
    loop {
        let size = rng.random_range(n.clone());
        let data = random_dataset(rng, &spec.map, num_features, size, classes);
        if let Ok(encoder) = Encoder::fit(spec.clone(), &data) {
            return (data, encoder);
        }
    }
}

/// Mixed-mode predictions equal the kernel-weighted label mixture, one
/// result per encoder. Supports are compared as well.
pub fn check_kernel_equivalence(
    seed: u64,
    datasets: usize,
    queries: usize,
    fault: Option<Fault>,
    audit: &mut DensityAudit,
) -> Vec<CheckResult> {
    kernel_check_encoders()
        .into_iter()
        .enumerate()
        .map(|(e, map)| {
            let mut rng = rng_for(seed, 10 + e as u64);
            let (mut cases, mut worst, mut mismatches) = (0, 0.0f64, 0);
            for _ in 0..datasets {
                let (data, encoder) = random_problem(&mut rng, &map, 2, 2..=100, 2);
                let model = match train_checked(&data, &encoder, TrainingMode::Mixed, fault, audit) {
                    Ok(model) => model,
                    Err(_) => {
                        mismatches += 1;
                        continue;
                    }
                };
                for _ in 0..queries {
                    cases += 1;
                    let x_star = random_point(&mut rng, &map, 2);
                    let support = kernel_form_support(&data, &encoder, &x_star).expect("nonempty dataset");
                    let got = predict_with(&model, &x_star, PredictPath::Fast);
                    match got {
                        Ok(got) => {
                            audit.record("rho_y (kernel form)", &got.rho_y);
                            match kernel_form_predict(&data, &encoder, &x_star) {
                                Ok(want) => {
                                    worst = worst.max(want.max_abs_diff(&got.rho_y));
                                    worst = worst.max((support - got.support).abs());
                                }
                                Err(_) => mismatches += 1,
                            }
                        }
                        // the measurement refuses supports below SUPPORT_EPS·Tr ρ, so
                        // agreement means the kernel-form support is that small too
                        Err(QmcError::ZeroSupport { .. }) if support <= SUPPORT_EPS * (1.0 + 1e-6) => {}
                        Err(_) => mismatches += 1,
                    }
                }
            }
            CheckResult::from_deviation(
                format!("kernel-form/{}", map.name()),
                cases,
                worst,
                KERNEL_FORM_TOL,
                mismatches,
            )
        })
        .collect()
}

/// The contraction and the explicit projector give the same `ρ'_Y` on random
/// models with `kℓ ≤ 64`.
pub fn check_fast_vs_naive(seed: u64, models: usize, queries: usize, fault: Option<Fault>, audit: &mut DensityAudit) -> CheckResult {
    let mut rng = rng_for(seed, 20);
    let (mut cases, mut worst, mut mismatches) = (0, 0.0f64, 0);
    let mut built = 0;
    while built < models {
        let classes = rng.random_range(2..=3usize);
        let num_features = rng.random_range(1..=2usize);
        // largest per-feature dimension keeping kℓ ≤ 64
        let budget = 64 / classes;
        let max_dim = if num_features == 1 { budget } else { (budget as f64).sqrt() as usize };
        let dim = rng.random_range(2..=max_dim.min(12));
        let map = match rng.random_range(0..5) {
            0 => FeatureMap::Softmax { dim, beta: rng.random_range(0.5..80.0) },
            1 => FeatureMap::Onehot { categories: dim },
            2 => FeatureMap::Squeezed { dim, r: rng.random_range(0.1..3.0) },
            3 => FeatureMap::Coherent { dim, gamma: rng.random_range(0.5..80.0) },
            _ => FeatureMap::Rff {
                dim: rng.random_range(1..=budget),
                gamma: rng.random_range(0.5..30.0),
                seed: 0,
            },
        };
        let mode = TrainingMode::ALL[rng.random_range(0..3)];
        let (data, encoder) = random_problem(&mut rng, &map, num_features, 2..=60, classes);
        // a pure superposition can cancel; draw another model
        let Ok(model) = train_checked(&data, &encoder, mode, fault, audit) else {
            continue;
        };
        built += 1;
        for _ in 0..queries {
            cases += 1;
            let x_star = random_point(&mut rng, &map, num_features);
            let fast = predict_with(&model, &x_star, PredictPath::Fast);
            let naive = predict_with(&model, &x_star, PredictPath::Naive);
            match (&fast, &naive) {
                (Ok(fast), Ok(naive)) => {
                    audit.record("rho_y (fast)", &fast.rho_y);
                    audit.record("rho_y (naive)", &naive.rho_y);
                    worst = worst.max(fast.rho_y.max_abs_diff(&naive.rho_y));
                }
                _ if is_zero_support(&fast) && is_zero_support(&naive) => {}
                _ => mismatches += 1,
            }
        }
    }
    CheckResult::from_deviation("fast-vs-naive", cases, worst, FAST_NAIVE_TOL, mismatches)
}

/// `|⟨ψ(u)|ψ(v)⟩|² = exp(−(u² + v² − 2uv cos(u − v)))` for the truncated
/// coherent state with modulus and phase both equal to the input, `γ = 1`,
/// 32 Fock states, on a grid over `[0, π]²`.
pub fn check_coherent_closed_form(grid: usize) -> CheckResult {
    const GAMMA: f64 = 1.0;
    const DIM: usize = 32;
    let points: Vec<f64> = (0..grid)
        .map(|i| if grid == 1 { 0.0 } else { PI * i as f64 / (grid - 1) as f64 })
        .collect();
    let states: Vec<_> = points
        .iter()
        .map(|&u| encode_coherent_scalar(u, u, GAMMA, DIM).expect("valid coherent parameters"))
        .collect();
    let mut worst = 0.0f64;
    for (u, a) in points.iter().zip(&states) {
        for (v, b) in points.iter().zip(&states) {
            let want = (-GAMMA * (u * u + v * v - 2.0 * u * v * (u - v).cos())).exp();
            let got = a.overlap_sq(b).expect("equal dimensions");
            worst = worst.max((got - want).abs());
        }
    }
    CheckResult::from_deviation("coherent-closed-form", grid * grid, worst, CLOSED_FORM_TOL, 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, fault: Option<Fault>) -> VerifyConfig {
        VerifyConfig {
            seed,
            bayes_datasets: 20,
            kernel_datasets: 5,
            path_models: 10,
            queries_per_model: 4,
            closed_form_grid: 6,
            fault,
        }
    }

    #[test]
    fn clean_run_passes() {
        let report = run_verification(&small(3, None));
        assert!(report.passed(), "{report}");
        assert_eq!(report.checks.len(), 9);
    }

    #[test]
    fn same_seed_same_report() {
        assert_eq!(run_verification(&small(7, None)), run_verification(&small(7, None)));
    }

    #[test]
    fn perturbed_rho_is_caught() {
        let report = run_verification(&small(3, Some(Fault::PerturbRho)));
        assert!(!report.passed());
        let failed: Vec<_> = report.failed().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"bayes-equivalence"), "{failed:?}");
        assert!(failed.contains(&"density-invariants"), "{failed:?}");
        assert!(report.to_string().contains("FAIL bayes-equivalence"));
    }

    #[test]
    fn audit_flags_bad_matrices() {
        let mut audit = DensityAudit::default();
        audit.record("good", &DensityMatrix::diagonal(&[0.25, 0.75]));
        assert!(audit.passed());
        audit.record("negative", &DensityMatrix::diagonal(&[1.5, -0.5]));
        assert!(!audit.passed());
        assert_eq!(audit.checked, 2);
        assert!(audit.first_failure.as_deref().unwrap().starts_with("negative"));
    }

    #[test]
    fn closed_form_grid_is_tight() {
        let check = check_coherent_closed_form(20);
        assert!(check.passed, "{check}");
        assert_eq!(check.cases, 400);
    }
}
