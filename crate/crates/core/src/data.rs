//! Labeled data sets: toy generators, stratified splits, accuracy and CSV I/O.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{QmcError, Result};

/// Rows of real features with a class index per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    num_features: usize,
    /// Free-form record of how the data was produced (generator, seed, split).
    pub provenance: Vec<String>,
}

impl LabeledDataset {
    /// Builds a data set; every label must index `class_names` and all rows
    /// must have the same length.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let num_features = rows.first().map_or(0, Vec::len);
        Self::with_num_features(rows, labels, class_names, num_features)
    }

    /// Like [`LabeledDataset::new`] but also valid for zero rows.
    pub fn with_num_features(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        num_features: usize,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(QmcError::LengthMismatch {
                left: rows.len(),
                right: labels.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != num_features) {
            return Err(QmcError::ShapeMismatch {
                expected: num_features,
                actual: bad.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(QmcError::Schema(format!(
                "label index {bad} but only {} classes",
                class_names.len()
            )));
        }
        Ok(Self {
            rows,
            labels,
            class_names,
            num_features,
            provenance: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn label_name(&self, i: usize) -> &str {
        &self.class_names[self.labels[i]]
    }

    /// Class name of every row.
    pub fn label_names(&self) -> Vec<&str> {
        (0..self.len()).map(|i| self.label_name(i)).collect()
    }

    /// Row/label pairs.
    pub fn samples(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.rows.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    /// Subset of rows in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            num_features: self.num_features,
            provenance: self.provenance.clone(),
        }
    }
}

/// The built-in two-class toy problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Moons,
    Circles,
    Spirals,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [DatasetKind::Moons, DatasetKind::Circles, DatasetKind::Spirals];

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Moons => "moons",
            DatasetKind::Circles => "circles",
            DatasetKind::Spirals => "spirals",
        }
    }

    /// Default noise level of the generator.
    pub fn default_noise(&self) -> f64 {
        match self {
            DatasetKind::Moons => 0.1,
            DatasetKind::Circles => 0.17,
            DatasetKind::Spirals => 0.3,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = QmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "moons" => Ok(DatasetKind::Moons),
            "circles" => Ok(DatasetKind::Circles),
            "spirals" => Ok(DatasetKind::Spirals),
            other => Err(QmcError::UnknownDataset(other.to_string())),
        }
    }
}

pub const DEFAULT_SIZE: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_TEST_FRACTION: f64 = 0.5;
/// Ratio of inner to outer radius for `circles`.
pub const CIRCLES_FACTOR: f64 = 0.5;
/// Number of turns of each `spirals` arm.
pub const SPIRAL_TURNS: f64 = 1.75;

/// Generates a named toy data set; see [`generate`].
pub fn generate_named(name: &str, n: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    generate(name.parse()?, n, noise, seed)
}

/// Generates `n` points of a two-class toy problem, class 0 first.
///
/// * moons: upper unit half-circle, and a lower one shifted to center `(1, 0.5)`.
/// * circles: concentric circles of radius 1 and [`CIRCLES_FACTOR`].
/// * spirals: two Archimedean arms `r = θ/θ_max`, `θ ∈ [0, θ_max]`,
///   `θ_max = 2π·SPIRAL_TURNS`, the second rotated by π.
///
/// Moons and circles get isotropic Gaussian noise of stddev `noise`;
/// spirals perturb the arm parameter of the radius and of the angle
/// independently by `noise` radians.
pub fn generate(kind: DatasetKind, n: usize, noise: f64, seed: u64) -> Result<LabeledDataset> {
    if n < 2 {
        return Err(QmcError::InvalidParameter(format!("need at least 2 points, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(QmcError::InvalidParameter(format!("noise must be nonnegative, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let counts = [n - n / 2, n / 2];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (class, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let point = match kind {
                DatasetKind::Moons => {
                    let t = rng.random_range(0.0..=PI);
                    let (x, y) = if class == 0 {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    [x + noise * gauss.sample(&mut rng), y + noise * gauss.sample(&mut rng)]
                }
                DatasetKind::Circles => {
                    let t = rng.random_range(0.0..2.0 * PI);
                    let radius = if class == 0 { 1.0 } else { CIRCLES_FACTOR };
                    [
                        radius * t.cos() + noise * gauss.sample(&mut rng),
                        radius * t.sin() + noise * gauss.sample(&mut rng),
                    ]
                }
                DatasetKind::Spirals => {
                    let max_angle = 2.0 * PI * SPIRAL_TURNS;
                    let theta = rng.random_range(0.0..=max_angle);
                    let radius = (theta + noise * gauss.sample(&mut rng)) / max_angle;
                    let angle = theta + noise * gauss.sample(&mut rng) + class as f64 * PI;
                    [radius * angle.cos(), radius * angle.sin()]
                }
            };
            rows.push(point.to_vec());
            labels.push(class);
        }
    }
    let mut data = LabeledDataset::new(rows, labels, vec!["0".into(), "1".into()])?;
    data.provenance
        .push(format!("generator={kind} n={n} noise={noise} seed={seed}"));
    Ok(data)
}

/// Stratified split; each class contributes `round(fraction·count)` test rows.
///
/// Both parts keep the original row order.
pub fn split(data: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(QmcError::InvalidSplit(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; data.len()];
    for class in 0..data.num_classes() {
        let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == class).collect();
        members.shuffle(&mut rng);
        let take = (test_fraction * members.len() as f64).round() as usize;
        for &i in &members[..take] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| is_test[i]);
    if train.is_empty() || test.is_empty() {
        return Err(QmcError::InvalidSplit(format!(
            "fraction {test_fraction} leaves {} train and {} test rows",
            train.len(),
            test.len()
        )));
    }
    let tag = format!("split test_fraction={test_fraction} seed={seed}");
    let mut train = data.select(&train);
    train.provenance.push(format!("{tag} part=train"));
    let mut test = data.select(&test);
    test.provenance.push(format!("{tag} part=test"));
    Ok((train, test))
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(QmcError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(QmcError::InvalidParameter("accuracy of an empty prediction".into()));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Shortest text that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `f1,...,fn,label` followed by one line per row.
pub fn write_csv_to(data: &LabeledDataset, out: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let to_err = |e: csv::Error| QmcError::Schema(e.to_string());
    let mut header: Vec<String> = (1..=data.num_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(to_err)?;
    for (row, label) in data.samples() {
        let mut record: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        record.push(data.class_names[label].clone());
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush().map_err(|e| QmcError::Schema(e.to_string()))
}

pub fn write_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| QmcError::io(path, e))?;
    write_csv_to(data, std::io::BufWriter::new(file))
}

/// Parses a CSV data set; class names are indexed by first appearance.
///
/// A header-only file yields an empty data set.
pub fn read_csv_from(input: impl Read) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(QmcError::Schema("empty file: missing header".into())),
        Some(h) => h.map_err(|e| parse_error(&e))?,
    };
    let columns: Vec<&str> = header.iter().map(str::trim).collect();
    if columns.last() != Some(&"label") {
        return Err(QmcError::Schema("missing `label` column as last header field".into()));
    }
    let num_features = columns.len() - 1;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    for record in records {
        let record = record.map_err(|e| parse_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != num_features + 1 {
            return Err(QmcError::Parse {
                line,
                message: format!("expected {} fields, found {}", num_features + 1, record.len()),
            });
        }
        let row = (0..num_features)
            .map(|j| {
                record[j].trim().parse::<f64>().map_err(|_| QmcError::Parse {
                    line,
                    message: format!("non-numeric feature `{}` in column {}", &record[j], j + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let name = record[num_features].trim();
        let label = match class_names.iter().position(|c| c == name) {
            Some(i) => i,
            None => {
                class_names.push(name.to_string());
                class_names.len() - 1
            }
        };
        rows.push(row);
        labels.push(label);
    }
    LabeledDataset::with_num_features(rows, labels, class_names, num_features)
}

fn parse_error(e: &csv::Error) -> QmcError {
    QmcError::Parse {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| QmcError::io(path, e))?;
    let mut data = read_csv_from(std::io::BufReader::new(file))?;
    data.provenance.push(format!("file={}", path.display()));
    Ok(data)
}
