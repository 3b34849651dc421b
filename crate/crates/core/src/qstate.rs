//! Dense complex state-vector and density-matrix algebra.
//!
//! Bipartite objects over `H_X ⊗ H_Y` are flattened row-major with the X
//! index as the slow one: the pair `(i, a)` lives at `i * dim_y + a`. Every
//! module in the crate relies on this convention.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QmcError, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance on `‖v‖₂ − 1` for a valid state vector.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on `max |ρ − ρ†|` for a valid density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on `|Tr ρ − 1|` for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = -1e-9;
/// Tolerance on `‖Π² − Π‖` and `‖Π − Π†‖` for projectors.
pub const PROJECTOR_TOL: f64 = 1e-8;
/// Relative support below which a projection is considered empty.
pub const SUPPORT_EPS: f64 = 1e-12;

/// Unit-norm complex amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    /// Wraps `amps`, rejecting empty or non-normalized input.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QmcError::ZeroVector);
        }
        let norm = l2_norm(&amps);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QmcError::NotUnitNorm { norm });
        }
        Ok(Self { amps })
    }

    /// Divides `amps` by its norm.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        let norm = l2_norm(&amps);
        if amps.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(QmcError::ZeroVector);
        }
        let inv = 1.0 / norm;
        amps.iter_mut().for_each(|a| *a *= inv);
        Ok(Self { amps })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    /// Computational basis ket `|index⟩` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(QmcError::ShapeMismatch {
                expected: dim,
                actual: index + 1,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(QmcError::ShapeMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`, the fidelity between two pure states.
    pub fn overlap_sq(&self, other: &StateVector) -> Result<f64> {
        self.inner(other).map(|z| z.norm_sqr())
    }

    /// Same vector multiplied by a global phase `e^{iθ}`.
    pub fn with_phase(&self, theta: f64) -> StateVector {
        let phase = C64::from_polar(1.0, theta);
        StateVector {
            amps: self.amps.iter().map(|a| a * phase).collect(),
        }
    }
}

pub(crate) fn l2_norm(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Dimensions `(k, ℓ)` of the input and output factors of `H_X ⊗ H_Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteShape {
    pub dim_x: usize,
    pub dim_y: usize,
}

impl BipartiteShape {
    pub fn new(dim_x: usize, dim_y: usize) -> Result<Self> {
        if dim_x == 0 || dim_y == 0 {
            return Err(QmcError::InvalidParameter(format!(
                "bipartite dimensions must be positive, got ({dim_x}, {dim_y})"
            )));
        }
        Ok(Self { dim_x, dim_y })
    }

    /// Dimension of the joint space, `k·ℓ`.
    pub fn dim(&self) -> usize {
        self.dim_x * self.dim_y
    }

    #[inline]
    pub fn index(&self, i: usize, a: usize) -> usize {
        i * self.dim_y + a
    }

    pub(crate) fn check(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(QmcError::ShapeMismatch {
                expected: self.dim(),
                actual: dim,
            });
        }
        Ok(())
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(QmcError::ShapeMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(QmcError::ShapeMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            entries.extend(row.iter().map(|&v| C64::new(v, 0.0)));
        }
        Self::from_entries(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<C64> {
        self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &SquareMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(QmcError::ShapeMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a == ZERO {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            dim: n,
            entries: out,
        })
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &SquareMatrix) -> Self {
        let (p, q) = (self.dim, other.dim);
        Self::from_fn(p * q, |r, c| {
            self.get(r / q, c / q) * other.get(r % q, c % q)
        })
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let m = DMatrix::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

/// Hermitian, positive-semidefinite, unit-trace matrix.
///
/// Construction only checks shape; [`validate_density`] performs the full
/// invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: SquareMatrix,
}

impl DensityMatrix {
    pub fn from_matrix(matrix: SquareMatrix) -> Self {
        Self { matrix }
    }

    pub fn from_entries(dim: usize, entries: Vec<C64>) -> Result<Self> {
        SquareMatrix::from_entries(dim, entries).map(Self::from_matrix)
    }

    /// Diagonal density matrix with the given (already normalized) weights.
    pub fn diagonal(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut m = SquareMatrix::zeros(n);
        for (i, &w) in weights.iter().enumerate() {
            m.entries[i * n + i] = C64::new(w, 0.0);
        }
        Self { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.matrix
    }

    pub fn entries(&self) -> &[C64] {
        &self.matrix.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.matrix.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Real parts of the diagonal.
    pub fn diagonal_probabilities(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// `Tr[ρ²]`, computed as the Frobenius norm squared (valid for Hermitian ρ).
    pub fn purity(&self) -> f64 {
        self.matrix.entries.iter().map(|e| e.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.hermitian_eigenvalues()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.matrix.max_abs_diff(&other.matrix)
    }

    /// Largest modulus among off-diagonal entries.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.get(i, j).norm());
                }
            }
        }
        worst
    }
}

/// `a ⊗ b` with amplitude `a_i · b_j` at index `i·dim(b) + j`.
pub fn tensor_product(a: &StateVector, b: &StateVector) -> StateVector {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amps {
        amps.extend(b.amps.iter().map(|y| x * y));
    }
    StateVector { amps }
}

/// Tensor product of a sequence of factors, left to right.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a StateVector>) -> Option<StateVector> {
    let mut iter = factors.into_iter();
    let first = iter.next()?.clone();
    Some(iter.fold(first, |acc, f| tensor_product(&acc, f)))
}

/// `|v⟩⟨v|`.
pub fn outer_product(v: &StateVector) -> DensityMatrix {
    let n = v.dim();
    let mut entries = Vec::with_capacity(n * n);
    for vi in &v.amps {
        entries.extend(v.amps.iter().map(|vj| vi * vj.conj()));
    }
    DensityMatrix {
        matrix: SquareMatrix { dim: n, entries },
    }
}

/// Reduced state on the Y factor: `ρ_Y[a][b] = Σ_i ρ[(i,a),(i,b)]`.
pub fn partial_trace_out_x(rho: &DensityMatrix, shape: BipartiteShape) -> Result<DensityMatrix> {
    shape.check(rho.dim())?;
    let l = shape.dim_y;
    let mut out = vec![ZERO; l * l];
    for i in 0..shape.dim_x {
        for a in 0..l {
            let row = rho.matrix.row(shape.index(i, a));
            for b in 0..l {
                out[a * l + b] += row[shape.index(i, b)];
            }
        }
    }
    DensityMatrix::from_entries(l, out)
}

/// Outcome of a projective measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    /// `ΠρΠ / Tr[ΠρΠ]`.
    pub state: DensityMatrix,
    /// `Tr[ΠρΠ]`, the probability of the outcome.
    pub probability: f64,
}

/// Applies the projector and renormalizes.
pub fn project_and_renormalize(rho: &DensityMatrix, projector: &SquareMatrix) -> Result<Measurement> {
    if projector.dim() != rho.dim() {
        return Err(QmcError::ShapeMismatch {
            expected: rho.dim(),
            actual: projector.dim(),
        });
    }
    let squared = projector.matmul(projector)?;
    let defect = projector
        .hermiticity_defect()
        .max(squared.max_abs_diff(projector));
    if defect > PROJECTOR_TOL {
        return Err(QmcError::NotAProjector { defect });
    }
    let projected = projector.matmul(&rho.matrix)?.matmul(projector)?;
    let support = projected.trace().re;
    if support <= SUPPORT_EPS * rho.trace().abs() {
        return Err(QmcError::ZeroSupport { support });
    }
    Ok(Measurement {
        state: DensityMatrix::from_matrix(projected.scale(C64::new(1.0 / support, 0.0))),
        probability: support,
    })
}

/// Result of [`validate_density`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidityReport {
    pub hermiticity_defect: f64,
    pub trace_defect: f64,
    pub min_eigenvalue: f64,
}

impl ValidityReport {
    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect <= HERMITIAN_TOL
    }

    pub fn has_unit_trace(&self) -> bool {
        self.trace_defect <= TRACE_TOL
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= PSD_TOL
    }

    pub fn passed(&self) -> bool {
        self.is_hermitian() && self.has_unit_trace() && self.is_psd()
    }
}

impl std::fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "hermiticity defect {:.3e}, trace defect {:.3e}, min eigenvalue {:.3e}",
            self.hermiticity_defect, self.trace_defect, self.min_eigenvalue
        )
    }
}

pub fn validate_density(rho: &DensityMatrix) -> ValidityReport {
    let trace = rho.matrix.trace();
    ValidityReport {
        hermiticity_defect: rho.matrix.hermiticity_defect(),
        trace_defect: (trace - ONE).norm(),
        min_eigenvalue: rho.eigenvalues().first().copied().unwrap_or(f64::NAN),
    }
}
