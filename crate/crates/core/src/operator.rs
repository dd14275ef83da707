//! Dense Hermitian operators and the spectral calculus built on top of them.
//!
//! Everything here works on finite matrices standing in for bounded
//! self-adjoint operators. Inputs are hermitized on construction, so every
//! [`Operator`] is exactly self-adjoint and the symmetric eigensolver can be
//! used throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Matrix = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("operator dimension must be positive")]
    EmptyOperator,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("eigensolver did not converge (dim {dim})")]
    EigenNonConvergence { dim: usize },
    #[error("operator is not a positive contraction: eigenvalue {witness}")]
    NotPositiveContraction { witness: f64 },
    #[error("operator is not positive: eigenvalue {witness}")]
    NotPositive { witness: f64 },
    #[error("ordering precondition fails: min eigenvalue of the difference is {min_eigenvalue}")]
    NotOrdered { min_eigenvalue: f64 },
    #[error("malformed operator document: {0}")]
    Malformed(String),
}

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// An eigenvalue `λ` is clustered into `{1}` iff `λ >= 1 - eig`.
    pub eig: f64,
    /// PSD slack per unit of dimension; see [`Tolerances::psd`].
    pub psd_per_dim: f64,
    /// Relative tolerance for the fixed-vector conditions.
    pub fix: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig: 1e-9,
            psd_per_dim: 1e-10,
            fix: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn psd(&self, dim: usize) -> f64 {
        self.psd_per_dim * dim as f64
    }
}

/// A bounded self-adjoint operator on `C^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorDocument", into = "OperatorDocument")]
pub struct Operator {
    matrix: Matrix,
}

impl Operator {
    /// Builds an operator from an arbitrary square matrix, replacing it by
    /// `(M + M*) / 2`.
    pub fn new(matrix: Matrix) -> Result<Self, OperatorError> {
        let (rows, cols) = matrix.shape();
        if rows == 0 {
            return Err(OperatorError::EmptyOperator);
        }
        if rows != cols {
            return Err(OperatorError::NotSquare { rows, cols });
        }
        for c in 0..cols {
            for r in 0..rows {
                let z = matrix[(r, c)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(OperatorError::NonFinite { row: r, col: c });
                }
            }
        }
        let hermitized = (&matrix + matrix.adjoint()).map(|z| z * 0.5);
        Ok(Self { matrix: hermitized })
    }

    pub fn from_real(matrix: DMatrix<f64>) -> Result<Self, OperatorError> {
        Self::new(matrix.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self, OperatorError> {
        let v =
            DVector::from_iterator(values.len(), values.iter().map(|&x| Complex64::new(x, 0.0)));
        Self::new(Matrix::from_diagonal(&v))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "identity of dimension 0");
        Self {
            matrix: Matrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero operator of dimension 0");
        Self {
            matrix: Matrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        &self.matrix * v
    }

    /// True when every entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator, OperatorError> {
        self.check_dim(other)?;
        Operator::new(&self.matrix - &other.matrix)
    }

    /// `U A U*` for a square `U` of matching size.
    pub fn conjugate_by(&self, u: &Matrix) -> Result<Operator, OperatorError> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(OperatorError::DimensionMismatch {
                left: self.dim(),
                right: u.nrows(),
            });
        }
        Operator::new(u * &self.matrix * u.adjoint())
    }

    /// `A^{1/2} B A^{1/2}` where `self = A^{1/2}`; the result is hermitized.
    pub fn sandwich(&self, inner: &Operator) -> Result<Operator, OperatorError> {
        self.check_dim(inner)?;
        Operator::new(&self.matrix * &inner.matrix * &self.matrix)
    }

    pub fn check_dim(&self, other: &Operator) -> Result<(), OperatorError> {
        if self.dim() != other.dim() {
            return Err(OperatorError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    pub fn decompose(&self) -> Result<SpectralDecomposition, OperatorError> {
        spectral_decompose(self)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, OperatorError> {
        Ok(spectral_decompose(self)?.eigenvalues)
    }

    /// Operator norm, i.e. the largest eigenvalue in absolute value.
    pub fn op_norm(&self) -> Result<f64, OperatorError> {
        let ev = self.eigenvalues()?;
        Ok(ev.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
    }

    /// Positive square root. Eigenvalues in `[-psd_slack, 0)` are clipped to
    /// zero; anything more negative is rejected.
    pub fn sqrt(&self, psd_slack: f64) -> Result<Operator, OperatorError> {
        let sd = self.decompose()?;
        if let Some(&min) = sd.eigenvalues.first() {
            if min < -psd_slack {
                return Err(OperatorError::NotPositive { witness: min });
            }
        }
        Ok(sd.apply_function(|x| x.max(0.0).sqrt()))
    }
}

/// Largest singular value of an arbitrary (not necessarily Hermitian) matrix.
pub fn operator_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &s| a.max(s))
}

/// `⟨x, y⟩`, linear in the first argument.
pub fn inner(x: &Vector, y: &Vector) -> Complex64 {
    y.dotc(x)
}

/// Eigenvalues in ascending order with an orthonormal eigenvector per column.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ f(λ_k) v_k v_k*`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> Operator {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let w = Complex64::new(f(lambda), 0.0);
            for r in 0..n {
                scaled[(r, k)] *= w;
            }
        }
        Operator::new(scaled * self.eigenvectors.adjoint()).expect("finite by construction")
    }

    pub fn reconstruct(&self) -> Operator {
        self.apply_function(|x| x)
    }

    /// `‖V*V − I‖_op`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        operator_norm(&(gram - Matrix::identity(n, n)))
    }

    /// Projection onto the eigenvectors whose eigenvalue satisfies `keep`.
    pub fn projection_where(&self, keep: impl Fn(f64) -> bool) -> Projection {
        let n = self.dim();
        let selected: Vec<usize> = (0..n).filter(|&k| keep(self.eigenvalues[k])).collect();
        let mut m = Matrix::zeros(n, n);
        for &k in &selected {
            let v = self.eigenvectors.column(k);
            m += &v * v.adjoint();
        }
        Projection {
            operator: Operator::new(m).expect("finite by construction"),
            rank: selected.len(),
        }
    }
}

/// Spectral decomposition with eigenvalues sorted ascending.
///
/// Real inputs take the real-symmetric solver; the eigenvectors are then
/// embedded in the complex space.
pub fn spectral_decompose(a: &Operator) -> Result<SpectralDecomposition, OperatorError> {
    let dim = a.dim();
    let max_iter = 1000 * dim.max(1);
    let (values, vectors): (Vec<f64>, Matrix) = if a.is_real() {
        let real = a.matrix.map(|z| z.re);
        let eig = SymmetricEigen::try_new(real, f64::EPSILON, max_iter)
            .ok_or(OperatorError::EigenNonConvergence { dim })?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|x| Complex64::new(x, 0.0)),
        )
    } else {
        let eig = SymmetricEigen::try_new(a.matrix.clone(), f64::EPSILON, max_iter)
            .ok_or(OperatorError::EigenNonConvergence { dim })?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let eigenvectors = Matrix::from_fn(dim, dim, |r, c| vectors[(r, order[c])]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// A real interval with independently open or closed endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    /// Membership with endpoint clustering: closed endpoints are widened by
    /// `tol`, open endpoints are narrowed by `tol`.
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo - tol
        } else {
            x > self.lo + tol
        };
        let below = if self.hi_closed {
            x <= self.hi + tol
        } else {
            x < self.hi - tol
        };
        above && below
    }
}

/// An orthogonal projection together with its rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub operator: Operator,
    pub rank: usize,
}

impl Projection {
    pub fn zero(dim: usize) -> Self {
        Self {
            operator: Operator::zeros(dim),
            rank: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        self.operator.apply(v)
    }

    /// `v − Pv`.
    pub fn apply_complement(&self, v: &Vector) -> Vector {
        v - self.operator.apply(v)
    }

    /// `‖P² − P‖_op`.
    pub fn idempotency_defect(&self) -> f64 {
        let m = self.operator.matrix();
        operator_norm(&(m * m - m))
    }

    pub fn trace(&self) -> f64 {
        self.operator.matrix().trace().re
    }
}

/// `1_I(A)` with endpoint comparisons resolved by `tol.eig`.
pub fn spectral_projection(
    a: &Operator,
    interval: Interval,
    tol: &Tolerances,
) -> Result<Projection, OperatorError> {
    let sd = a.decompose()?;
    Ok(sd.projection_where(|x| interval.contains(x, tol.eig)))
}

/// `1_{{1}}(T)`, the projection onto the fixed-point space of `T`.
pub fn fixed_point_projection(t: &Operator, tol: &Tolerances) -> Result<Projection, OperatorError> {
    let check = is_positive_contraction(t, tol)?;
    if let Some(witness) = check.witness {
        return Err(OperatorError::NotPositiveContraction { witness });
    }
    spectral_projection(t, Interval::point(1.0), tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub holds: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// The eigenvalue furthest outside `[0, 1]`, when the check fails.
    pub witness: Option<f64>,
}

/// Checks `0 <= T <= 1` with slack `tol.psd(dim)` on both ends.
pub fn is_positive_contraction(
    t: &Operator,
    tol: &Tolerances,
) -> Result<ContractionCheck, OperatorError> {
    let ev = t.eigenvalues()?;
    let min = ev[0];
    let max = ev[ev.len() - 1];
    let slack = tol.psd(t.dim());
    let below = min < -slack;
    let above = max > 1.0 + slack;
    let witness = match (below, above) {
        (false, false) => None,
        (true, false) => Some(min),
        (false, true) => Some(max),
        (true, true) => Some(if -min > max - 1.0 { min } else { max }),
    };
    Ok(ContractionCheck {
        holds: witness.is_none(),
        min_eigenvalue: min,
        max_eigenvalue: max,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoewnerCheck {
    pub holds: bool,
    /// Smallest eigenvalue of `B − A`.
    pub min_eigenvalue: f64,
}

/// `A <= B` in the Loewner order.
pub fn loewner_leq(
    a: &Operator,
    b: &Operator,
    tol: &Tolerances,
) -> Result<LoewnerCheck, OperatorError> {
    a.check_dim(b)?;
    let diff = b.sub(a)?;
    let min = diff.eigenvalues()?[0];
    Ok(LoewnerCheck {
        holds: min >= -tol.psd(a.dim()),
        min_eigenvalue: min,
    })
}

/// The three equivalent fixed-vector conditions for a positive contraction:
/// `Tξ = ξ`, `‖Tξ‖ = ‖ξ‖` and `⟨Tξ, ξ⟩ = ‖ξ‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedVectorReport {
    pub conditions: [bool; 3],
    pub residuals: [f64; 3],
    /// Some residual falls in `[fix/10, fix*10]`, where the booleans are not
    /// trusted to agree.
    pub ambiguous: bool,
}

impl FixedVectorReport {
    pub fn agree(&self) -> bool {
        self.conditions.iter().all(|&c| c == self.conditions[0])
    }
}

pub fn check_fixed_vector_equivalence(
    t: &Operator,
    xi: &Vector,
    tol: &Tolerances,
) -> Result<FixedVectorReport, OperatorError> {
    if t.dim() != xi.len() {
        return Err(OperatorError::DimensionMismatch {
            left: t.dim(),
            right: xi.len(),
        });
    }
    let check = is_positive_contraction(t, tol)?;
    if let Some(witness) = check.witness {
        return Err(OperatorError::NotPositiveContraction { witness });
    }
    let norm = xi.norm();
    if norm == 0.0 {
        return Ok(FixedVectorReport {
            conditions: [true; 3],
            residuals: [0.0; 3],
            ambiguous: false,
        });
    }
    let t_xi = t.apply(xi);
    let norm_sq = norm * norm;
    let r1 = (&t_xi - xi).norm() / norm;
    let r2 = (t_xi.norm() - norm).abs() / norm;
    let r3 = (inner(&t_xi, xi).re - norm_sq).abs() / norm_sq;
    let residuals = [r1, r2, r3];
    let band = (tol.fix / 10.0)..=(tol.fix * 10.0);
    Ok(FixedVectorReport {
        conditions: residuals.map(|r| r <= tol.fix),
        residuals,
        ambiguous: residuals.iter().any(|r| band.contains(r)),
    })
}

/// `1_{{1}}(T') <= 1_{{1}}(T)` for `0 <= T' <= T <= 1`.
pub fn check_projection_monotone(
    tp: &Operator,
    t: &Operator,
    tol: &Tolerances,
) -> Result<bool, OperatorError> {
    let order = loewner_leq(tp, t, tol)?;
    if !order.holds {
        return Err(OperatorError::NotOrdered {
            min_eigenvalue: order.min_eigenvalue,
        });
    }
    let p_small = fixed_point_projection(tp, tol)?;
    let p_big = fixed_point_projection(t, tol)?;
    Ok(loewner_leq(&p_small.operator, &p_big.operator, tol)?.holds)
}

/// Wire form: `{"dim": n, "entries": [[[re, im], ...], ...]}`, rows in order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorDocument {
    pub dim: usize,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl From<Operator> for OperatorDocument {
    fn from(op: Operator) -> Self {
        let dim = op.dim();
        let entries = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| [op.matrix[(r, c)].re, op.matrix[(r, c)].im])
                    .collect()
            })
            .collect();
        Self { dim, entries }
    }
}

impl TryFrom<OperatorDocument> for Operator {
    type Error = OperatorError;

    fn try_from(doc: OperatorDocument) -> Result<Self, Self::Error> {
        if doc.entries.len() != doc.dim {
            return Err(OperatorError::Malformed(format!(
                "dim is {} but {} rows given",
                doc.dim,
                doc.entries.len()
            )));
        }
        if let Some((r, row)) = doc
            .entries
            .iter()
            .enumerate()
            .find(|(_, row)| row.len() != doc.dim)
        {
            return Err(OperatorError::Malformed(format!(
                "row {r} has {} entries, expected {}",
                row.len(),
                doc.dim
            )));
        }
        let m = Matrix::from_fn(doc.dim, doc.dim, |r, c| {
            let [re, im] = doc.entries[r][c];
            Complex64::new(re, im)
        });
        Operator::new(m)
    }
}
