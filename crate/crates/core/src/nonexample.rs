//! A sequence of unit vectors `ξ_m = U_m ⋯ U_1 e_1`, each `U_m` a plane
//! rotation, whose consecutive differences tend to zero and which converges
//! weakly to 0, yet is not totally bounded.
//!
//! Row `n` walks from `e_n` towards `e_{n+1}` in `n` steps of angle
//! `θ_n = π/(2n)`:
//!
//! ```text
//! η_{n,j} = cos((j-1)θ_n) e_n + sin((j-1)θ_n) e_{n+1},   1 <= j <= n
//! ξ_{⟨n,j⟩} = η_{n,j},   ⟨n,j⟩ = j + (n-1)n/2
//! ```

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::export::fmt_float;
use crate::operator::Vector;
use crate::product::orbit_epsilon_net;

/// Tolerance for the row-distance identity.
pub const DISTANCE_TOL: f64 = 1e-10;
/// Singular values above this count towards `rank(U − I)`.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonexampleError {
    #[error("N_max must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
    #[error("vectors {m} and {next} are antipodal; the rotation plane is undetermined")]
    Antipodal { m: usize, next: usize },
    #[error("vector {m} is not a unit vector (norm {norm})")]
    NotUnit { m: usize, norm: f64 },
    #[error("vectors have dimensions {left} and {right}")]
    DimensionMismatch { left: usize, right: usize },
}

pub fn theta(n: usize) -> f64 {
    FRAC_PI_2 / n as f64
}

/// `⟨n,j⟩ = j + (n-1)n/2`, one-based.
pub fn index(n: usize, j: usize) -> usize {
    j + (n - 1) * n / 2
}

/// Inverse of [`index`].
pub fn row_and_column(m: usize) -> (usize, usize) {
    let mut n = 1;
    while index(n + 1, 1) <= m {
        n += 1;
    }
    (n, m - index(n, 1) + 1)
}

#[derive(Debug, Clone)]
pub struct NonexampleSequence {
    n_max: usize,
    /// `vectors[m - 1] = ξ_m`
    vectors: Vec<DVector<f64>>,
}

/// `η_{n,j}` in `R^dim`.
pub fn eta(n: usize, j: usize, dim: usize) -> DVector<f64> {
    let angle = (j - 1) as f64 * theta(n);
    let mut v = DVector::zeros(dim);
    v[n - 1] = angle.cos();
    if j > 1 {
        v[n] = angle.sin();
    }
    v
}

pub fn build_nonexample(n_max: usize) -> Result<NonexampleSequence, NonexampleError> {
    if n_max < 2 {
        return Err(NonexampleError::TooSmall(n_max));
    }
    let dim = n_max + 1;
    let vectors = (1..=n_max)
        .flat_map(|n| (1..=n).map(move |j| eta(n, j, dim)))
        .collect();
    Ok(NonexampleSequence { n_max, vectors })
}

impl NonexampleSequence {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn ambient_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `ξ_m`, one-based.
    pub fn xi(&self, m: usize) -> &DVector<f64> {
        &self.vectors[m - 1]
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    pub fn angle_of(&self, n: usize) -> f64 {
        theta(n)
    }

    /// The first `rows` rows, `rows(rows+1)/2` vectors.
    pub fn prefix(&self, rows: usize) -> &[DVector<f64>] {
        &self.vectors[..rows * (rows + 1) / 2]
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.vectors
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let (n, j) = row_and_column(i + 1);
                    json!({ "m": i + 1, "n": n, "j": j, "coords": sparse(v) })
                })
                .collect(),
        )
    }
}

/// Nonzero coordinates keyed by one-based index.
fn sparse(v: &DVector<f64>) -> BTreeMap<usize, f64> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(i, &x)| (i + 1, x))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    WithinRow,
    CrossRow,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDistance {
    pub m: usize,
    pub row: usize,
    pub kind: StepKind,
    pub distance: f64,
    /// `2 sin(θ_n / 2)` for the row of `ξ_m`.
    pub expected: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StepDistanceReport {
    pub steps: Vec<StepDistance>,
}

impl StepDistanceReport {
    pub fn within_row_holds(&self) -> bool {
        self.steps
            .iter()
            .filter(|s| s.kind == StepKind::WithinRow)
            .all(|s| s.matches)
    }

    pub fn cross_row_holds(&self) -> bool {
        self.steps
            .iter()
            .filter(|s| s.kind == StepKind::CrossRow)
            .all(|s| s.matches)
    }

    /// Largest `|distance − expected|` over steps of the given kind.
    pub fn max_deviation(&self, kind: StepKind) -> f64 {
        self.steps
            .iter()
            .filter(|s| s.kind == kind)
            .map(|s| (s.distance - s.expected).abs())
            .fold(0.0, f64::max)
    }
}

/// Measures `‖ξ_{m+1} − ξ_m‖` for every consecutive pair against `2 sin(θ_n/2)`.
/// Within-row steps are the asserted part; cross-row steps are reported.
pub fn verify_step_distances(seq: &NonexampleSequence) -> StepDistanceReport {
    let steps = (1..seq.len())
        .map(|m| {
            let (row, column) = row_and_column(m);
            let kind = if column < row {
                StepKind::WithinRow
            } else {
                StepKind::CrossRow
            };
            let distance = (seq.xi(m + 1) - seq.xi(m)).norm();
            let expected = 2.0 * (theta(row) / 2.0).sin();
            StepDistance {
                m,
                row,
                kind,
                distance,
                expected,
                matches: (distance - expected).abs() <= DISTANCE_TOL,
            }
        })
        .collect();
    StepDistanceReport { steps }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoordinateDecay {
    pub coordinate: usize,
    /// `⟨c+1, 1⟩`, after which the coordinate must vanish.
    pub from: usize,
    pub tail_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailDifference {
    pub k: usize,
    pub row: usize,
    /// `max ‖ξ_{m+k} − ξ_m‖` over `m` in the row with `m + k` materialized.
    pub max_distance: f64,
    /// `k · 2 sin(θ_n/2)`
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    /// Weak convergence to 0: each coordinate is eventually zero.
    pub coordinates: Vec<CoordinateDecay>,
    pub weak_null: bool,
    /// Largest `|‖ξ_m‖ − 1|`.
    pub norm_defect: f64,
    pub norms_nonincreasing: bool,
    pub tails: Vec<TailDifference>,
    pub tails_bounded: bool,
}

impl TailReport {
    pub fn all_hold(&self) -> bool {
        self.weak_null && self.norms_nonincreasing && self.tails_bounded
    }
}

/// Finite-truncation checks of: weak convergence to 0, non-increasing norms,
/// and `‖ξ_{m+k} − ξ_m‖ → 0` for each fixed `k <= k_max`.
pub fn verify_tail_conditions(seq: &NonexampleSequence, k_max: usize) -> TailReport {
    let len = seq.len();
    let coordinates: Vec<CoordinateDecay> = (1..seq.n_max())
        .map(|c| {
            let from = index(c + 1, 1);
            let tail_max = (from..=len)
                .map(|m| seq.xi(m)[c - 1].abs())
                .fold(0.0, f64::max);
            CoordinateDecay {
                coordinate: c,
                from,
                tail_max,
            }
        })
        .collect();
    let weak_null = coordinates.iter().all(|c| c.tail_max == 0.0);

    let norms: Vec<f64> = seq.vectors().iter().map(|v| v.norm()).collect();
    let norm_defect = norms.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let norms_nonincreasing = norms.windows(2).all(|w| w[1] <= w[0] + 1e-12);

    let mut tails = Vec::new();
    for k in 1..=k_max {
        for row in 2..=seq.n_max() {
            let first = index(row, 1);
            let last = index(row, row).min(len.saturating_sub(k));
            if first > last {
                continue;
            }
            let max_distance = (first..=last)
                .map(|m| (seq.xi(m + k) - seq.xi(m)).norm())
                .fold(0.0, f64::max);
            tails.push(TailDifference {
                k,
                row,
                max_distance,
                bound: k as f64 * 2.0 * (theta(row) / 2.0).sin(),
            });
        }
    }
    let tails_bounded = tails
        .iter()
        .all(|t| t.max_distance <= t.bound + DISTANCE_TOL);
    TailReport {
        coordinates,
        weak_null,
        norm_defect,
        norms_nonincreasing,
        tails,
        tails_bounded,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NetGrowthRow {
    pub n_max: usize,
    pub epsilon: f64,
    pub net_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetGrowth {
    pub rows: Vec<NetGrowthRow>,
    pub strictly_increasing: bool,
    /// `ε < √2/2`: no ball of radius `ε` holds two basis vectors, so the
    /// net has at least `N_max` members.
    pub lower_bound_guaranteed: bool,
    pub lower_bound_holds: bool,
}

impl NetGrowth {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "N_max,epsilon,net_size")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.n_max, fmt_float(r.epsilon), r.net_size)?;
        }
        Ok(())
    }
}

fn complexify(v: &DVector<f64>) -> Vector {
    v.map(|x| Complex64::new(x, 0.0))
}

/// Greedy ε-net sizes of the first `N` rows for each `N` in `truncations`.
pub fn verify_not_totally_bounded(
    truncations: &[usize],
    epsilon: f64,
) -> Result<NetGrowth, NonexampleError> {
    if !(epsilon > 0.0) {
        return Err(NonexampleError::Epsilon(epsilon));
    }
    let largest = truncations.iter().copied().max().unwrap_or(2).max(2);
    if let Some(&small) = truncations.iter().find(|&&n| n < 2) {
        return Err(NonexampleError::TooSmall(small));
    }
    let seq = build_nonexample(largest)?;
    let points: Vec<Vector> = seq.vectors().iter().map(complexify).collect();
    let rows: Vec<NetGrowthRow> = truncations
        .iter()
        .map(|&n| NetGrowthRow {
            n_max: n,
            epsilon,
            net_size: orbit_epsilon_net(&points[..n * (n + 1) / 2], epsilon).size(),
        })
        .collect();
    let strictly_increasing = rows.windows(2).all(|w| w[1].net_size > w[0].net_size);
    let lower_bound_holds = rows.iter().all(|r| r.net_size >= r.n_max);
    Ok(NetGrowth {
        rows,
        strictly_increasing,
        lower_bound_guaranteed: epsilon < SQRT_2 / 2.0,
        lower_bound_holds,
    })
}

#[derive(Debug, Clone)]
pub struct GivensStep {
    pub m: usize,
    pub u: DMatrix<f64>,
    /// Orthonormal `(p, q)` with `ξ_m = p` and `ξ_{m+1} = cos(angle) p + sin(angle) q`;
    /// `None` for identity steps.
    pub plane: Option<(DVector<f64>, DVector<f64>)>,
    pub angle: f64,
    pub identity: bool,
    pub rank: usize,
}

impl GivensStep {
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.u.nrows();
        (self.u.transpose() * &self.u - DMatrix::<f64>::identity(n, n)).amax()
    }

    pub fn to_json(&self) -> Value {
        let plane = self
            .plane
            .as_ref()
            .map(|(p, q)| json!([sparse(p), sparse(q)]))
            .unwrap_or(Value::Null);
        json!({
            "m": self.m,
            "angle": self.angle,
            "identity": self.identity,
            "rank": self.rank,
            "plane": plane,
        })
    }
}

/// `rank(U − I)` from singular values above [`RANK_TOL`].
pub fn rank_minus_identity(u: &DMatrix<f64>) -> usize {
    let n = u.nrows();
    let d = u - DMatrix::<f64>::identity(n, n);
    d.singular_values()
        .iter()
        .filter(|&&s| s > RANK_TOL)
        .count()
}

/// The rotation in `span{x, y}` taking unit `x` to unit `y` and fixing the
/// orthogonal complement. Equal vectors give the identity.
pub fn rotation_between(
    m: usize,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<GivensStep, NonexampleError> {
    if x.len() != y.len() {
        return Err(NonexampleError::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    for (k, v) in [(m, x), (m + 1, y)] {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(NonexampleError::NotUnit { m: k, norm });
        }
    }
    let dim = x.len();
    if (y - x).norm() <= 1e-15 {
        return Ok(GivensStep {
            m,
            u: DMatrix::identity(dim, dim),
            plane: None,
            angle: 0.0,
            identity: true,
            rank: 0,
        });
    }
    if (y + x).norm() <= 1e-12 {
        return Err(NonexampleError::Antipodal { m, next: m + 1 });
    }
    let c = x.dot(y);
    let residual = y - x * c;
    let s = residual.norm();
    let q = residual / s;
    let p = x.clone();
    let u = DMatrix::<f64>::identity(dim, dim)
        + (&p * p.transpose() + &q * q.transpose()) * (c - 1.0)
        + (&q * p.transpose() - &p * q.transpose()) * s;
    let rank = rank_minus_identity(&u);
    Ok(GivensStep {
        m,
        u,
        plane: Some((p, q)),
        angle: s.atan2(c),
        identity: false,
        rank,
    })
}

/// One rotation per consecutive pair, `U_m ξ_m = ξ_{m+1}`.
pub fn givens_factorization(vectors: &[DVector<f64>]) -> Result<Vec<GivensStep>, NonexampleError> {
    vectors
        .windows(2)
        .enumerate()
        .map(|(i, w)| rotation_between(i + 1, &w[0], &w[1]))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct GivensVerdict {
    pub steps: usize,
    pub identity_steps: usize,
    /// `max_m ‖U_m ⋯ U_1 e_1 − ξ_{m+1}‖`
    pub reconstruction_error: f64,
    pub max_unitarity_defect: f64,
    /// Every non-identity step has `rank(U_m − I) = 2`.
    pub ranks_ok: bool,
}

impl GivensVerdict {
    pub fn holds(&self, tol: f64) -> bool {
        self.reconstruction_error <= tol && self.max_unitarity_defect <= 1e-12 && self.ranks_ok
    }
}

/// Multiplies the factors out from `ξ_1` and compares with the sequence.
pub fn verify_givens(vectors: &[DVector<f64>], steps: &[GivensStep]) -> GivensVerdict {
    let mut v = vectors[0].clone();
    let mut reconstruction_error = 0.0_f64;
    for (step, target) in steps.iter().zip(&vectors[1..]) {
        v = &step.u * v;
        reconstruction_error = reconstruction_error.max((&v - target).norm());
    }
    GivensVerdict {
        steps: steps.len(),
        identity_steps: steps.iter().filter(|s| s.identity).count(),
        reconstruction_error,
        max_unitarity_defect: steps
            .iter()
            .map(GivensStep::unitarity_defect)
            .fold(0.0, f64::max),
        ranks_ok: steps
            .iter()
            .all(|s| if s.identity { s.rank == 0 } else { s.rank == 2 }),
    }
}

pub fn givens_to_json(steps: &[GivensStep]) -> Value {
    Value::Array(steps.iter().map(GivensStep::to_json).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn e(k: usize, dim: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        v[k - 1] = 1.0;
        v
    }

    #[test]
    fn index_bijection() {
        assert_eq!(index(1, 1), 1);
        assert_eq!(index(2, 1), 2);
        assert_eq!(index(3, 2), 5);
        let mut m = 0;
        for n in 1..=12 {
            for j in 1..=n {
                m += 1;
                assert_eq!(index(n, j), m);
                assert_eq!(row_and_column(m), (n, j));
            }
        }
    }

    #[test]
    fn sequence_invariants() {
        assert_eq!(
            build_nonexample(1).unwrap_err(),
            NonexampleError::TooSmall(1)
        );
        for n_max in [2, 5, 10, 30] {
            let seq = build_nonexample(n_max).unwrap();
            assert_eq!(seq.len(), n_max * (n_max + 1) / 2);
            assert_eq!(seq.ambient_dim(), n_max + 1);
            for n in 1..=n_max {
                assert_eq!(seq.xi(index(n, 1)), &e(n, n_max + 1));
                for j in 1..=n {
                    let v = seq.xi(index(n, j));
                    assert!((v.norm() - 1.0).abs() < 1e-12);
                    let outside: f64 = v
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i + 1 != n && *i != n)
                        .map(|(_, x)| x.abs())
                        .sum();
                    assert_eq!(outside, 0.0);
                }
            }
        }
    }

    #[test]
    fn eta_4_2() {
        let seq = build_nonexample(4).unwrap();
        let v = seq.xi(index(4, 2));
        assert!((v[3] - (PI / 8.0).cos()).abs() < 1e-15);
        assert!((v[4] - (PI / 8.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn step_distances() {
        let seq = build_nonexample(30).unwrap();
        let report = verify_step_distances(&seq);
        assert!(report.within_row_holds());
        // The last step of row n turns by θ_n as well, since (n-1)θ_n = π/2 − θ_n.
        assert!(report.cross_row_holds());
        let row = |n: usize| {
            report
                .steps
                .iter()
                .find(|s| s.row == n && s.kind == StepKind::WithinRow)
                .unwrap()
        };
        assert!((row(4).distance - 0.390180644032256).abs() < 1e-12);
        assert!((row(2).distance - 0.765366864730180).abs() < 1e-12);
        let maxima: Vec<f64> = (2..=30).map(|n| row(n).distance).collect();
        assert!(maxima.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn tail_conditions() {
        let seq = build_nonexample(12).unwrap();
        let report = verify_tail_conditions(&seq, 3);
        assert!(report.all_hold());
        assert_eq!(report.coordinates[0].from, 2);
        assert!(report.norm_defect < 1e-15);
        let k1_last = report
            .tails
            .iter()
            .find(|t| t.k == 1 && t.row == 12)
            .unwrap();
        assert!(k1_last.max_distance <= 2.0 * (PI / 48.0).sin() + 1e-10);
    }

    #[test]
    fn net_growth() {
        let growth = verify_not_totally_bounded(&[5, 10, 20, 30], 0.5).unwrap();
        assert!(growth.lower_bound_guaranteed);
        assert!(growth.lower_bound_holds);
        assert!(growth.strictly_increasing);
        // Greedy oracle on the basis vectors alone.
        let basis: Vec<Vector> = (1..=10).map(|k| complexify(&e(k, 11))).collect();
        assert_eq!(orbit_epsilon_net(&basis, 0.5).size(), 10);
        assert!((complexify(&(e(1, 3) - e(2, 3))).norm() - SQRT_2).abs() < 1e-15);

        let wide = verify_not_totally_bounded(&[10], 1.5).unwrap();
        assert!(!wide.lower_bound_guaranteed);
        assert_eq!(wide.rows[0].net_size, 1);
        let mut csv = Vec::new();
        growth.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv)
            .unwrap()
            .starts_with("N_max,epsilon,net_size\n5,5.0"));
    }

    #[test]
    fn first_rotation_is_quarter_turn() {
        let seq = build_nonexample(2).unwrap();
        let steps = givens_factorization(seq.vectors()).unwrap();
        assert_eq!(steps.len(), 2);
        let u = &steps[0].u;
        assert!((u[(0, 0)]).abs() < 1e-15 && (u[(0, 1)] + 1.0).abs() < 1e-15);
        assert!((u[(1, 0)] - 1.0).abs() < 1e-15 && (u[(1, 1)]).abs() < 1e-15);
        assert!((u[(2, 2)] - 1.0).abs() < 1e-15);
        assert_eq!(steps[0].rank, 2);
        assert!((steps[0].angle - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn factorization_reconstructs() {
        let seq = build_nonexample(30).unwrap();
        let steps = givens_factorization(seq.vectors()).unwrap();
        let verdict = verify_givens(seq.vectors(), &steps);
        assert!(verdict.holds(1e-9), "{verdict:?}");
        assert_eq!(verdict.identity_steps, 0);
        for s in &steps {
            assert!((&s.u * seq.xi(s.m) - seq.xi(s.m + 1)).norm() < 1e-12);
            let (row, _) = row_and_column(s.m);
            assert!((s.angle - theta(row)).abs() < 1e-12);
        }
    }

    #[test]
    fn external_inputs() {
        let x = e(1, 3);
        let step = rotation_between(1, &x, &x).unwrap();
        assert!(step.identity && step.rank == 0);
        assert_eq!(
            rotation_between(4, &x, &(-&x)).unwrap_err(),
            NonexampleError::Antipodal { m: 4, next: 5 }
        );
        assert!(matches!(
            rotation_between(1, &(&x * 2.0), &x),
            Err(NonexampleError::NotUnit { m: 1, .. })
        ));
    }

    #[test]
    fn json_export() {
        let seq = build_nonexample(2).unwrap();
        let doc = seq.to_json();
        assert_eq!(doc[2]["m"], 3);
        assert_eq!(doc[2]["n"], 2);
        assert_eq!(doc[2]["j"], 2);
        assert_eq!(doc[2]["coords"]["2"].as_f64().unwrap(), (PI / 4.0).cos());
        assert!(doc[0]["coords"].get("2").is_none());
        let steps = givens_factorization(seq.vectors()).unwrap();
        assert_eq!(givens_to_json(&steps)[1]["rank"], 2);
    }
}
