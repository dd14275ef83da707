//! Uniform spectral gap at 1: certificates, the rank-descent search that
//! produces them, and the exponential rate they imply for `S_n`.
//!
//! A chain has a uniform gap when some `δ ∈ (0, 1)` and `N` satisfy
//! `σ(T_n) ∩ (1 − δ, 1) = ∅` for all `n >= N`. The search walks the chain,
//! shrinking `δ` every time an eigenvalue enters the excluded interval. Each
//! such entry must coincide with a strict drop of `rank 1_{{1}}(T_n)`, so the
//! search stops after at most `rank(P_1) + 1` stages.

use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::chain::ContractionChain;
use crate::export::fmt_float;
use crate::operator::{
    fixed_point_projection, loewner_leq, Interval, Operator, OperatorError, Tolerances, Vector,
};
use crate::product::{limit_operator, Products};

pub const DEFAULT_DELTA_GRID: [f64; 8] = [0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 0.005, 0.001];

/// Absolute slack in the rate-bound comparison.
pub const RATE_SLACK: f64 = 1e-10;
/// Relative level below which `‖S_n P^⊥ξ‖` is dominated by roundoff and left
/// out of the slope fit.
pub const FIT_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error("invalid delta grid: {0}")]
    InvalidGrid(String),
    #[error("horizon {requested} exceeds the materialized chain ({available})")]
    HorizonExceedsChain { requested: usize, available: usize },
    #[error(
        "rank did not descend: rank(P_{n}) = {rank} but rank(P_{previous_n}) = {previous_rank} \
         at a gap violation for delta {delta}"
    )]
    RankDescent {
        previous_n: usize,
        previous_rank: usize,
        n: usize,
        rank: usize,
        delta: f64,
    },
    #[error("precondition fails: T' <= T does not hold (min eigenvalue {min_eigenvalue})")]
    NotOrdered { min_eigenvalue: f64 },
    #[error("precondition fails: T has spectrum in (1 - delta, 1)")]
    MissingGap,
    #[error("precondition fails: T' has no spectrum in (1 - delta, 1)")]
    NoViolation,
    #[error("empirical certificate verified up to n = {verified}, rate check needs n = {needed}")]
    ScopeExceeded { verified: usize, needed: usize },
    #[error("start index {n0} precedes the certificate start {start}")]
    StartBeforeCertificate { n0: usize, start: usize },
    #[error("no n0 <= {horizon} with ‖P_n0 ξ‖ <= {epsilon}")]
    NoStartIndex { horizon: usize, epsilon: f64 },
    #[error("‖P_n0 ξ‖ = {defect} exceeds epsilon {epsilon} at n0 = {n0}")]
    StartIndexTooEarly {
        n0: usize,
        defect: f64,
        epsilon: f64,
    },
    #[error("probe has dimension {got}, chain has {expected}")]
    ProbeDimension { got: usize, expected: usize },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Eigenvalues strictly inside `(1 − δ, 1)` after clustering: those above
/// `1 − δ + tol_eig` and below `1 − tol_eig`.
pub fn gap_hits(eigenvalues: &[f64], delta: f64, tol: &Tolerances) -> Vec<f64> {
    let excluded = Interval::open(1.0 - delta, 1.0);
    eigenvalues
        .iter()
        .copied()
        .filter(|&x| excluded.contains(x, tol.eig))
        .collect()
}

/// `σ(T) ∩ (1 − δ, 1) = ∅`.
pub fn has_gap_at(t: &Operator, delta: f64, tol: &Tolerances) -> Result<bool, OperatorError> {
    Ok(gap_hits(&t.eigenvalues()?, delta, tol).is_empty())
}

fn fixed_rank(eigenvalues: &[f64], tol: &Tolerances) -> usize {
    let one = Interval::point(1.0);
    eigenvalues
        .iter()
        .filter(|&&x| one.contains(x, tol.eig))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateScope {
    /// The chain's eigenvalue curves prove the gap for every `n >= N`.
    Analytic,
    /// Verified for `N <= n <= horizon` only.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankStep {
    pub n: usize,
    pub rank: usize,
    pub delta_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCertificate {
    pub delta: f64,
    #[serde(rename = "N")]
    pub start: usize,
    pub scope: CertificateScope,
    pub rank_trajectory: Vec<RankStep>,
    /// Last index at which the gap was checked.
    pub horizon: usize,
}

impl GapCertificate {
    /// Largest `n` the certificate covers, `None` when unbounded.
    pub fn valid_through(&self) -> Option<usize> {
        match self.scope {
            CertificateScope::Analytic => None,
            CertificateScope::Empirical => Some(self.horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapViolation {
    pub n: usize,
    pub delta: f64,
    pub hits: Vec<f64>,
}

/// Why no certificate was produced, with every interval hit at the finest
/// grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchFailure {
    /// Index at which no remaining grid value gives a gap.
    pub exhausted_at: usize,
    pub rank_trajectory: Vec<RankStep>,
    pub finest_delta: f64,
    pub violations: Vec<GapViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SearchOutcome {
    Certified(GapCertificate),
    Exhausted(SearchFailure),
}

fn check_grid(grid: &[f64]) -> Result<(), GapError> {
    if grid.is_empty() {
        return Err(GapError::InvalidGrid("empty".into()));
    }
    if let Some(d) = grid.iter().find(|&&d| !(d > 0.0 && d < 1.0)) {
        return Err(GapError::InvalidGrid(format!("{d} not in (0,1)")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GapError::InvalidGrid(
            "values must be strictly descending".into(),
        ));
    }
    Ok(())
}

/// Searches for `(δ, N)` with `σ(T_n) ∩ (1 − δ, 1) = ∅` for `N <= n <= horizon`.
///
/// Starts at `n_0 = 1` with the largest grid value that gives `T_1` a gap.
/// At the first later `n` whose spectrum enters `(1 − δ_k, 1)`, the rank of
/// `P_n` must have dropped below `rank(P_{n_k})`; the search then continues
/// from `n_{k+1} = n` with the largest smaller grid value that gives `T_n` a
/// gap. The certificate is analytic when the chain's curves prove the gap
/// beyond the horizon.
pub fn certificate_search(
    chain: &ContractionChain,
    horizon: usize,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<SearchOutcome, GapError> {
    check_grid(grid)?;
    if horizon == 0 || horizon > chain.horizon() {
        return Err(GapError::HorizonExceedsChain {
            requested: horizon,
            available: chain.horizon(),
        });
    }
    let spectra: Vec<Vec<f64>> = chain.operators()[..horizon]
        .iter()
        .map(Operator::eigenvalues)
        .collect::<Result<_, _>>()?;
    let has_gap = |n: usize, delta: f64| gap_hits(&spectra[n - 1], delta, tol).is_empty();
    let rank = |n: usize| fixed_rank(&spectra[n - 1], tol);

    let exhausted = |at: usize, trajectory: Vec<RankStep>| {
        let finest = *grid.last().expect("non-empty grid");
        let violations = (1..=horizon)
            .filter_map(|n| {
                let hits = gap_hits(&spectra[n - 1], finest, tol);
                (!hits.is_empty()).then_some(GapViolation {
                    n,
                    delta: finest,
                    hits,
                })
            })
            .collect();
        SearchOutcome::Exhausted(SearchFailure {
            exhausted_at: at,
            rank_trajectory: trajectory,
            finest_delta: finest,
            violations,
        })
    };

    let mut n_k = 1;
    let Some(mut g) = grid.iter().position(|&d| has_gap(1, d)) else {
        return Ok(exhausted(1, Vec::new()));
    };
    let mut trajectory = vec![RankStep {
        n: 1,
        rank: rank(1),
        delta_k: grid[g],
    }];
    loop {
        let delta = grid[g];
        let Some(n) = (n_k + 1..=horizon).find(|&n| !has_gap(n, delta)) else {
            let scope = if chain.proves_gap_from(n_k, delta, tol) {
                CertificateScope::Analytic
            } else {
                CertificateScope::Empirical
            };
            return Ok(SearchOutcome::Certified(GapCertificate {
                delta,
                start: n_k,
                scope,
                rank_trajectory: trajectory,
                horizon,
            }));
        };
        let (previous_rank, r) = (rank(n_k), rank(n));
        if r >= previous_rank {
            return Err(GapError::RankDescent {
                previous_n: n_k,
                previous_rank,
                n,
                rank: r,
                delta,
            });
        }
        let Some(next) = (g + 1..grid.len()).find(|&i| has_gap(n, grid[i])) else {
            return Ok(exhausted(n, trajectory));
        };
        trajectory.push(RankStep {
            n,
            rank: r,
            delta_k: grid[next],
        });
        n_k = n;
        g = next;
    }
}

/// For `T' <= T`, a gap of `T` at `δ` and spectrum of `T'` inside
/// `(1 − δ, 1)` force `rank 1_{{1}}(T') < rank 1_{{1}}(T)`. Returns whether
/// the strict inequality is observed; `false` is a numerical contradiction.
pub fn rank_strict_descent_check(
    t: &Operator,
    tp: &Operator,
    delta: f64,
    tol: &Tolerances,
) -> Result<bool, GapError> {
    let order = loewner_leq(tp, t, tol)?;
    if !order.holds {
        return Err(GapError::NotOrdered {
            min_eigenvalue: order.min_eigenvalue,
        });
    }
    if !has_gap_at(t, delta, tol)? {
        return Err(GapError::MissingGap);
    }
    if has_gap_at(tp, delta, tol)? {
        return Err(GapError::NoViolation);
    }
    let rank_t = fixed_point_projection(t, tol)?.rank;
    let rank_tp = fixed_point_projection(tp, tol)?.rank;
    Ok(rank_tp < rank_t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateRow {
    pub j: usize,
    /// `‖S_{n0+j} P^⊥ξ‖`
    pub lhs: f64,
    /// `ε + (1 − δ)^j ‖η'‖`
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateTable {
    pub delta: f64,
    pub epsilon: f64,
    pub n0: usize,
    /// `‖η'‖ = ‖S_{n0} P_{n0}^⊥ P^⊥ ξ‖`
    pub eta_prime_norm: f64,
    /// `‖P_{n0} P^⊥ ξ‖`, at most `ε`.
    pub start_defect: f64,
    /// `max_n ‖S_n Pξ − Pξ‖`, the part split off before the bound applies.
    pub fixed_part_error: f64,
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln lhs` against `j`, over rows above the
    /// roundoff floor [`FIT_FLOOR`]` · lhs(0)`.
    pub fitted_log_slope: Option<f64>,
    pub log_one_minus_delta: f64,
}

impl RateTable {
    pub fn bound_holds(&self) -> bool {
        self.rows.iter().all(|r| r.lhs <= r.rhs + RATE_SLACK)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "j,lhs,rhs,slack")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.j,
                fmt_float(r.lhs),
                fmt_float(r.rhs),
                fmt_float(r.slack)
            )?;
        }
        Ok(())
    }
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RateOptions {
    /// Explicit `n0`; by default the smallest `n >= N` with `‖P_n P^⊥ξ‖ <= ε`.
    pub n0: Option<usize>,
    /// Number of steps after `n0`; by default up to the chain horizon.
    pub steps: Option<usize>,
}

/// Compares `‖S_{n0+j} P^⊥ξ‖` with `ε + (1 − δ)^j ‖η'‖`, where
/// `η' = S_{n0} P_{n0}^⊥ P^⊥ξ`. The component `Pξ` is fixed by every `S_n`
/// and is split off first.
pub fn rate_bound_check(
    chain: &ContractionChain,
    certificate: &GapCertificate,
    xi: &Vector,
    epsilon: f64,
    options: RateOptions,
    tol: &Tolerances,
) -> Result<RateTable, GapError> {
    let dim = chain.dim();
    if xi.len() != dim {
        return Err(GapError::ProbeDimension {
            got: xi.len(),
            expected: dim,
        });
    }
    let limit = limit_operator(chain)?;
    let p = fixed_point_projection(&limit.operator, tol)?;
    let fixed_part = p.apply(xi);
    let perp = xi - &fixed_part;
    let scale = perp.norm().max(f64::MIN_POSITIVE);
    let defect_at = |n: usize| -> Result<f64, GapError> {
        let pn = fixed_point_projection(chain.operator_at(n).expect("n within chain"), tol)?;
        Ok(pn.apply(&perp).norm())
    };
    let within = |d: f64| d <= epsilon + tol.fix * scale;

    let n0 = match options.n0 {
        Some(n0) => {
            if n0 < certificate.start {
                return Err(GapError::StartBeforeCertificate {
                    n0,
                    start: certificate.start,
                });
            }
            let d = defect_at(n0)?;
            if !within(d) {
                return Err(GapError::StartIndexTooEarly {
                    n0,
                    defect: d,
                    epsilon,
                });
            }
            n0
        }
        None => {
            let mut found = None;
            for n in certificate.start..=chain.horizon() {
                if within(defect_at(n)?) {
                    found = Some(n);
                    break;
                }
            }
            found.ok_or(GapError::NoStartIndex {
                horizon: chain.horizon(),
                epsilon,
            })?
        }
    };
    let steps = options
        .steps
        .unwrap_or(chain.horizon() - n0.min(chain.horizon()));
    let last = n0 + steps;
    if last > chain.horizon() {
        return Err(GapError::HorizonExceedsChain {
            requested: last,
            available: chain.horizon(),
        });
    }
    if let Some(verified) = certificate.valid_through() {
        if last > verified {
            return Err(GapError::ScopeExceeded {
                verified,
                needed: last,
            });
        }
    }

    let pn0 = fixed_point_projection(chain.operator_at(n0).expect("n0 within chain"), tol)?;
    let start_defect = pn0.apply(&perp).norm();
    let mut eta_prime_norm = 0.0;
    let mut fixed_part_error = 0.0_f64;
    let mut rows = Vec::with_capacity(steps + 1);
    for state in Products::new(chain, last) {
        fixed_part_error = fixed_part_error.max((&state.s * &fixed_part - &fixed_part).norm());
        if state.n < n0 {
            continue;
        }
        if state.n == n0 {
            eta_prime_norm = (&state.s * pn0.apply_complement(&perp)).norm();
        }
        let j = state.n - n0;
        let lhs = (&state.s * &perp).norm();
        let rhs = epsilon + (1.0 - certificate.delta).powi(j as i32) * eta_prime_norm;
        rows.push(RateRow {
            j,
            lhs,
            rhs,
            slack: rhs - lhs,
        });
    }
    let floor_scale = rows.first().map_or(0.0, |r| r.lhs);
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.lhs > FIT_FLOOR * floor_scale)
        .map(|r| (r.j as f64, r.lhs.ln()))
        .collect();
    Ok(RateTable {
        delta: certificate.delta,
        epsilon,
        n0,
        eta_prime_norm,
        start_defect,
        fixed_part_error,
        rows,
        fitted_log_slope: least_squares_slope(&fit),
        log_one_minus_delta: (1.0 - certificate.delta).ln(),
    })
}
