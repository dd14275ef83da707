//! Ordered products `S_n = T_n ⋯ T_1` and their convergence diagnostics.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::chain::ContractionChain;
use crate::export::fmt_float;
use crate::operator::{
    fixed_point_projection, inner, loewner_leq, operator_norm, Matrix, Operator, OperatorError,
    Projection, Tolerances, Vector,
};
use crate::random::{random_unit_vector, rng_from_seed};

/// Required Cauchy gap before an empirical limit is trusted.
pub const CAUCHY_GAP_GATE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductError {
    #[error("probe {probe} has dimension {got}, chain has {expected}")]
    ProbeDimension {
        probe: String,
        got: usize,
        expected: usize,
    },
    #[error("probe {0} is the zero vector")]
    ZeroProbe(String),
    #[error("horizon {requested} exceeds the materialized chain ({available})")]
    HorizonExceedsChain { requested: usize, available: usize },
    #[error("horizon must be positive")]
    EmptyHorizon,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "provenance", rename_all = "snake_case")]
pub enum LimitProvenance {
    Analytic,
    /// `T_horizon` stands in for the limit; `cauchy_gap = ‖T_h − T_{h/2}‖`.
    Empirical {
        cauchy_gap: f64,
    },
}

impl LimitProvenance {
    /// An empirical limit is trusted only when its Cauchy gap is below
    /// [`CAUCHY_GAP_GATE`].
    pub fn conclusive(&self) -> bool {
        match self {
            LimitProvenance::Analytic => true,
            LimitProvenance::Empirical { cauchy_gap } => *cauchy_gap < CAUCHY_GAP_GATE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LimitOperator {
    pub operator: Operator,
    pub provenance: LimitProvenance,
}

/// The SOT limit `T = lim T_n`: analytic when the generator knows it,
/// otherwise the last materialized operator.
pub fn limit_operator(chain: &ContractionChain) -> Result<LimitOperator, OperatorError> {
    if let Some(limit) = chain.analytic_limit() {
        return Ok(LimitOperator {
            operator: limit.clone(),
            provenance: LimitProvenance::Analytic,
        });
    }
    let h = chain.horizon();
    let last = chain.operator_at(h).expect("non-empty chain");
    let half = chain.operator_at((h / 2).max(1)).expect("non-empty chain");
    let cauchy_gap = last.sub(half)?.op_norm()?;
    Ok(LimitOperator {
        operator: last.clone(),
        provenance: LimitProvenance::Empirical { cauchy_gap },
    })
}

/// `S_n` together with its adjoint.
#[derive(Debug, Clone)]
pub struct ProductState {
    pub n: usize,
    pub s: Matrix,
    pub s_adjoint: Matrix,
}

/// Iterates `S_n = T_n S_{n-1}`, `S_0 = I`, for `n = 1..=horizon`.
pub struct Products<'a> {
    chain: &'a ContractionChain,
    horizon: usize,
    n: usize,
    s: Matrix,
}

impl<'a> Products<'a> {
    pub fn new(chain: &'a ContractionChain, horizon: usize) -> Self {
        let d = chain.dim();
        Self {
            chain,
            horizon: horizon.min(chain.horizon()),
            n: 0,
            s: Matrix::identity(d, d),
        }
    }
}

impl Iterator for Products<'_> {
    type Item = ProductState;

    fn next(&mut self) -> Option<ProductState> {
        if self.n >= self.horizon {
            return None;
        }
        self.n += 1;
        let t = self.chain.operator_at(self.n)?;
        self.s = t.matrix() * &self.s;
        Some(ProductState {
            n: self.n,
            s: self.s.clone(),
            s_adjoint: self.s.adjoint(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub id: String,
    pub vector: Vector,
}

impl Probe {
    pub fn new(id: impl Into<String>, vector: Vector) -> Self {
        Self {
            id: id.into(),
            vector,
        }
    }
}

pub fn basis_vector(dim: usize, k: usize) -> Vector {
    let mut v = Vector::zeros(dim);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

/// Standard basis vectors `e1..ed`, three seeded random unit vectors, and one
/// unit vector each in `range(P)` and `range(P)^⊥` when those are nonzero.
pub fn default_probes(p: &Projection, seed: u64) -> Vec<Probe> {
    let dim = p.dim();
    let mut probes: Vec<Probe> = (0..dim)
        .map(|k| Probe::new(format!("e{}", k + 1), basis_vector(dim, k)))
        .collect();
    let mut rng = rng_from_seed(seed);
    for i in 1..=3 {
        probes.push(Probe::new(
            format!("rand{i}"),
            random_unit_vector(dim, &mut rng),
        ));
    }
    let v = random_unit_vector(dim, &mut rng);
    let fixed = p.apply(&v);
    if p.rank > 0 && fixed.norm() > 1e-8 {
        let n = fixed.norm();
        probes.push(Probe::new("fixed", fixed / Complex64::new(n, 0.0)));
    }
    let perp = p.apply_complement(&v);
    if p.rank < dim && perp.norm() > 1e-8 {
        let n = perp.norm();
        probes.push(Probe::new("perp", perp / Complex64::new(n, 0.0)));
    }
    probes
}

/// One (step, probe) record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub probe: usize,
    /// `‖S_nξ − Pξ‖`
    pub sot_err: f64,
    /// `‖S_n*ξ − Pξ‖`
    pub adj_err: f64,
    /// `‖S_{n+1}ξ − S_nξ‖`; absent when `T_{n+1}` is not materialized.
    pub consec_diff: Option<f64>,
    /// `⟨S_{n+1}ξ, S_nξ⟩`
    pub a_n: Option<Complex64>,
    /// `⟨S_nξ, S_nξ⟩`
    pub b_n: f64,
    /// `b_{n+1}`
    pub b_next: Option<f64>,
    /// `|⟨(S_n − P)ξ, η⟩|` for the partner probe `η`.
    pub wot_err: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTrace {
    pub dim: usize,
    pub horizon: usize,
    pub probe_ids: Vec<String>,
    /// `‖ξ‖²` per probe, the natural scale for `a_n` and `b_n`.
    pub probe_norms_sq: Vec<f64>,
    /// Index of the partner probe `η` used for `wot_err`.
    pub wot_partner: Vec<usize>,
    pub limit: LimitProvenance,
    pub limit_rank: usize,
    /// Rows ordered by `n`, then probe.
    pub rows: Vec<TraceRow>,
    /// `‖S_n − P‖_op`, indexed by `n - 1`.
    pub opnorm_err: Vec<f64>,
    /// `max_n ‖S_n‖_op`
    pub max_product_norm: f64,
}

impl ConvergenceTrace {
    pub fn row(&self, n: usize, probe: usize) -> &TraceRow {
        &self.rows[(n - 1) * self.probe_ids.len() + probe]
    }

    pub fn final_rows(&self) -> &[TraceRow] {
        let k = self.probe_ids.len();
        &self.rows[self.rows.len() - k..]
    }

    pub fn probe_index(&self, id: &str) -> Option<usize> {
        self.probe_ids.iter().position(|p| p == id)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "n,probe_id,sot_err,adj_err,consec_diff,a_n,b_n,wot_err,opnorm_err"
        )?;
        let opt = |x: Option<f64>| x.map(fmt_float).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.n,
                self.probe_ids[r.probe],
                fmt_float(r.sot_err),
                fmt_float(r.adj_err),
                opt(r.consec_diff),
                opt(r.a_n.map(|a| a.re)),
                fmt_float(r.b_n),
                fmt_float(r.wot_err),
                fmt_float(self.opnorm_err[r.n - 1]),
            )?;
        }
        Ok(())
    }
}

/// Runs the product recurrence and records every diagnostic per step and
/// probe. `P = 1_{{1}}(T)` with `T` from [`limit_operator`]. The partner
/// `η` of probe `i` for the weak error is probe `i + 1` (cyclically).
pub fn iterate_products(
    chain: &ContractionChain,
    probes: &[Probe],
    horizon: usize,
    tol: &Tolerances,
) -> Result<ConvergenceTrace, ProductError> {
    if horizon == 0 {
        return Err(ProductError::EmptyHorizon);
    }
    if horizon > chain.horizon() {
        return Err(ProductError::HorizonExceedsChain {
            requested: horizon,
            available: chain.horizon(),
        });
    }
    let dim = chain.dim();
    for p in probes {
        if p.vector.len() != dim {
            return Err(ProductError::ProbeDimension {
                probe: p.id.clone(),
                got: p.vector.len(),
                expected: dim,
            });
        }
        if p.vector.norm() == 0.0 {
            return Err(ProductError::ZeroProbe(p.id.clone()));
        }
    }
    let limit = limit_operator(chain)?;
    let proj = fixed_point_projection(&limit.operator, tol)?;
    let p_xi: Vec<Vector> = probes.iter().map(|p| proj.apply(&p.vector)).collect();
    let k = probes.len();
    let wot_partner: Vec<usize> = (0..k).map(|i| (i + 1) % k.max(1)).collect();

    let mut rows = Vec::with_capacity(horizon * k);
    let mut opnorm_err = Vec::with_capacity(horizon);
    let mut max_product_norm = 0.0_f64;
    for state in Products::new(chain, horizon) {
        let n = state.n;
        let diff = &state.s - proj.operator.matrix();
        opnorm_err.push(operator_norm(&diff));
        max_product_norm = max_product_norm.max(operator_norm(&state.s));
        let next = chain.operator_at(n + 1);
        for (i, probe) in probes.iter().enumerate() {
            let sx = &state.s * &probe.vector;
            let sx_err = &sx - &p_xi[i];
            let adj = &state.s_adjoint * &probe.vector - &p_xi[i];
            let b_n = sx.norm_squared();
            let (consec_diff, a_n, b_next) = match next {
                Some(t) => {
                    let sx_next = t.apply(&sx);
                    (
                        Some((&sx_next - &sx).norm()),
                        Some(inner(&sx_next, &sx)),
                        Some(sx_next.norm_squared()),
                    )
                }
                None => (None, None, None),
            };
            rows.push(TraceRow {
                n,
                probe: i,
                sot_err: sx_err.norm(),
                adj_err: adj.norm(),
                consec_diff,
                a_n,
                b_n,
                b_next,
                wot_err: inner(&sx_err, &probes[wot_partner[i]].vector).norm(),
            });
        }
    }
    Ok(ConvergenceTrace {
        dim,
        horizon,
        probe_ids: probes.iter().map(|p| p.id.clone()).collect(),
        probe_norms_sq: probes.iter().map(|p| p.vector.norm_squared()).collect(),
        wot_partner,
        limit: limit.provenance,
        limit_rank: proj.rank,
        rows,
        opnorm_err,
        max_product_norm,
    })
}

/// Behaviour of `P_n = 1_{{1}}(T_n)` along the chain.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionConvergence {
    /// `rank(P_n)`, indexed by `n - 1`.
    pub ranks: Vec<usize>,
    /// `‖(P_n − P)ξ‖` per step (outer) and probe (inner).
    pub errors: Vec<Vec<f64>>,
    pub limit_rank: usize,
    pub rank_nonincreasing: bool,
    /// `P_{n+1} <= P_n` in the Loewner order at every step.
    pub projections_nonincreasing: bool,
}

impl ProjectionConvergence {
    /// Steps at which the rank drops, as `(n, rank before, rank after)`.
    pub fn rank_drops(&self) -> Vec<(usize, usize, usize)> {
        self.ranks
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] != w[0])
            .map(|(i, w)| (i + 2, w[0], w[1]))
            .collect()
    }
}

pub fn check_projection_convergence(
    chain: &ContractionChain,
    horizon: usize,
    probes: &[Probe],
    tol: &Tolerances,
) -> Result<ProjectionConvergence, ProductError> {
    if horizon > chain.horizon() {
        return Err(ProductError::HorizonExceedsChain {
            requested: horizon,
            available: chain.horizon(),
        });
    }
    let limit = limit_operator(chain)?;
    let proj = fixed_point_projection(&limit.operator, tol)?;
    let mut ranks = Vec::with_capacity(horizon);
    let mut errors = Vec::with_capacity(horizon);
    let mut projections_nonincreasing = true;
    let mut previous: Option<Projection> = None;
    for n in 1..=horizon {
        let pn = fixed_point_projection(chain.operator_at(n).expect("n <= horizon"), tol)?;
        let delta = pn.operator.sub(&proj.operator)?;
        errors.push(
            probes
                .iter()
                .map(|p| delta.apply(&p.vector).norm())
                .collect(),
        );
        ranks.push(pn.rank);
        if let Some(prev) = &previous {
            projections_nonincreasing &= loewner_leq(&pn.operator, &prev.operator, tol)?.holds;
        }
        previous = Some(pn);
    }
    Ok(ProjectionConvergence {
        rank_nonincreasing: ranks.windows(2).all(|w| w[1] <= w[0]),
        ranks,
        errors,
        limit_rank: proj.rank,
        projections_nonincreasing,
    })
}

/// Slack for `0 <= a_n <= b_n` and `b_{n+1} <= a_n`, per unit dimension and
/// relative to `‖ξ‖²`.
pub const CHAIN_SLACK_PER_DIM: f64 = 1e-12;
/// Tolerance for `consec_diff² = b_{n+1} + b_n − 2 Re a_n`, relative to `‖ξ‖²`.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsecutiveRow {
    pub n: usize,
    pub probe: usize,
    pub a_n: f64,
    pub a_n_imag: f64,
    pub b_n: f64,
    pub b_next: f64,
    pub consec_diff: f64,
    pub a_nonnegative: bool,
    pub a_le_b: bool,
    pub b_next_le_a: bool,
    /// `|consec_diff² − (b_{n+1} + b_n − 2 Re a_n)| / ‖ξ‖²`
    pub identity_residual: f64,
    pub identity_ok: bool,
}

impl ConsecutiveRow {
    pub fn passes(&self) -> bool {
        self.a_nonnegative && self.a_le_b && self.b_next_le_a && self.identity_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConsecutiveReport {
    pub rows: Vec<ConsecutiveRow>,
    /// Per probe: `b_n` is nonincreasing over the whole trace.
    pub b_nonincreasing: Vec<bool>,
    pub slack: f64,
}

impl ConsecutiveReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(ConsecutiveRow::passes) && self.b_nonincreasing.iter().all(|&b| b)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConsecutiveRow> {
        self.rows.iter().filter(|r| !r.passes())
    }
}

/// Checks `0 <= a_n <= b_n`, `b_{n+1} <= a_n` and the polarization identity
/// for `‖S_{n+1}ξ − S_nξ‖²` on every row where `T_{n+1}` was available.
pub fn consecutive_difference_report(trace: &ConvergenceTrace) -> ConsecutiveReport {
    let slack = CHAIN_SLACK_PER_DIM * trace.dim as f64;
    let mut rows = Vec::new();
    for r in &trace.rows {
        let (Some(a), Some(b_next), Some(cd)) = (r.a_n, r.b_next, r.consec_diff) else {
            continue;
        };
        let scale = trace.probe_norms_sq[r.probe];
        let s = slack * scale;
        let residual = (cd * cd - (b_next + r.b_n - 2.0 * a.re)).abs() / scale;
        rows.push(ConsecutiveRow {
            n: r.n,
            probe: r.probe,
            a_n: a.re,
            a_n_imag: a.im,
            b_n: r.b_n,
            b_next,
            consec_diff: cd,
            a_nonnegative: a.re >= -s,
            a_le_b: a.re <= r.b_n + s,
            b_next_le_a: b_next <= a.re + s,
            identity_residual: residual,
            identity_ok: residual <= IDENTITY_TOL,
        });
    }
    let k = trace.probe_ids.len();
    let b_nonincreasing = (0..k)
        .map(|p| {
            let bs: Vec<f64> = trace
                .rows
                .iter()
                .filter(|r| r.probe == p)
                .map(|r| r.b_n)
                .collect();
            bs.windows(2)
                .all(|w| w[1] <= w[0] + slack * trace.probe_norms_sq[p])
        })
        .collect();
    ConsecutiveReport {
        rows,
        b_nonincreasing,
        slack,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonNet {
    pub epsilon: f64,
    /// Indices into the input, in insertion order.
    pub members: Vec<usize>,
}

impl EpsilonNet {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Greedy ε-net: scan in index order and keep a point iff it is farther than
/// `epsilon` from every point kept so far. The result is ε-separated and
/// covers every input point within `epsilon`.
pub fn orbit_epsilon_net(points: &[Vector], epsilon: f64) -> EpsilonNet {
    let mut members: Vec<usize> = Vec::new();
    for (i, x) in points.iter().enumerate() {
        if members.iter().all(|&m| (x - &points[m]).norm() > epsilon) {
            members.push(i);
        }
    }
    EpsilonNet { epsilon, members }
}

/// The orbit `{S_1ξ, ..., S_hξ}` of a vector.
pub fn orbit(chain: &ContractionChain, xi: &Vector, horizon: usize) -> Vec<Vector> {
    let mut v = xi.clone();
    chain.operators()[..horizon.min(chain.horizon())]
        .iter()
        .map(|t| {
            v = t.apply(&v);
            v.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{diagonal_chain, gap_engineered_chain, seeded_schur_chain, Curve};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn telescoping(horizon: usize) -> ContractionChain {
        diagonal_chain(&[Curve::Const(1.0), Curve::HarmonicTo(0.5)], horizon).unwrap()
    }

    /// `∏_{k=1}^{n} (1 + 1/k)/2 = (n + 1)/2^n`
    fn telescoping_oracle(n: usize) -> f64 {
        (n as f64 + 1.0) / 2f64.powi(n as i32)
    }

    #[test]
    fn limit_operator_provenance() {
        let l = limit_operator(&telescoping(10)).unwrap();
        assert_eq!(l.provenance, LimitProvenance::Analytic);
        assert_eq!(l.operator, Operator::diagonal(&[1.0, 0.5]).unwrap());

        let constant = ContractionChain::from_operators_unchecked(vec![
            Operator::diagonal(&[0.4])
                .unwrap();
            6
        ])
        .unwrap();
        let l = limit_operator(&constant).unwrap();
        assert_eq!(l.provenance, LimitProvenance::Empirical { cauchy_gap: 0.0 });

        let schur = seeded_schur_chain(3, 1, 0.2, 0.5, 200, 1, &tol()).unwrap();
        match limit_operator(&schur).unwrap().provenance {
            LimitProvenance::Empirical { cauchy_gap } => {
                assert!(cauchy_gap < CAUCHY_GAP_GATE, "{cauchy_gap}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn telescoping_sot_error_matches_closed_form() {
        let chain = telescoping(60);
        let probes = [Probe::new("e2", basis_vector(2, 1))];
        let trace = iterate_products(&chain, &probes, 50, &tol()).unwrap();
        assert_eq!(trace.limit_rank, 1);
        assert!((trace.row(4, 0).sot_err - 0.3125).abs() < 1e-15);
        for n in 1..=50 {
            let got = trace.row(n, 0).sot_err;
            let want = telescoping_oracle(n);
            assert!(
                ((got - want) / want).abs() < 1e-10,
                "n={n}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn telescoping_a_b_closed_forms() {
        let chain = telescoping(40);
        let probes = [Probe::new("e2", basis_vector(2, 1))];
        let trace = iterate_products(&chain, &probes, 30, &tol()).unwrap();
        for n in 1..=30 {
            let r = trace.row(n, 0);
            let b = telescoping_oracle(n).powi(2);
            let a = b * (1.0 + 1.0 / (n as f64 + 1.0)) / 2.0;
            assert!(((r.b_n - b) / b).abs() < 1e-12);
            assert!(((r.a_n.unwrap().re - a) / a).abs() < 1e-12);
        }
        assert!(consecutive_difference_report(&trace).all_pass());
    }

    #[test]
    fn fixed_probe_never_moves() {
        let chain = gap_engineered_chain(4, 0.2, 2, 40, 3).unwrap();
        let limit = limit_operator(&chain).unwrap();
        let p = fixed_point_projection(&limit.operator, &tol()).unwrap();
        let probes = default_probes(&p, 9);
        let fixed = probes.iter().position(|p| p.id == "fixed").unwrap();
        let trace = iterate_products(&chain, &probes, 40, &tol()).unwrap();
        for n in 1..=40 {
            let r = trace.row(n, fixed);
            assert!(r.sot_err < 1e-12);
            assert!(r.consec_diff.unwrap_or(0.0) < 1e-12);
            assert!((r.b_n - 1.0).abs() < 1e-12);
        }
        assert!(trace.max_product_norm <= 1.0 + tol().psd(4));
    }

    #[test]
    fn scalar_constant_chain() {
        let c: f64 = 0.5;
        let chain = diagonal_chain(&[Curve::Const(c)], 20).unwrap();
        let trace =
            iterate_products(&chain, &[Probe::new("one", basis_vector(1, 0))], 19, &tol()).unwrap();
        assert_eq!(trace.limit_rank, 0);
        for n in 1..=19 {
            let r = trace.row(n, 0);
            assert!((r.sot_err - c.powi(n as i32)).abs() < 1e-16);
            assert!((r.b_n - c.powi(2 * n as i32)).abs() < 1e-16);
            assert!((r.a_n.unwrap().re - c.powi(2 * n as i32 + 1)).abs() < 1e-16);
        }
        let report = consecutive_difference_report(&trace);
        assert_eq!(report.rows.len(), 19);
        assert!(report.all_pass());
    }

    #[test]
    fn final_row_without_successor() {
        let chain = telescoping(10);
        let trace =
            iterate_products(&chain, &[Probe::new("e2", basis_vector(2, 1))], 10, &tol()).unwrap();
        let last = trace.row(10, 0);
        assert!(last.a_n.is_none() && last.consec_diff.is_none());
        assert_eq!(consecutive_difference_report(&trace).rows.len(), 9);
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(
            text.starts_with("n,probe_id,sot_err,adj_err,consec_diff,a_n,b_n,wot_err,opnorm_err\n")
        );
        assert_eq!(text.lines().count(), 11);
        assert!(text.lines().last().unwrap().starts_with("10,e2,"));
    }

    #[test]
    fn iterate_rejects_bad_input() {
        let chain = telescoping(10);
        let t = tol();
        assert!(matches!(
            iterate_products(&chain, &[Probe::new("x", basis_vector(2, 0))], 11, &t),
            Err(ProductError::HorizonExceedsChain {
                requested: 11,
                available: 10
            })
        ));
        assert!(matches!(
            iterate_products(&chain, &[Probe::new("x", basis_vector(3, 0))], 5, &t),
            Err(ProductError::ProbeDimension { .. })
        ));
        assert!(matches!(
            iterate_products(&chain, &[Probe::new("z", Vector::zeros(2))], 5, &t),
            Err(ProductError::ZeroProbe(_))
        ));
    }

    #[test]
    fn projection_convergence_examples() {
        let t = tol();
        let chain = gap_engineered_chain(3, 0.1, 1, 20, 5).unwrap();
        let probes: Vec<Probe> = (0..3)
            .map(|k| Probe::new(format!("e{k}"), basis_vector(3, k)))
            .collect();
        let pc = check_projection_convergence(&chain, 20, &probes, &t).unwrap();
        assert!(pc.ranks.iter().all(|&r| r == 1));
        assert!(pc.errors.iter().flatten().all(|&e| e < 1e-12));

        // T_1 = diag(1, 1), so P_1 = I before the rank settles at 1
        let pc = check_projection_convergence(&telescoping(20), 20, &probes[..0], &t).unwrap();
        assert_eq!(pc.ranks[0], 2);
        assert!(pc.ranks[1..].iter().all(|&r| r == 1));
        assert_eq!(pc.limit_rank, 1);

        let staged = diagonal_chain(
            &[
                Curve::Const(1.0),
                Curve::Staged(vec![(1, 1.0), (11, 0.8), (15, 0.5)]),
            ],
            30,
        )
        .unwrap();
        let pc = check_projection_convergence(&staged, 30, &[], &t).unwrap();
        assert_eq!(pc.rank_drops(), vec![(11, 2, 1)]);
        assert!(pc.rank_nonincreasing && pc.projections_nonincreasing);
        assert!(*pc.ranks.last().unwrap() >= pc.limit_rank);
    }

    #[test]
    fn epsilon_net_examples() {
        let v = basis_vector(3, 0);
        assert_eq!(orbit_epsilon_net(&[v.clone(), v.clone(), v], 0.1).size(), 1);
        let basis: Vec<Vector> = (0..6).map(|k| basis_vector(6, k)).collect();
        assert_eq!(orbit_epsilon_net(&basis, 0.5).size(), 6);
        assert_eq!(orbit_epsilon_net(&basis, 1.5).size(), 1);
    }

    #[test]
    fn convergent_orbit_has_stable_net() {
        let chain = telescoping(400);
        let xi = (basis_vector(2, 0) + basis_vector(2, 1)) / Complex64::new(2f64.sqrt(), 0.0);
        let short = orbit_epsilon_net(&orbit(&chain, &xi, 200), 0.01).size();
        let long = orbit_epsilon_net(&orbit(&chain, &xi, 400), 0.01).size();
        assert_eq!(short, long);
        assert!(short < 20);
    }
}
