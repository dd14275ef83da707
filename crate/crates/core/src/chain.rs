//! Decreasing chains `T_1 >= T_2 >= ...` of positive contractions.
//!
//! Every generator produces an ordered chain by construction: diagonal
//! families use nonincreasing eigenvalue curves, and the Schur-decrement
//! family uses `T_{n+1} = T_n^{1/2} (I - D_n) T_n^{1/2}` so that
//! `T_n - T_{n+1} = T_n^{1/2} D_n T_n^{1/2} >= 0`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::operator::{
    is_positive_contraction, loewner_leq, Matrix, Operator, OperatorError, Tolerances,
};
use crate::random::{random_positive_contraction, random_unitary, rng_from_seed};

pub const DEFAULT_HORIZON: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("curve {coordinate} increases at n = {n}: {value} -> {next}")]
    NonMonotoneCurve {
        coordinate: usize,
        n: usize,
        value: f64,
        next: f64,
    },
    #[error("curve {coordinate} leaves [0, 1] at n = {n}: {value}")]
    CurveOutOfRange {
        coordinate: usize,
        n: usize,
        value: f64,
    },
    #[error("decrement D_{n} is not a positive contraction (eigenvalue {witness})")]
    InvalidDecrement { n: usize, witness: f64 },
    #[error("initial operator is not a positive contraction (eigenvalue {witness})")]
    InvalidStart { witness: f64 },
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Spec(#[from] ChainSpecError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Every violation found while validating a chain spec document.
#[derive(Debug, Error, Clone, PartialEq)]
pub struct ChainSpecError {
    pub violations: Vec<String>,
}

impl fmt::Display for ChainSpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid chain spec: {}", self.violations.join("; "))
    }
}

/// A nonincreasing eigenvalue curve `n ↦ λ(n) ∈ [0, 1]`, `n >= 1`.
///
/// JSON form is a tagged array, e.g. `["const", 1]` or `["harmonic_to", 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    /// `c`
    Const(f64),
    /// `L + (1 - L) / n`; starts at 1.
    HarmonicTo(f64),
    /// `r^n`
    Geometric(f64),
    /// `L + (c - L) r^(n-1)`; starts at `c`.
    ExpTo { limit: f64, start: f64, rate: f64 },
    /// Piecewise constant: value of the last stage whose start is `<= n`.
    Staged(Vec<(usize, f64)>),
    /// `clip(1 - 1/k + 1/n)`: equal to 1 up to `n = k`, then drops just
    /// below 1 and decreases towards `1 - 1/k`.
    NearOne(usize),
}

impl Curve {
    pub fn value(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Curve::Const(c) => *c,
            Curve::HarmonicTo(l) => l + (1.0 - l) / nf,
            Curve::Geometric(r) => r.powi(n as i32),
            Curve::ExpTo { limit, start, rate } => {
                limit + (start - limit) * rate.powi(n as i32 - 1)
            }
            Curve::Staged(stages) => stages
                .iter()
                .take_while(|(start, _)| *start <= n)
                .last()
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN),
            Curve::NearOne(k) => (1.0 - 1.0 / *k as f64 + 1.0 / nf).clamp(0.0, 1.0),
        }
    }

    pub fn limit(&self) -> f64 {
        match self {
            Curve::Const(c) => *c,
            Curve::HarmonicTo(l) => *l,
            Curve::Geometric(r) => {
                if *r >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Curve::ExpTo { limit, .. } => *limit,
            Curve::Staged(stages) => stages.last().map(|s| s.1).unwrap_or(f64::NAN),
            Curve::NearOne(k) => (1.0 - 1.0 / *k as f64).clamp(0.0, 1.0),
        }
    }

    /// Whether `λ(m) = 1` for every `m >= n`, provable from the parameters.
    pub fn stays_one_from(&self, n: usize) -> bool {
        match self {
            Curve::Const(c) => *c == 1.0,
            Curve::Geometric(r) => *r == 1.0,
            Curve::ExpTo { limit, start, .. } => *limit == 1.0 && *start == 1.0,
            Curve::Staged(stages) => stages
                .iter()
                .filter(|(start, _)| *start > n)
                .chain(stages.iter().take_while(|(start, _)| *start <= n).last())
                .all(|(_, v)| *v == 1.0),
            Curve::HarmonicTo(l) => *l == 1.0,
            Curve::NearOne(_) => false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = |name: &str, x: f64| {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(format!("{name} {x} out of [0,1]"))
            }
        };
        match self {
            Curve::Const(c) => unit("const value", *c),
            Curve::HarmonicTo(l) => unit("harmonic_to limit", *l),
            Curve::Geometric(r) => unit("geometric ratio", *r),
            Curve::ExpTo { limit, start, rate } => {
                unit("exp_to limit", *limit)?;
                unit("exp_to start", *start)?;
                unit("exp_to rate", *rate)?;
                if limit > start {
                    return Err(format!("exp_to limit {limit} exceeds start {start}"));
                }
                Ok(())
            }
            Curve::Staged(stages) => {
                if stages.first().map(|s| s.0) != Some(1) {
                    return Err("staged curve must start at n = 1".into());
                }
                for w in stages.windows(2) {
                    if w[1].0 <= w[0].0 {
                        return Err("staged starts must be strictly increasing".into());
                    }
                    if w[1].1 > w[0].1 {
                        return Err(format!("staged values increase at n = {}", w[1].0));
                    }
                }
                stages.iter().try_for_each(|s| unit("staged value", s.1))
            }
            Curve::NearOne(k) => {
                if *k == 0 {
                    Err("near_one index must be >= 1".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Curve::Const(c) => json!(["const", c]),
            Curve::HarmonicTo(l) => json!(["harmonic_to", l]),
            Curve::Geometric(r) => json!(["geometric", r]),
            Curve::ExpTo { limit, start, rate } => json!(["exp_to", limit, start, rate]),
            Curve::Staged(stages) => {
                let s: Vec<Value> = stages.iter().map(|(n, v)| json!([n, v])).collect();
                json!(["staged", s])
            }
            Curve::NearOne(k) => json!(["near_one", k]),
        }
    }

    pub fn from_json(v: &Value) -> Result<Curve, String> {
        let arr = v.as_array().ok_or("curve must be an array")?;
        let tag = arr
            .first()
            .and_then(Value::as_str)
            .ok_or("curve tag missing")?;
        let num = |i: usize| -> Result<f64, String> {
            arr.get(i)
                .and_then(Value::as_f64)
                .ok_or_else(|| format!("{tag}: numeric parameter {i} missing"))
        };
        let arity = |n: usize| -> Result<(), String> {
            if arr.len() == n + 1 {
                Ok(())
            } else {
                Err(format!(
                    "{tag}: expected {n} parameter(s), got {}",
                    arr.len() - 1
                ))
            }
        };
        let curve = match tag {
            "const" => {
                arity(1)?;
                Curve::Const(num(1)?)
            }
            "harmonic_to" => {
                arity(1)?;
                Curve::HarmonicTo(num(1)?)
            }
            "geometric" => {
                arity(1)?;
                Curve::Geometric(num(1)?)
            }
            "exp_to" => {
                arity(3)?;
                Curve::ExpTo {
                    limit: num(1)?,
                    start: num(2)?,
                    rate: num(3)?,
                }
            }
            "staged" => {
                arity(1)?;
                let stages = arr[1]
                    .as_array()
                    .ok_or("staged: stage list must be an array")?;
                let parsed = stages
                    .iter()
                    .map(|s| match s.as_array().map(Vec::as_slice) {
                        Some([n, v]) => match (n.as_u64(), v.as_f64()) {
                            (Some(n), Some(v)) => Ok((n as usize, v)),
                            _ => Err("staged: stage must be [n, value]".to_string()),
                        },
                        _ => Err("staged: stage must be [n, value]".to_string()),
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Curve::Staged(parsed)
            }
            "near_one" => {
                arity(1)?;
                let k = arr[1]
                    .as_u64()
                    .ok_or("near_one: index must be a positive integer")?;
                Curve::NearOne(k as usize)
            }
            other => return Err(format!("unknown curve kind '{other}'")),
        };
        curve.validate()?;
        Ok(curve)
    }
}

impl Serialize for Curve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Curve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Curve::from_json(&v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    Diagonal,
    SchurDecrement,
    ConjugatedDiagonal,
    GapEngineered,
    NearOneAccumulating,
    /// Loaded from serialized operators; ordering is not guaranteed.
    External,
}

impl ChainKind {
    pub const GENERATED: [ChainKind; 5] = [
        ChainKind::Diagonal,
        ChainKind::SchurDecrement,
        ChainKind::ConjugatedDiagonal,
        ChainKind::GapEngineered,
        ChainKind::NearOneAccumulating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChainKind::Diagonal => "diagonal",
            ChainKind::SchurDecrement => "schur_decrement",
            ChainKind::ConjugatedDiagonal => "conjugated_diagonal",
            ChainKind::GapEngineered => "gap_engineered",
            ChainKind::NearOneAccumulating => "near_one_accumulating",
            ChainKind::External => "external",
        }
    }
}

/// A materialized chain `T_1, ..., T_horizon`.
#[derive(Debug, Clone)]
pub struct ContractionChain {
    dim: usize,
    kind: ChainKind,
    operators: Vec<Operator>,
    analytic_limit: Option<Operator>,
    seed: Option<u64>,
    /// Eigenvalue curves in the eigenbasis, when the generator has them.
    curves: Option<Vec<Curve>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ChainViolation {
    NotContraction { n: usize, witness: f64 },
    NotDecreasing { n: usize, min_eigenvalue: f64 },
}

impl ContractionChain {
    /// Wraps externally supplied operators without checking the ordering;
    /// use [`ContractionChain::validate`] to inspect them.
    pub fn from_operators_unchecked(operators: Vec<Operator>) -> Result<Self, ChainError> {
        let first = operators
            .first()
            .ok_or_else(|| ChainError::Infeasible("empty operator list".into()))?;
        let dim = first.dim();
        for op in &operators {
            first.check_dim(op)?;
        }
        Ok(Self {
            dim,
            kind: ChainKind::External,
            operators,
            analytic_limit: None,
            seed: None,
            curves: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.operators.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn analytic_limit(&self) -> Option<&Operator> {
        self.analytic_limit.as_ref()
    }

    pub fn curves(&self) -> Option<&[Curve]> {
        self.curves.as_deref()
    }

    /// `T_n` for `1 <= n <= horizon`.
    pub fn operator_at(&self, n: usize) -> Option<&Operator> {
        n.checked_sub(1).and_then(|i| self.operators.get(i))
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    /// Drops every operator beyond `horizon`.
    pub fn truncated(mut self, horizon: usize) -> Self {
        self.operators.truncate(horizon.max(1));
        self
    }

    /// Whether the eigenvalue curves prove `σ(T_n) ∩ (1-δ, 1) = ∅` for every
    /// `n >= from`, not just the materialized ones.
    pub fn proves_gap_from(&self, from: usize, delta: f64, tol: &Tolerances) -> bool {
        let Some(curves) = &self.curves else {
            return false;
        };
        curves
            .iter()
            .all(|c| c.value(from) <= 1.0 - delta + tol.eig || c.stays_one_from(from))
    }

    /// Checks positivity, contractivity and `T_{n+1} <= T_n` at every index.
    pub fn validate(&self, tol: &Tolerances) -> Result<Vec<ChainViolation>, OperatorError> {
        let mut out = Vec::new();
        for (i, op) in self.operators.iter().enumerate() {
            let n = i + 1;
            if let Some(witness) = is_positive_contraction(op, tol)?.witness {
                out.push(ChainViolation::NotContraction { n, witness });
            }
            if let Some(next) = self.operators.get(i + 1) {
                let check = loewner_leq(next, op, tol)?;
                if !check.holds {
                    out.push(ChainViolation::NotDecreasing {
                        n,
                        min_eigenvalue: check.min_eigenvalue,
                    });
                }
            }
        }
        Ok(out)
    }
}

/// Diagonal chain from an arbitrary eigenvalue function `(k, n) ↦ λ_k(n)`,
/// `k` zero-based. Monotonicity and range are checked by sampling every
/// `n <= horizon`.
pub fn diagonal_chain_from_fn(
    dim: usize,
    horizon: usize,
    eigenvalue: impl Fn(usize, usize) -> f64,
    limit: Option<Vec<f64>>,
) -> Result<ContractionChain, ChainError> {
    if dim == 0 || horizon == 0 {
        return Err(ChainError::Infeasible(
            "dim and horizon must be positive".into(),
        ));
    }
    let table: Vec<Vec<f64>> = (1..=horizon)
        .map(|n| (0..dim).map(|k| eigenvalue(k, n)).collect())
        .collect();
    for k in 0..dim {
        for n in 1..=horizon {
            let value = table[n - 1][k];
            if !(0.0..=1.0).contains(&value) {
                return Err(ChainError::CurveOutOfRange {
                    coordinate: k + 1,
                    n,
                    value,
                });
            }
            if n < horizon && table[n][k] > value {
                return Err(ChainError::NonMonotoneCurve {
                    coordinate: k + 1,
                    n,
                    value,
                    next: table[n][k],
                });
            }
        }
    }
    let operators = table
        .iter()
        .map(|row| Operator::diagonal(row))
        .collect::<Result<Vec<_>, _>>()?;
    let analytic_limit = limit.map(|l| Operator::diagonal(&l)).transpose()?;
    Ok(ContractionChain {
        dim,
        kind: ChainKind::Diagonal,
        operators,
        analytic_limit,
        seed: None,
        curves: None,
    })
}

fn validate_curves(curves: &[Curve]) -> Result<(), ChainError> {
    let errs: Vec<String> = curves
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.validate().err().map(|e| format!("curve {}: {e}", k + 1)))
        .collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ChainSpecError { violations: errs }.into())
    }
}

/// `T_n = diag(λ_1(n), ..., λ_d(n))` with limit `diag(lim λ_k)`.
pub fn diagonal_chain(curves: &[Curve], horizon: usize) -> Result<ContractionChain, ChainError> {
    validate_curves(curves)?;
    let limits: Vec<f64> = curves.iter().map(Curve::limit).collect();
    let mut chain = diagonal_chain_from_fn(
        curves.len(),
        horizon,
        |k, n| curves[k].value(n),
        Some(limits),
    )?;
    chain.curves = Some(curves.to_vec());
    Ok(chain)
}

/// `T_n = U diag(λ_k(n)) U*` for a seeded random unitary `U`.
pub fn conjugated_diagonal_chain(
    curves: &[Curve],
    horizon: usize,
    seed: u64,
) -> Result<ContractionChain, ChainError> {
    let base = diagonal_chain(curves, horizon)?;
    let mut rng = rng_from_seed(seed);
    let u = random_unitary(base.dim, &mut rng);
    let mut chain = conjugate_chain(base, &u)?;
    chain.kind = ChainKind::ConjugatedDiagonal;
    chain.seed = Some(seed);
    Ok(chain)
}

fn conjugate_chain(chain: ContractionChain, u: &Matrix) -> Result<ContractionChain, ChainError> {
    let all_identity = chain
        .curves
        .as_ref()
        .is_some_and(|cs| cs.iter().all(|c| c.stays_one_from(1)));
    if all_identity {
        // U I U* is only approximately I; keep the exact identity.
        return Ok(chain);
    }
    let operators = chain
        .operators
        .iter()
        .map(|op| op.conjugate_by(u))
        .collect::<Result<Vec<_>, _>>()?;
    let analytic_limit = chain
        .analytic_limit
        .map(|l| l.conjugate_by(u))
        .transpose()?;
    Ok(ContractionChain {
        operators,
        analytic_limit,
        ..chain
    })
}

/// `T_{n+1} = T_n^{1/2} (I - D_n) T_n^{1/2}` with `D_n = decrement(n)`.
pub fn schur_decrement_chain(
    t1: Operator,
    horizon: usize,
    mut decrement: impl FnMut(usize) -> Operator,
    tol: &Tolerances,
) -> Result<ContractionChain, ChainError> {
    if horizon == 0 {
        return Err(ChainError::Infeasible("horizon must be positive".into()));
    }
    if let Some(witness) = is_positive_contraction(&t1, tol)?.witness {
        return Err(ChainError::InvalidStart { witness });
    }
    let dim = t1.dim();
    let identity = Operator::identity(dim);
    let slack = tol.psd(dim);
    let mut operators = Vec::with_capacity(horizon);
    operators.push(t1);
    for n in 1..horizon {
        let d = decrement(n);
        identity.check_dim(&d)?;
        if let Some(witness) = is_positive_contraction(&d, tol)?.witness {
            return Err(ChainError::InvalidDecrement { n, witness });
        }
        let root = operators[n - 1].sqrt(slack)?;
        let next = root.sandwich(&identity.sub(&d)?)?;
        operators.push(next);
    }
    Ok(ContractionChain {
        dim,
        kind: ChainKind::SchurDecrement,
        operators,
        analytic_limit: None,
        seed: None,
        curves: None,
    })
}

/// Seeded Schur-decrement chain. `T_1 = U diag(1^r, μ) U*` with the `μ_k`
/// uniform in `[0, 1 - gap]`, and `D_n = decay^n (I - F) Q_n (I - F)` where
/// `F` projects onto the `r` fixed directions and `Q_n` is a random positive
/// contraction. The fixed space of every `T_n` is exactly `range(F)`.
pub fn seeded_schur_chain(
    dim: usize,
    fixed_rank: usize,
    gap: f64,
    decay: f64,
    horizon: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ContractionChain, ChainError> {
    if dim == 0 || fixed_rank > dim {
        return Err(ChainError::Infeasible(format!(
            "fixed_rank {fixed_rank} with dim {dim}"
        )));
    }
    if !(gap > 0.0 && gap < 1.0) || !(decay > 0.0 && decay < 1.0) {
        return Err(ChainError::Infeasible(
            "gap and decay must lie in (0,1)".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let u = random_unitary(dim, &mut rng);
    let spectrum: Vec<f64> = (0..dim)
        .map(|k| {
            if k < fixed_rank {
                1.0
            } else {
                rng.random_range(0.0..=1.0 - gap)
            }
        })
        .collect();
    let t1 = Operator::diagonal(&spectrum)?.conjugate_by(&u)?;
    let mut f = Matrix::zeros(dim, dim);
    for k in 0..fixed_rank {
        let v = u.column(k);
        f += &v * v.adjoint();
    }
    let complement = Matrix::identity(dim, dim) - f;
    let mut chain = schur_decrement_chain(
        t1,
        horizon,
        |n| {
            let q = random_positive_contraction(dim, &mut rng);
            let scale = Complex64::new(decay.powi(n as i32), 0.0);
            Operator::new((&complement * q.matrix() * &complement).map(|z| z * scale))
                .expect("finite decrement")
        },
        tol,
    )?;
    chain.seed = Some(seed);
    Ok(chain)
}

/// Chain whose every `T_n` has exactly `fixed_rank` eigenvalues equal to 1
/// and the rest in `[0, 1 - δ]`.
///
/// Non-fixed eigenvalues follow `(1-δ)(a_k + (1 - a_k) r_k^{n-1})` with
/// seeded `a_k ∈ [0.5, 1)` and `r_k ∈ [0.3, 0.9]`.
pub fn gap_engineered_chain(
    dim: usize,
    delta: f64,
    fixed_rank: usize,
    horizon: usize,
    seed: u64,
) -> Result<ContractionChain, ChainError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ChainError::Infeasible(format!(
            "delta {delta} out of (0,1)"
        )));
    }
    if dim == 0 || fixed_rank > dim {
        return Err(ChainError::Infeasible(format!(
            "fixed_rank {fixed_rank} with dim {dim}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let top = 1.0 - delta;
    let curves: Vec<Curve> = (0..dim)
        .map(|k| {
            if k < fixed_rank {
                Curve::Const(1.0)
            } else {
                let a: f64 = rng.random_range(0.5..1.0);
                let r: f64 = rng.random_range(0.3..=0.9);
                Curve::ExpTo {
                    limit: top * a,
                    start: top,
                    rate: r,
                }
            }
        })
        .collect();
    let u = random_unitary(dim, &mut rng);
    let base = diagonal_chain(&curves, horizon)?;
    let mut chain = conjugate_chain(base, &u)?;
    chain.kind = ChainKind::GapEngineered;
    chain.seed = Some(seed);
    Ok(chain)
}

/// Diagonal chain with `λ_k(n) = clip(1 - 1/k + 1/n)`.
///
/// Coordinate `k` stays at 1 while `n <= k` and then enters `(1 - δ, 1)` at
/// `n = k + 1` with `1 - λ = 1/(k(k+1))`, so eigenvalues crowd towards 1 as
/// the dimension grows. With a seed the chain is conjugated by a random
/// unitary.
pub fn near_one_accumulating_chain(
    dim: usize,
    horizon: usize,
    seed: Option<u64>,
) -> Result<ContractionChain, ChainError> {
    if dim < 2 {
        return Err(ChainError::Infeasible(
            "near_one_accumulating needs dim >= 2".into(),
        ));
    }
    let curves: Vec<Curve> = (1..=dim).map(Curve::NearOne).collect();
    let base = diagonal_chain(&curves, horizon)?;
    let mut chain = match seed {
        Some(s) => {
            let u = random_unitary(dim, &mut rng_from_seed(s));
            conjugate_chain(base, &u)?
        }
        None => base,
    };
    chain.kind = ChainKind::NearOneAccumulating;
    chain.seed = seed;
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChainParams {
    Diagonal {
        curves: Vec<Curve>,
    },
    ConjugatedDiagonal {
        curves: Vec<Curve>,
    },
    SchurDecrement {
        fixed_rank: usize,
        gap: f64,
        decay: f64,
    },
    GapEngineered {
        delta: f64,
        fixed_rank: usize,
    },
    NearOneAccumulating,
}

/// Declarative description of a chain; see [`parse_chain_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub dim: usize,
    pub horizon: usize,
    pub seed: Option<u64>,
    pub params: ChainParams,
}

impl ChainSpec {
    pub fn kind(&self) -> ChainKind {
        match self.params {
            ChainParams::Diagonal { .. } => ChainKind::Diagonal,
            ChainParams::ConjugatedDiagonal { .. } => ChainKind::ConjugatedDiagonal,
            ChainParams::SchurDecrement { .. } => ChainKind::SchurDecrement,
            ChainParams::GapEngineered { .. } => ChainKind::GapEngineered,
            ChainParams::NearOneAccumulating => ChainKind::NearOneAccumulating,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "kind": self.kind().name(),
            "dim": self.dim,
            "horizon": self.horizon,
        });
        if let Some(seed) = self.seed {
            v["seed"] = json!(seed);
        }
        match &self.params {
            ChainParams::Diagonal { curves } | ChainParams::ConjugatedDiagonal { curves } => {
                v["curves"] = Value::Array(curves.iter().map(Curve::to_json).collect());
            }
            ChainParams::SchurDecrement {
                fixed_rank,
                gap,
                decay,
            } => {
                v["fixed_rank"] = json!(fixed_rank);
                v["gap"] = json!(gap);
                v["decay"] = json!(decay);
            }
            ChainParams::GapEngineered { delta, fixed_rank } => {
                v["delta"] = json!(delta);
                v["fixed_rank"] = json!(fixed_rank);
            }
            ChainParams::NearOneAccumulating => {}
        }
        v
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    /// Materializes the chain.
    pub fn build(&self, tol: &Tolerances) -> Result<ContractionChain, ChainError> {
        let need_seed = || {
            self.seed.ok_or_else(|| ChainSpecError {
                violations: vec!["seed required".into()],
            })
        };
        match &self.params {
            ChainParams::Diagonal { curves } => diagonal_chain(curves, self.horizon),
            ChainParams::ConjugatedDiagonal { curves } => {
                conjugated_diagonal_chain(curves, self.horizon, need_seed()?)
            }
            ChainParams::SchurDecrement {
                fixed_rank,
                gap,
                decay,
            } => seeded_schur_chain(
                self.dim,
                *fixed_rank,
                *gap,
                *decay,
                self.horizon,
                need_seed()?,
                tol,
            ),
            ChainParams::GapEngineered { delta, fixed_rank } => {
                gap_engineered_chain(self.dim, *delta, *fixed_rank, self.horizon, need_seed()?)
            }
            ChainParams::NearOneAccumulating => {
                near_one_accumulating_chain(self.dim, self.horizon, self.seed)
            }
        }
    }
}

/// Parses and validates a chain spec document, collecting every violation.
pub fn parse_chain_spec(document: &str) -> Result<ChainSpec, ChainSpecError> {
    let fail = |msg: String| ChainSpecError {
        violations: vec![msg],
    };
    let value: Value =
        serde_json::from_str(document).map_err(|e| fail(format!("malformed JSON: {e}")))?;
    chain_spec_from_value(&value)
}

pub fn chain_spec_from_value(value: &Value) -> Result<ChainSpec, ChainSpecError> {
    let Some(obj) = value.as_object() else {
        return Err(ChainSpecError {
            violations: vec!["spec must be a JSON object".into()],
        });
    };
    let mut errs = Vec::new();

    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some(k) => Some(k),
        None => {
            errs.push("kind missing".to_string());
            None
        }
    };
    let dim = match obj.get("dim").map(|v| v.as_u64()) {
        Some(Some(d)) if d >= 1 => Some(d as usize),
        Some(_) => {
            errs.push("dim must be a positive integer".into());
            None
        }
        None => {
            errs.push("dim missing".into());
            None
        }
    };
    let horizon = match obj.get("horizon").map(|v| v.as_u64()) {
        None => DEFAULT_HORIZON,
        Some(Some(h)) if h >= 1 => h as usize,
        Some(_) => {
            errs.push("horizon must be a positive integer".into());
            DEFAULT_HORIZON
        }
    };
    let seed = match obj.get("seed").map(|v| v.as_u64()) {
        None => None,
        Some(Some(s)) => Some(s),
        Some(None) => {
            errs.push("seed must be a nonnegative integer".into());
            None
        }
    };

    let number = |name: &str, errs: &mut Vec<String>| -> Option<f64> {
        match obj.get(name).map(|v| v.as_f64()) {
            Some(Some(x)) => Some(x),
            Some(None) => {
                errs.push(format!("{name} must be a number"));
                None
            }
            None => None,
        }
    };
    let open_unit = |name: &str, x: Option<f64>, errs: &mut Vec<String>| {
        if let Some(x) = x {
            if !(x > 0.0 && x < 1.0) {
                errs.push(format!("{name} out of (0,1)"));
            }
        }
    };
    let rank = |errs: &mut Vec<String>, default: Option<usize>| -> Option<usize> {
        match obj.get("fixed_rank").map(|v| v.as_u64()) {
            Some(Some(r)) => {
                if let Some(d) = dim {
                    if r as usize > d {
                        errs.push(format!("fixed_rank {r} exceeds dim {d}"));
                    }
                }
                Some(r as usize)
            }
            Some(None) => {
                errs.push("fixed_rank must be a nonnegative integer".into());
                None
            }
            None => {
                if default.is_none() {
                    errs.push("fixed_rank missing".into());
                }
                default
            }
        }
    };
    let curves = |errs: &mut Vec<String>| -> Option<Vec<Curve>> {
        let Some(list) = obj.get("curves") else {
            errs.push("curves missing".into());
            return None;
        };
        let Some(list) = list.as_array() else {
            errs.push("curves must be an array".into());
            return None;
        };
        if let Some(d) = dim {
            if list.len() != d {
                errs.push(format!("{} curves given for dim {d}", list.len()));
            }
        }
        let mut out = Vec::new();
        for (k, c) in list.iter().enumerate() {
            match Curve::from_json(c) {
                Ok(c) => out.push(c),
                Err(e) => errs.push(format!("curve {}: {e}", k + 1)),
            }
        }
        Some(out)
    };
    let require_seed = |errs: &mut Vec<String>| {
        if seed.is_none() && !obj.contains_key("seed") {
            errs.push("seed required".into());
        }
    };

    let params = match kind {
        Some("diagonal") => curves(&mut errs).map(|curves| ChainParams::Diagonal { curves }),
        Some("conjugated_diagonal") => {
            require_seed(&mut errs);
            curves(&mut errs).map(|curves| ChainParams::ConjugatedDiagonal { curves })
        }
        Some("schur_decrement") => {
            require_seed(&mut errs);
            let fixed_rank = rank(&mut errs, Some(1));
            let gap = number("gap", &mut errs);
            let decay = number("decay", &mut errs);
            open_unit("gap", gap, &mut errs);
            open_unit("decay", decay, &mut errs);
            fixed_rank.map(|fixed_rank| ChainParams::SchurDecrement {
                fixed_rank,
                gap: gap.unwrap_or(0.2),
                decay: decay.unwrap_or(0.5),
            })
        }
        Some("gap_engineered") => {
            require_seed(&mut errs);
            let delta = number("delta", &mut errs);
            if delta.is_none() && !obj.contains_key("delta") {
                errs.push("delta missing".into());
            }
            open_unit("delta", delta, &mut errs);
            let fixed_rank = rank(&mut errs, None);
            match (delta, fixed_rank) {
                (Some(delta), Some(fixed_rank)) => {
                    Some(ChainParams::GapEngineered { delta, fixed_rank })
                }
                _ => None,
            }
        }
        Some("near_one_accumulating") => {
            if dim.is_some_and(|d| d < 2) {
                errs.push("near_one_accumulating needs dim >= 2".into());
            }
            Some(ChainParams::NearOneAccumulating)
        }
        Some(other) => {
            errs.push(format!("unknown kind '{other}'"));
            None
        }
        None => None,
    };

    match (params, dim) {
        (Some(params), Some(dim)) if errs.is_empty() => Ok(ChainSpec {
            dim,
            horizon,
            seed,
            params,
        }),
        _ => Err(ChainSpecError { violations: errs }),
    }
}

/// Chains serialize as a JSON array of operator documents.
pub fn chain_to_json(chain: &ContractionChain) -> Value {
    serde_json::to_value(chain.operators()).expect("operators serialize")
}

pub fn chain_from_json(text: &str) -> Result<ContractionChain, ChainError> {
    let ops: Vec<Operator> =
        serde_json::from_str(text).map_err(|e| OperatorError::Malformed(e.to_string()))?;
    ContractionChain::from_operators_unchecked(ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::fixed_point_projection;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn eigen_at(chain: &ContractionChain, n: usize) -> Vec<f64> {
        chain.operator_at(n).unwrap().eigenvalues().unwrap()
    }

    #[test]
    fn telescoping_diagonal_chain() {
        let chain = diagonal_chain(&[Curve::Const(1.0), Curve::HarmonicTo(0.5)], 50).unwrap();
        for n in [1, 2, 7, 50] {
            let t = chain.operator_at(n).unwrap().matrix();
            assert_eq!(t[(0, 0)].re, 1.0);
            assert!((t[(1, 1)].re - (1.0 + 1.0 / n as f64) / 2.0).abs() < 1e-15);
        }
        let limit = chain.analytic_limit().unwrap().matrix();
        assert_eq!(limit[(1, 1)].re, 0.5);
        assert!(chain.operator_at(0).is_none());
        assert!(chain.operator_at(51).is_none());
    }

    #[test]
    fn constant_and_geometric_curves() {
        let chain = diagonal_chain(&[Curve::Const(0.7), Curve::Const(0.2)], 10).unwrap();
        assert_eq!(chain.operator_at(1), chain.operator_at(10));
        assert_eq!(chain.analytic_limit(), chain.operator_at(1));

        let chain = diagonal_chain(&[Curve::Geometric(0.9)], 20).unwrap();
        assert!((chain.operator_at(3).unwrap().matrix()[(0, 0)].re - 0.729).abs() < 1e-15);
        assert_eq!(chain.analytic_limit().unwrap().matrix()[(0, 0)].re, 0.0);
    }

    #[test]
    fn increasing_curve_is_rejected_with_index() {
        // 1 - 1/(k(n+1)) increases in n
        let err = diagonal_chain_from_fn(
            4,
            20,
            |k, n| 1.0 - 1.0 / ((k + 1) as f64 * (n + 1) as f64),
            None,
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                ChainError::NonMonotoneCurve {
                    coordinate: 1,
                    n: 1,
                    ..
                }
            ),
            "{err:?}"
        );

        let err = diagonal_chain_from_fn(1, 5, |_, _| 1.5, None).unwrap_err();
        assert!(matches!(
            err,
            ChainError::CurveOutOfRange {
                coordinate: 1,
                n: 1,
                ..
            }
        ));
    }

    #[test]
    fn near_one_default_curves() {
        let chain = near_one_accumulating_chain(2, 30, None).unwrap();
        for n in 1..=30 {
            let nf = n as f64;
            let expected = [(1.0 / nf).min(1.0), (0.5 + 1.0 / nf).min(1.0)];
            let t = chain.operator_at(n).unwrap().matrix();
            assert!((t[(0, 0)].re - expected[0]).abs() < 1e-15);
            assert!((t[(1, 1)].re - expected[1]).abs() < 1e-15);
        }
        // coordinate k sits at 1 - 1/(k(k+1)) right after leaving 1
        let chain = near_one_accumulating_chain(8, 20, None).unwrap();
        for k in 2..=8usize {
            let v = chain.operator_at(k + 1).unwrap().matrix()[(k - 1, k - 1)].re;
            assert!((1.0 - v - 1.0 / (k * (k + 1)) as f64).abs() < 1e-14);
            assert_eq!(
                chain.operator_at(k).unwrap().matrix()[(k - 1, k - 1)].re,
                1.0
            );
        }
        assert!(near_one_accumulating_chain(1, 10, None).is_err());
    }

    #[test]
    fn schur_decrement_edge_cases() {
        let t = tol();
        let t1 = Operator::diagonal(&[1.0, 0.6, 0.3]).unwrap();
        let constant = schur_decrement_chain(t1.clone(), 5, |_| Operator::zeros(3), &t).unwrap();
        for n in 1..=5 {
            let diff = crate::operator::operator_norm(
                &(constant.operator_at(n).unwrap().matrix() - t1.matrix()),
            );
            assert!(diff < 1e-15);
        }
        let collapsed =
            schur_decrement_chain(t1.clone(), 4, |_| Operator::identity(3), &t).unwrap();
        for n in 2..=4 {
            assert!(collapsed.operator_at(n).unwrap().op_norm().unwrap() < 1e-15);
        }
        let err =
            schur_decrement_chain(t1, 4, |_| Operator::diagonal(&[1.5, 0.0, 0.0]).unwrap(), &t)
                .unwrap_err();
        assert!(matches!(err, ChainError::InvalidDecrement { n: 1, .. }));
    }

    #[test]
    fn seeded_schur_chain_is_ordered_and_keeps_fixed_space() {
        let t = tol();
        for seed in 0..3 {
            let chain = seeded_schur_chain(4, 1, 0.2, 0.5, 40, seed, &t).unwrap();
            assert!(chain.validate(&t).unwrap().is_empty());
            for n in [1, 10, 40] {
                assert_eq!(
                    fixed_point_projection(chain.operator_at(n).unwrap(), &t)
                        .unwrap()
                        .rank,
                    1
                );
            }
        }
    }

    #[test]
    fn gap_engineered_spectra() {
        let chain = gap_engineered_chain(3, 0.1, 1, 30, 7).unwrap();
        for n in [1, 2, 15, 30] {
            let ev = eigen_at(&chain, n);
            assert!((ev[2] - 1.0).abs() < 1e-12);
            assert!(ev[1] <= 0.9 + 1e-12, "{ev:?}");
        }
        let none = gap_engineered_chain(3, 0.1, 0, 10, 7).unwrap();
        assert!(eigen_at(&none, 1).iter().all(|&x| x <= 0.9 + 1e-12));
        let full = gap_engineered_chain(3, 0.1, 3, 10, 7).unwrap();
        assert_eq!(full.operator_at(5).unwrap(), &Operator::identity(3));
        assert!(gap_engineered_chain(3, 1.5, 1, 10, 7).is_err());
        assert!(gap_engineered_chain(3, 0.1, 4, 10, 7).is_err());
    }

    #[test]
    fn curve_gap_proof() {
        let t = tol();
        let chain = diagonal_chain(&[Curve::Const(1.0), Curve::Geometric(0.9)], 10).unwrap();
        assert!(chain.proves_gap_from(1, 0.1, &t));
        assert!(!chain.proves_gap_from(1, 0.2, &t));
        assert!(chain.proves_gap_from(3, 0.2, &t));
        let staged =
            diagonal_chain(&[Curve::Staged(vec![(1, 1.0), (11, 0.95), (20, 0.5)])], 30).unwrap();
        assert!(!staged.proves_gap_from(1, 0.1, &t));
        assert!(staged.proves_gap_from(20, 0.5, &t));
    }

    #[test]
    fn parse_valid_diagonal_spec() {
        let spec =
            parse_chain_spec(r#"{"kind":"diagonal","dim":2,"curves":[["const",1],["harmonic_to",0.5]],"horizon":200}"#)
                .unwrap();
        assert_eq!(spec.kind(), ChainKind::Diagonal);
        assert_eq!(spec.horizon, 200);
        assert_eq!(
            spec.params,
            ChainParams::Diagonal {
                curves: vec![Curve::Const(1.0), Curve::HarmonicTo(0.5)]
            }
        );
        let back = chain_spec_from_value(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn parse_reports_every_violation() {
        let err =
            parse_chain_spec(r#"{"kind":"schur_decrement","dim":3,"fixed_rank":1}"#).unwrap_err();
        assert_eq!(err.violations, vec!["seed required".to_string()]);

        let err = parse_chain_spec(
            r#"{"kind":"gap_engineered","dim":3,"delta":1.5,"fixed_rank":1,"seed":1}"#,
        )
        .unwrap_err();
        assert_eq!(err.violations, vec!["delta out of (0,1)".to_string()]);

        let err = parse_chain_spec(r#"{"kind":"gap_engineered","dim":2,"delta":0,"fixed_rank":5}"#)
            .unwrap_err();
        assert_eq!(err.violations.len(), 3, "{:?}", err.violations);

        let err = parse_chain_spec(r#"{"kind":"spiral","dim":2}"#).unwrap_err();
        assert!(err.violations[0].contains("unknown kind"));

        let err = parse_chain_spec(
            r#"{"kind":"diagonal","dim":2,"curves":[["const",1],["staged",[[1,0.5],[4,0.9]]]]}"#,
        )
        .unwrap_err();
        assert!(
            err.violations[0].contains("staged values increase"),
            "{:?}",
            err.violations
        );

        assert!(
            parse_chain_spec("{not json").unwrap_err().violations[0].starts_with("malformed JSON")
        );
    }

    #[test]
    fn same_spec_same_chain() {
        let doc = r#"{"kind":"schur_decrement","dim":3,"fixed_rank":1,"seed":42,"horizon":25}"#;
        let a = parse_chain_spec(doc).unwrap().build(&tol()).unwrap();
        let b = parse_chain_spec(doc).unwrap().build(&tol()).unwrap();
        assert_eq!(a.operators(), b.operators());
        let c = parse_chain_spec(&doc.replace("42", "43"))
            .unwrap()
            .build(&tol())
            .unwrap();
        assert_ne!(a.operators(), c.operators());
    }

    #[test]
    fn chain_json_round_trip_keeps_operators() {
        let chain = gap_engineered_chain(2, 0.2, 1, 5, 3).unwrap();
        let text = chain_to_json(&chain).to_string();
        let back = chain_from_json(&text).unwrap();
        assert_eq!(back.kind(), ChainKind::External);
        assert_eq!(back.operators(), chain.operators());
    }

    #[test]
    fn validate_flags_broken_ordering() {
        let ops = vec![
            Operator::diagonal(&[0.5, 0.5]).unwrap(),
            Operator::diagonal(&[0.6, 0.4]).unwrap(),
        ];
        let chain = ContractionChain::from_operators_unchecked(ops).unwrap();
        let v = chain.validate(&tol()).unwrap();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], ChainViolation::NotDecreasing { n: 1, .. }));
    }
}
