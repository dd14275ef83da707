//! Command-line driver. Every command writes deterministic CSV/JSON files
//! into `--out` and reports through its exit status.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::chain::{chain_from_json, parse_chain_spec, ChainSpec, ContractionChain};
use crate::corpus::{
    corpus_specs, derive_seed, fixed_vector_pairs, rank_descent_triples, schur_pairs,
};
use crate::export::fmt_float;
use crate::gap::{
    certificate_search, rank_strict_descent_check, rate_bound_check, GapError, RateOptions,
    SearchOutcome, DEFAULT_DELTA_GRID,
};
use crate::nonexample::{
    build_nonexample, givens_factorization, givens_to_json, verify_givens,
    verify_not_totally_bounded, verify_step_distances, verify_tail_conditions, StepKind,
};
use crate::operator::{
    check_fixed_vector_equivalence, check_projection_monotone, fixed_point_projection, Tolerances,
};
use crate::product::{
    check_projection_convergence, consecutive_difference_report, default_probes, iterate_products,
    limit_operator, TraceRow,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_NO_CERTIFICATE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Convergence threshold reported in `simulate` and asserted in `verify`.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Tolerance for the Givens reconstruction `U_m ⋯ U_1 e_1 = ξ_{m+1}`.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "contraction-lab",
    version,
    about = "Products of decreasing chains of positive contractions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Eigenvalue clustering tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_eig: f64,
    /// Per-dimension PSD slack; the Loewner tolerance is this times dim.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_psd: f64,
    /// Fixed-vector residual threshold.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_fix: f64,
    /// Seed for probes and the verification corpus.
    #[arg(long, global = true, env = "CONTRACTION_LAB_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Iterate S_n and write convergence traces.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        /// Defaults to the spec horizon.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Search for a uniform spectral gap certificate and check the rate bound.
    Gap {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        /// Strictly decreasing delta values.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DELTA_GRID)]
        grid: Vec<f64>,
        /// Epsilon in the rate bound.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
    },
    /// Build the rotating unit-vector sequence and verify its properties.
    Nonexample {
        #[arg(long, default_value_t = 10)]
        nmax: usize,
        /// Net radius.
        #[arg(long, default_value_t = 0.5)]
        epsilon: f64,
        /// Largest k in the ‖ξ_(m+k) − ξ_m‖ tail check.
        #[arg(long, default_value_t = 3)]
        kmax: usize,
    },
    /// Run the property suite over a seeded corpus.
    Verify {
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        dims: Vec<usize>,
        /// Overrides the calibrated horizons.
        #[arg(long)]
        horizon: Option<usize>,
        /// Extra chain (operator list JSON) checked for chain invariants.
        #[arg(long)]
        chain: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Internal(String),
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_PASS
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("contraction-lab: {e}");
            match e {
                CliError::Usage(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    let tol = Tolerances {
        eig: cli.tol_eig,
        psd_per_dim: cli.tol_psd,
        fix: cli.tol_fix,
    };
    for (name, x) in [
        ("tol-eig", tol.eig),
        ("tol-psd", tol.psd_per_dim),
        ("tol-fix", tol.fix),
    ] {
        if !(x.is_finite() && x >= 0.0) {
            return Err(usage(format!("--{name} must be a nonnegative number")));
        }
    }
    let out = Output::new(&cli.out)?;
    match &cli.command {
        Command::Simulate { spec, horizon } => cmd_simulate(spec, *horizon, cli.seed, &tol, &out),
        Command::Gap {
            spec,
            horizon,
            grid,
            epsilon,
        } => cmd_gap(spec, *horizon, grid, *epsilon, cli.seed, &tol, &out),
        Command::Nonexample {
            nmax,
            epsilon,
            kmax,
        } => cmd_nonexample(*nmax, *epsilon, *kmax, &out),
        Command::Verify {
            seeds,
            dims,
            horizon,
            chain,
        } => cmd_verify(
            *seeds,
            dims,
            *horizon,
            chain.as_deref(),
            cli.seed,
            &tol,
            &out,
        ),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn write_with(
        &self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> CliResult<()> {
        let path = self.dir.join(name);
        let io_err = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        f(&mut w).and_then(|_| w.flush()).map_err(io_err)
    }

    fn json(&self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(internal)?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }
}

fn load_spec(path: &Path) -> CliResult<ChainSpec> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_chain_spec(&text)
        .map_err(|e| usage(format!("{}: {}", path.display(), e.violations.join("; "))))
}

fn load_chain(path: &Path, tol: &Tolerances) -> CliResult<ContractionChain> {
    load_spec(path)?
        .build(tol)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn resolve_horizon(chain: &ContractionChain, horizon: Option<usize>) -> CliResult<usize> {
    match horizon {
        None => Ok(chain.horizon()),
        Some(0) => Err(usage("--horizon must be positive")),
        Some(h) if h > chain.horizon() => Err(usage(format!(
            "--horizon {h} exceeds the chain horizon {}",
            chain.horizon()
        ))),
        Some(h) => Ok(h),
    }
}

fn status_code(failed: bool, inconclusive: bool) -> (i32, &'static str) {
    if failed {
        (EXIT_FAILURE, "fail")
    } else if inconclusive {
        (EXIT_INCONCLUSIVE, "inconclusive")
    } else {
        (EXIT_PASS, "pass")
    }
}

fn cmd_simulate(
    spec_path: &Path,
    horizon: Option<usize>,
    seed: u64,
    tol: &Tolerances,
    out: &Output,
) -> CliResult<i32> {
    let spec = load_spec(spec_path)?;
    let chain = spec
        .build(tol)
        .map_err(|e| usage(format!("{}: {e}", spec_path.display())))?;
    let horizon = resolve_horizon(&chain, horizon)?;
    let limit = limit_operator(&chain).map_err(internal)?;
    let p = fixed_point_projection(&limit.operator, tol).map_err(internal)?;
    let probes = default_probes(&p, seed);
    let trace = iterate_products(&chain, &probes, horizon, tol).map_err(internal)?;
    let projections =
        check_projection_convergence(&chain, horizon, &probes, tol).map_err(internal)?;
    let consecutive = consecutive_difference_report(&trace);
    let violations = chain
        .clone()
        .truncated(horizon)
        .validate(tol)
        .map_err(internal)?;

    out.write_with("trace.csv", |w| trace.write_csv(w))?;

    let finals: Vec<Value> = trace
        .final_rows()
        .iter()
        .map(|r| {
            let consec = (r.n > 1)
                .then(|| trace.row(r.n - 1, r.probe).consec_diff)
                .flatten();
            json!({
                "probe": trace.probe_ids[r.probe],
                "sot_err": r.sot_err,
                "adj_err": r.adj_err,
                "wot_err": r.wot_err,
                "consec_diff": consec,
            })
        })
        .collect();
    let opnorm_final = *trace.opnorm_err.last().expect("positive horizon");
    let max_of = |f: fn(&TraceRow) -> f64| trace.final_rows().iter().map(f).fold(0.0, f64::max);
    let max_identity = consecutive
        .rows
        .iter()
        .map(|r| r.identity_residual)
        .fold(0.0, f64::max);
    let verdicts = json!({
        "chain_ordered": violations.is_empty(),
        "ab_chain": consecutive.all_pass(),
        "projections_monotone": projections.rank_nonincreasing && projections.projections_nonincreasing,
        "limit_conclusive": limit.provenance.conclusive(),
    });
    let failed = !(violations.is_empty()
        && consecutive.all_pass()
        && projections.rank_nonincreasing
        && projections.projections_nonincreasing);
    let (code, status) = status_code(failed, !limit.provenance.conclusive());
    let summary = json!({
        "spec": spec.to_json(),
        "horizon": horizon,
        "probe_seed": seed,
        "limit": limit.provenance,
        "limit_rank": trace.limit_rank,
        "final": finals,
        "opnorm_err": opnorm_final,
        "max_product_norm": trace.max_product_norm,
        "converged": {
            "threshold": CONVERGENCE_TOL,
            "sot": max_of(|r| r.sot_err) < CONVERGENCE_TOL,
            "adj": max_of(|r| r.adj_err) < CONVERGENCE_TOL,
            "opnorm": opnorm_final < CONVERGENCE_TOL,
        },
        "projections": {
            "rank_drops": projections.rank_drops(),
            "initial_rank": projections.ranks[0],
            "limit_rank": projections.limit_rank,
            "rank_nonincreasing": projections.rank_nonincreasing,
            "projections_nonincreasing": projections.projections_nonincreasing,
        },
        "consecutive": {
            "rows_checked": consecutive.rows.len(),
            "failures": consecutive.failures().count(),
            "b_nonincreasing": consecutive.b_nonincreasing.iter().all(|&b| b),
            "max_identity_residual": max_identity,
            "slack": consecutive.slack,
        },
        "chain_violations": violations.len(),
        "verdicts": verdicts,
        "status": status,
    });
    out.json("summary.json", &summary)?;
    Ok(code)
}

fn cmd_gap(
    spec_path: &Path,
    horizon: Option<usize>,
    grid: &[f64],
    epsilon: f64,
    seed: u64,
    tol: &Tolerances,
    out: &Output,
) -> CliResult<i32> {
    if !(epsilon > 0.0) {
        return Err(usage("--epsilon must be positive"));
    }
    let chain = load_chain(spec_path, tol)?;
    let horizon = resolve_horizon(&chain, horizon)?;
    let outcome = match certificate_search(&chain, horizon, grid, tol) {
        Ok(outcome) => outcome,
        Err(GapError::InvalidGrid(msg)) => return Err(usage(format!("--grid: {msg}"))),
        Err(e @ GapError::RankDescent { .. }) => {
            out.json(
                "certificate.json",
                &json!({ "outcome": "error", "error": e.to_string() }),
            )?;
            return Ok(EXIT_FAILURE);
        }
        Err(e) => return Err(internal(e)),
    };
    out.json("certificate.json", &outcome)?;
    let SearchOutcome::Certified(cert) = outcome else {
        return Ok(EXIT_NO_CERTIFICATE);
    };

    let chain = chain.truncated(horizon);
    let limit = limit_operator(&chain).map_err(internal)?;
    let p = fixed_point_projection(&limit.operator, tol).map_err(internal)?;
    let mut reports = Vec::new();
    let mut failed = false;
    for probe in default_probes(&p, seed) {
        match rate_bound_check(
            &chain,
            &cert,
            &probe.vector,
            epsilon,
            RateOptions::default(),
            tol,
        ) {
            Ok(table) => {
                out.write_with(&format!("rate_{}.csv", probe.id), |w| table.write_csv(w))?;
                failed |= !table.bound_holds();
                let min_slack = table
                    .rows
                    .iter()
                    .map(|r| r.slack)
                    .fold(f64::INFINITY, f64::min);
                reports.push(json!({
                    "probe": probe.id,
                    "n0": table.n0,
                    "steps": table.rows.len(),
                    "eta_prime_norm": table.eta_prime_norm,
                    "min_slack": min_slack,
                    "fitted_log_slope": table.fitted_log_slope,
                    "log_one_minus_delta": table.log_one_minus_delta,
                    "bound_holds": table.bound_holds(),
                }));
            }
            Err(e) => reports.push(json!({ "probe": probe.id, "error": e.to_string() })),
        }
    }
    let (code, status) = status_code(failed, !limit.provenance.conclusive());
    out.json(
        "rate.json",
        &json!({
            "epsilon": epsilon,
            "limit": limit.provenance,
            "probes": reports,
            "status": status,
        }),
    )?;
    Ok(code)
}

fn cmd_nonexample(nmax: usize, epsilon: f64, kmax: usize, out: &Output) -> CliResult<i32> {
    if nmax < 2 {
        return Err(usage(format!("--nmax must be at least 2, got {nmax}")));
    }
    if !(epsilon > 0.0) {
        return Err(usage("--epsilon must be positive"));
    }
    let seq = build_nonexample(nmax).map_err(|e| usage(e.to_string()))?;
    out.json("sequence.json", &seq.to_json())?;

    let distances = verify_step_distances(&seq);
    out.write_with("step_distances.csv", |w| {
        writeln!(w, "m,row,kind,distance,expected,matches")?;
        for s in &distances.steps {
            let kind = match s.kind {
                StepKind::WithinRow => "within_row",
                StepKind::CrossRow => "cross_row",
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.m,
                s.row,
                kind,
                fmt_float(s.distance),
                fmt_float(s.expected),
                s.matches
            )?;
        }
        Ok(())
    })?;

    let tails = verify_tail_conditions(&seq, kmax);
    out.json("tails.json", &tails)?;

    let truncations: Vec<usize> = (2..=nmax).collect();
    let growth =
        verify_not_totally_bounded(&truncations, epsilon).map_err(|e| usage(e.to_string()))?;
    out.write_with("net_growth.csv", |w| growth.write_csv(w))?;

    let steps = givens_factorization(seq.vectors()).map_err(internal)?;
    let givens = verify_givens(seq.vectors(), &steps);
    out.json("givens.json", &givens_to_json(&steps))?;

    let net_ok =
        !growth.lower_bound_guaranteed || (growth.lower_bound_holds && growth.strictly_increasing);
    let failed = !(distances.within_row_holds()
        && givens.holds(RECONSTRUCTION_TOL)
        && tails.all_hold()
        && net_ok);
    let (code, status) = status_code(failed, false);
    let last = growth.rows.last().expect("nmax >= 2");
    out.json(
        "summary.json",
        &json!({
            "n_max": nmax,
            "ambient_dim": seq.ambient_dim(),
            "vectors": seq.len(),
            "step_distances": {
                "within_row_holds": distances.within_row_holds(),
                "within_row_max_deviation": distances.max_deviation(StepKind::WithinRow),
                "cross_row_holds": distances.cross_row_holds(),
                "cross_row_max_deviation": distances.max_deviation(StepKind::CrossRow),
            },
            "tails": {
                "weak_null": tails.weak_null,
                "norms_nonincreasing": tails.norms_nonincreasing,
                "tails_bounded": tails.tails_bounded,
            },
            "net": {
                "epsilon": epsilon,
                "net_size": last.net_size,
                "lower_bound_guaranteed": growth.lower_bound_guaranteed,
                "lower_bound_holds": growth.lower_bound_holds,
                "strictly_increasing": growth.strictly_increasing,
            },
            "givens": givens,
            "status": status,
        }),
    )?;
    Ok(code)
}

#[derive(Debug, Clone, Serialize)]
struct PropertyVerdict {
    name: &'static str,
    cases: usize,
    failures: usize,
    /// Cases excluded from the verdict (ambiguous residuals, inconclusive limits).
    skipped: usize,
    pass: bool,
}

impl PropertyVerdict {
    fn new(name: &'static str, cases: usize, failures: usize, skipped: usize) -> Self {
        Self {
            name,
            cases,
            failures,
            skipped,
            pass: failures == 0,
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct ChainOutcome {
    ordered: bool,
    ab_chain: bool,
    adjoint_converged: bool,
    opnorm_converged: bool,
    conclusive: bool,
}

fn check_chain(
    chain: &ContractionChain,
    horizon: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ChainOutcome, String> {
    let ordered = chain.validate(tol).map_err(|e| e.to_string())?.is_empty();
    let limit = limit_operator(chain).map_err(|e| e.to_string())?;
    let p = fixed_point_projection(&limit.operator, tol).map_err(|e| e.to_string())?;
    let probes = default_probes(&p, seed);
    let trace = iterate_products(chain, &probes, horizon, tol).map_err(|e| e.to_string())?;
    let consecutive = consecutive_difference_report(&trace);
    Ok(ChainOutcome {
        ordered,
        ab_chain: consecutive.all_pass(),
        adjoint_converged: trace
            .final_rows()
            .iter()
            .all(|r| r.adj_err < CONVERGENCE_TOL),
        opnorm_converged: *trace.opnorm_err.last().expect("positive horizon") < CONVERGENCE_TOL,
        conclusive: limit.provenance.conclusive(),
    })
}

fn cmd_verify(
    seeds: usize,
    dims: &[usize],
    horizon: Option<usize>,
    extra_chain: Option<&Path>,
    seed: u64,
    tol: &Tolerances,
    out: &Output,
) -> CliResult<i32> {
    if seeds == 0 {
        return Err(usage(
            "--seeds must be positive (the corpus would be empty)",
        ));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(usage("--dims must list positive dimensions"));
    }
    if horizon == Some(0) {
        return Err(usage("--horizon must be positive"));
    }
    let mut chains: Vec<(String, ContractionChain)> = Vec::new();
    if let Some(path) = extra_chain {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let chain =
            chain_from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        chains.push((path.display().to_string(), chain));
    }
    let specs = corpus_specs(dims, seeds, seed);
    let built: Vec<(String, ContractionChain)> = specs
        .par_iter()
        .map(|spec| {
            let spec = match horizon {
                Some(h) => spec.clone().with_horizon(h),
                None => spec.clone(),
            };
            let label = format!(
                "{}/d{}/{}",
                spec.kind().name(),
                spec.dim,
                spec.seed.unwrap_or_default()
            );
            spec.build(tol).map(|c| (label, c)).map_err(internal)
        })
        .collect::<CliResult<_>>()?;
    chains.extend(built);

    let outcomes: Vec<(String, Result<ChainOutcome, String>)> = chains
        .par_iter()
        .map(|(label, chain)| {
            (
                label.clone(),
                check_chain(chain, chain.horizon(), seed, tol),
            )
        })
        .collect();
    let errors: Vec<Value> = outcomes
        .iter()
        .filter_map(|(label, r)| {
            r.as_ref()
                .err()
                .map(|e| json!({ "chain": label, "error": e }))
        })
        .collect();
    let ok: Vec<(&String, ChainOutcome)> = outcomes
        .iter()
        .filter_map(|(l, r)| r.as_ref().ok().map(|o| (l, *o)))
        .collect();
    let failing = |f: fn(&ChainOutcome) -> bool| ok.iter().filter(|(_, o)| !f(o)).count();
    let conclusive = ok.iter().filter(|(_, o)| o.conclusive).count();
    let opnorm_failures = ok
        .iter()
        .filter(|(_, o)| o.conclusive && !o.opnorm_converged)
        .count();

    let scale = seeds * dims.len();
    let pairs = fixed_vector_pairs(20 * scale, dims, seed);
    let fixed_results: Vec<_> = pairs
        .par_iter()
        .map(|(t, xi)| check_fixed_vector_equivalence(t, xi, tol))
        .collect::<Result<_, _>>()
        .map_err(internal)?;
    let ambiguous = fixed_results.iter().filter(|r| r.ambiguous).count();
    let disagreements = fixed_results
        .iter()
        .filter(|r| !r.ambiguous && !r.agree())
        .count();

    let ordered_pairs = schur_pairs(10 * scale, dims, derive_seed(seed, 1 << 48));
    let monotone_failures = ordered_pairs
        .par_iter()
        .map(|(tp, t)| check_projection_monotone(tp, t, tol).unwrap_or(false))
        .filter(|ok| !ok)
        .count();

    let triples = rank_descent_triples(10 * scale, dims, derive_seed(seed, 2 << 48));
    let descent_failures = triples
        .par_iter()
        .map(|(t, tp, delta)| rank_strict_descent_check(t, tp, *delta, tol).unwrap_or(false))
        .filter(|ok| !ok)
        .count();

    let n_chains = outcomes.len();
    let properties = vec![
        PropertyVerdict::new(
            "chain_invariants",
            n_chains,
            failing(|o| o.ordered) + errors.len(),
            0,
        ),
        PropertyVerdict::new(
            "fixed_vector_equivalence",
            pairs.len(),
            disagreements,
            ambiguous,
        ),
        PropertyVerdict::new(
            "projection_monotone",
            ordered_pairs.len(),
            monotone_failures,
            0,
        ),
        PropertyVerdict::new("ab_chain", ok.len(), failing(|o| o.ab_chain), 0),
        PropertyVerdict::new("rank_descent", triples.len(), descent_failures, 0),
        PropertyVerdict::new(
            "adjoint_convergence",
            ok.len(),
            failing(|o| o.adjoint_converged),
            0,
        ),
        PropertyVerdict::new(
            "norm_convergence",
            ok.len(),
            opnorm_failures,
            ok.len() - conclusive,
        ),
    ];
    let failed_chains: Vec<Value> = ok
        .iter()
        .filter(|(_, o)| {
            !(o.ordered
                && o.ab_chain
                && o.adjoint_converged
                && (!o.conclusive || o.opnorm_converged))
        })
        .map(|(label, o)| {
            json!({
                "chain": label,
                "ordered": o.ordered,
                "ab_chain": o.ab_chain,
                "adjoint_converged": o.adjoint_converged,
                "opnorm_converged": o.opnorm_converged,
            })
        })
        .collect();
    let failed = properties.iter().any(|p| !p.pass);
    let (code, status) = status_code(failed, false);
    out.json(
        "verify.json",
        &json!({
            "seeds": seeds,
            "dims": dims,
            "base_seed": seed,
            "horizon": horizon,
            "properties": properties,
            "failed_chains": failed_chains,
            "errors": errors,
            "status": status,
        }),
    )?;
    Ok(code)
}
