//! Seeded test corpus shared by `verify` and the acceptance suite.

use num_complex::Complex64;
use rand::Rng;

use crate::chain::{ChainKind, ChainParams, ChainSpec, Curve};
use crate::operator::{Matrix, Operator, Vector};
use crate::random::{
    random_positive_contraction, random_unit_vector, random_unitary, rng_from_seed, LabRng,
};

/// Horizon at which every corpus chain of this kind has converged to well
/// below `1e-6` in operator norm.
pub fn calibrated_horizon(kind: ChainKind) -> usize {
    match kind {
        ChainKind::NearOneAccumulating => 500,
        _ => 300,
    }
}

/// SplitMix64 step, used to derive independent seeds from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_curve(rng: &mut LabRng) -> Curve {
    match rng.random_range(0..4) {
        0 => Curve::Const(rng.random_range(0.0..0.9)),
        1 => Curve::HarmonicTo(rng.random_range(0.0..0.8)),
        2 => Curve::Geometric(rng.random_range(0.1..0.9)),
        _ => {
            let limit = rng.random_range(0.0..0.8);
            Curve::ExpTo {
                limit,
                start: rng.random_range(limit..=1.0),
                rate: rng.random_range(0.2..0.9),
            }
        }
    }
}

/// Random curves with between 0 and `dim/2` coordinates fixed at 1.
pub fn random_curves(dim: usize, rng: &mut LabRng) -> Vec<Curve> {
    let fixed = rng.random_range(0..=dim / 2);
    (0..dim)
        .map(|k| {
            if k < fixed {
                Curve::Const(1.0)
            } else {
                random_curve(rng)
            }
        })
        .collect()
}

/// The corpus chain of a generated kind at `(dim, seed)`.
pub fn corpus_spec(kind: ChainKind, dim: usize, seed: u64) -> ChainSpec {
    let mut rng = rng_from_seed(seed);
    let params = match kind {
        ChainKind::Diagonal => ChainParams::Diagonal {
            curves: random_curves(dim, &mut rng),
        },
        ChainKind::ConjugatedDiagonal => ChainParams::ConjugatedDiagonal {
            curves: random_curves(dim, &mut rng),
        },
        ChainKind::SchurDecrement => ChainParams::SchurDecrement {
            fixed_rank: rng.random_range(0..=dim / 2),
            gap: 0.2,
            decay: 0.5,
        },
        ChainKind::GapEngineered => ChainParams::GapEngineered {
            delta: [0.05, 0.1, 0.2][rng.random_range(0..3)],
            fixed_rank: rng.random_range(0..=dim / 2),
        },
        ChainKind::NearOneAccumulating => ChainParams::NearOneAccumulating,
        ChainKind::External => panic!("external chains are not generated"),
    };
    ChainSpec {
        dim,
        horizon: calibrated_horizon(kind),
        seed: Some(derive_seed(seed, 1)),
        params,
    }
}

/// Every generated kind × `dims` × `seeds` seeds, in that nesting order.
pub fn corpus_specs(dims: &[usize], seeds: usize, base_seed: u64) -> Vec<ChainSpec> {
    let mut out = Vec::new();
    for (k, &kind) in ChainKind::GENERATED.iter().enumerate() {
        for &dim in dims {
            for s in 0..seeds {
                let stream = ((k as u64) << 40) | ((dim as u64) << 20) | s as u64;
                out.push(corpus_spec(kind, dim, derive_seed(base_seed, stream)));
            }
        }
    }
    out
}

fn with_fixed_space(dim: usize, rank: usize, rng: &mut LabRng) -> (Operator, Matrix) {
    let u = random_unitary(dim, rng);
    let spectrum: Vec<f64> = (0..dim)
        .map(|k| {
            if k < rank {
                1.0
            } else {
                rng.random_range(0.0..0.95)
            }
        })
        .collect();
    let t = Operator::diagonal(&spectrum)
        .expect("finite")
        .conjugate_by(&u)
        .expect("square");
    (t, u)
}

/// `(T, ξ)` pairs for the fixed-vector equivalence: `ξ` is an exact fixed
/// vector, a generic vector, or a fixed vector perturbed by `10^[-3,-1]`.
pub fn fixed_vector_pairs(count: usize, dims: &[usize], seed: u64) -> Vec<(Operator, Vector)> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|i| {
            let dim = dims[i % dims.len()];
            let rank = rng.random_range(0..=dim);
            let (t, u) = with_fixed_space(dim, rank, &mut rng);
            let fixed = |rng: &mut LabRng| -> Vector {
                let c = random_unit_vector(rank.max(1), rng);
                let mut v = Vector::zeros(dim);
                for k in 0..rank {
                    v += u.column(k) * c[k];
                }
                v
            };
            let xi = match (i % 3, rank) {
                (0, r) if r > 0 => fixed(&mut rng),
                (1, r) if r > 0 => {
                    let size = 10f64.powf(rng.random_range(-3.0..-1.0));
                    fixed(&mut rng) + random_unit_vector(dim, &mut rng) * Complex64::new(size, 0.0)
                }
                _ => random_unit_vector(dim, &mut rng),
            };
            (t, xi)
        })
        .collect()
}

/// Ordered pairs `(T', T)` with `T' = T^{1/2}(I − D)T^{1/2}`. Every other
/// decrement vanishes on the fixed space of `T`, so both rank-preserving and
/// rank-dropping pairs occur.
pub fn schur_pairs(count: usize, dims: &[usize], seed: u64) -> Vec<(Operator, Operator)> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|i| {
            let dim = dims[i % dims.len()];
            let rank = rng.random_range(0..=dim);
            let (t, u) = with_fixed_space(dim, rank, &mut rng);
            let mut d = random_positive_contraction(dim, &mut rng).into_matrix();
            if i % 2 == 0 {
                let mut complement = Matrix::identity(dim, dim);
                for k in 0..rank {
                    let v = u.column(k);
                    complement -= &v * v.adjoint();
                }
                d = &complement * d * &complement;
            }
            let root = t.sqrt(0.0).expect("positive");
            let rest = Operator::new(Matrix::identity(dim, dim) - d).expect("finite");
            let tp = root.sandwich(&rest).expect("square");
            (tp, t)
        })
        .collect()
}

/// `(T, T', δ)` with `T' <= T`, a gap of `T` at `δ`, and one fixed
/// direction of `T` pushed into `(1 − δ, 1)` for `T'`.
pub fn rank_descent_triples(
    count: usize,
    dims: &[usize],
    seed: u64,
) -> Vec<(Operator, Operator, f64)> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|i| {
            let dim = dims[i % dims.len()].max(2);
            let delta = [0.05, 0.1, 0.2, 0.5][rng.random_range(0..4)];
            let rank = rng.random_range(1..=dim);
            let mut spectrum: Vec<f64> = (0..dim)
                .map(|k| {
                    if k < rank {
                        1.0
                    } else {
                        rng.random_range(0.0..=1.0 - delta)
                    }
                })
                .collect();
            let u = random_unitary(dim, &mut rng);
            let t = Operator::diagonal(&spectrum)
                .expect("finite")
                .conjugate_by(&u)
                .expect("square");
            spectrum[rng.random_range(0..rank)] = 1.0 - delta * rng.random_range(0.1..0.9);
            let tp = Operator::diagonal(&spectrum)
                .expect("finite")
                .conjugate_by(&u)
                .expect("square");
            (t, tp, delta)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{
        fixed_point_projection, is_positive_contraction, loewner_leq, Tolerances,
    };

    #[test]
    fn specs_are_deterministic_and_buildable() {
        let tol = Tolerances::default();
        let a = corpus_specs(&[2, 3], 2, 9);
        let b = corpus_specs(&[2, 3], 2, 9);
        assert_eq!(a, b);
        assert_eq!(a.len(), ChainKind::GENERATED.len() * 4);
        for spec in &a {
            let chain = spec.clone().with_horizon(20).build(&tol).unwrap();
            assert!(
                chain.validate(&tol).unwrap().is_empty(),
                "{:?}",
                spec.kind()
            );
        }
    }

    #[test]
    fn schur_pairs_are_ordered() {
        let tol = Tolerances::default();
        for (tp, t) in schur_pairs(20, &[2, 5], 3) {
            assert!(loewner_leq(&tp, &t, &tol).unwrap().holds);
            assert!(is_positive_contraction(&tp, &tol).unwrap().holds);
        }
    }

    #[test]
    fn triples_drop_rank() {
        let tol = Tolerances::default();
        for (t, tp, _) in rank_descent_triples(10, &[3], 4) {
            let r = fixed_point_projection(&t, &tol).unwrap().rank;
            assert_eq!(fixed_point_projection(&tp, &tol).unwrap().rank, r - 1);
        }
    }
}
