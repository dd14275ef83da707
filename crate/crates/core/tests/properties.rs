use proptest::prelude::*;

use contraction_lab::chain::{gap_engineered_chain, ChainKind};
use contraction_lab::corpus::{corpus_spec, corpus_specs, fixed_vector_pairs, schur_pairs};
use contraction_lab::gap::{
    certificate_search, rate_bound_check, RateOptions, SearchOutcome, DEFAULT_DELTA_GRID,
};
use contraction_lab::operator::{
    check_fixed_vector_equivalence, fixed_point_projection, is_positive_contraction, loewner_leq,
    operator_norm, spectral_projection, Interval,
};
use contraction_lab::product::{
    consecutive_difference_report, default_probes, iterate_products, limit_operator,
};
use contraction_lab::random::{random_positive_contraction, random_unit_vector, rng_from_seed};
use contraction_lab::{Operator, Tolerances};

fn tol() -> Tolerances {
    Tolerances::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_vector_conditions_agree(seed in any::<u64>()) {
        for (t, xi) in fixed_vector_pairs(6, &[2, 3, 5], seed) {
            let report = check_fixed_vector_equivalence(&t, &xi, &tol()).unwrap();
            if !report.ambiguous {
                prop_assert!(report.agree(), "{report:?}");
            }
        }
    }

    #[test]
    fn fixed_projection_keeps_exactly_the_fixed_eigenvectors(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = rng_from_seed(seed);
        let t = random_positive_contraction(dim, &mut rng);
        let ones = (seed % (dim as u64 + 1)) as usize;
        let decomposition = t.decompose().unwrap();
        // Lift the top `ones` eigenvalues to exactly 1.
        let values: Vec<f64> = decomposition
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &x)| if k + ones >= dim { 1.0 } else { x.min(0.99) })
            .collect();
        let t = Operator::diagonal(&values).unwrap().conjugate_by(&decomposition.eigenvectors).unwrap();
        let p = spectral_projection(&t, Interval::point(1.0), &tol()).unwrap();
        for k in 0..dim {
            let v = decomposition.eigenvectors.column(k).into_owned();
            let fixed_by_t = (t.apply(&v) - &v).norm() <= 1e-8;
            let fixed_by_p = (p.apply(&v) - &v).norm() <= 1e-8;
            prop_assert_eq!(fixed_by_t, fixed_by_p);
        }
    }

    #[test]
    fn loewner_is_a_partial_order(seed in any::<u64>()) {
        let pairs = schur_pairs(2, &[3], seed);
        let (b, a) = &pairs[0];
        prop_assert!(loewner_leq(a, a, &tol()).unwrap().holds);
        // c <= b by a second decrement of b.
        let d = random_positive_contraction(3, &mut rng_from_seed(seed ^ 1));
        let root = b.sqrt(tol().psd(3)).unwrap();
        let rest = Operator::new(nalgebra::DMatrix::identity(3, 3) - d.matrix()).unwrap();
        let c = root.sandwich(&rest).unwrap();
        prop_assert!(loewner_leq(&c, b, &tol()).unwrap().holds);
        prop_assert!(loewner_leq(b, a, &tol()).unwrap().holds);
        prop_assert!(loewner_leq(&c, a, &tol()).unwrap().holds);
        if loewner_leq(a, b, &tol()).unwrap().holds {
            prop_assert!(operator_norm(&(a.matrix() - b.matrix())) <= 1e-8);
        }
    }

    #[test]
    fn decomposition_reconstructs(seed in any::<u64>(), dim in 1usize..9) {
        let a = random_positive_contraction(dim, &mut rng_from_seed(seed));
        let d = a.decompose().unwrap();
        prop_assert!(operator_norm(&(d.reconstruct().matrix() - a.matrix())) <= 1e-12);
        prop_assert!(d.orthonormality_defect() <= 1e-12);
    }

    #[test]
    fn gap_is_monotone_in_delta(seed in any::<u64>(), dim in 1usize..6) {
        let t = random_positive_contraction(dim, &mut rng_from_seed(seed));
        let grid = DEFAULT_DELTA_GRID;
        let gaps: Vec<bool> = grid
            .iter()
            .map(|&d| contraction_lab::gap::has_gap_at(&t, d, &tol()).unwrap())
            .collect();
        // grid is descending, so once a gap appears it persists.
        prop_assert!(gaps.windows(2).all(|w| !w[0] || w[1]));
    }

    #[test]
    fn gap_engineered_certifies_engineered_delta(seed in any::<u64>(), k in 0usize..3, dim in 2usize..6) {
        let delta = [0.05, 0.1, 0.2][k];
        let chain = gap_engineered_chain(dim, delta, 1, 40, seed).unwrap();
        match certificate_search(&chain, 40, &DEFAULT_DELTA_GRID, &tol()).unwrap() {
            SearchOutcome::Certified(cert) => {
                prop_assert!(cert.delta >= delta);
                prop_assert_eq!(cert.start, 1);
            }
            SearchOutcome::Exhausted(f) => prop_assert!(false, "{f:?}"),
        }
    }
}

#[test]
fn generated_chains_are_ordered_contractions() {
    let tol = tol();
    for spec in corpus_specs(&[2, 3, 5], 10, 11) {
        let chain = spec.clone().with_horizon(40).build(&tol).unwrap();
        for n in 1..=chain.horizon() {
            let t = chain.operator_at(n).unwrap();
            assert!(
                is_positive_contraction(t, &tol).unwrap().holds,
                "{:?} n={n}",
                spec.kind()
            );
            if n < chain.horizon() {
                let next = chain.operator_at(n + 1).unwrap();
                assert!(
                    loewner_leq(next, t, &tol).unwrap().holds,
                    "{:?} n={n}",
                    spec.kind()
                );
            }
        }
        let mut previous = fixed_point_projection(chain.operator_at(1).unwrap(), &tol).unwrap();
        for n in 2..=chain.horizon() {
            let p = fixed_point_projection(chain.operator_at(n).unwrap(), &tol).unwrap();
            assert!(
                loewner_leq(&p.operator, &previous.operator, &tol)
                    .unwrap()
                    .holds
            );
            previous = p;
        }
    }
}

#[test]
fn materialization_is_deterministic() {
    let tol = tol();
    for kind in ChainKind::GENERATED {
        let spec = corpus_spec(kind, 4, 99).with_horizon(25);
        let a = spec.build(&tol).unwrap();
        let b = spec.build(&tol).unwrap();
        assert!(a
            .operators()
            .iter()
            .zip(b.operators())
            .all(|(x, y)| x.matrix() == y.matrix()));
    }
}

#[test]
fn products_converge_on_calibrated_horizons() {
    let tol = tol();
    for spec in corpus_specs(&[3, 6], 3, 5) {
        let chain = spec.build(&tol).unwrap();
        let limit = limit_operator(&chain).unwrap();
        let p = fixed_point_projection(&limit.operator, &tol).unwrap();
        let probes = default_probes(&p, 3);
        let trace = iterate_products(&chain, &probes, chain.horizon(), &tol).unwrap();
        let label = format!("{:?} d={}", spec.kind(), spec.dim);
        assert!(trace.max_product_norm <= 1.0 + tol.psd(spec.dim), "{label}");
        for r in trace.final_rows() {
            assert!(
                r.wot_err < 1e-6 && r.adj_err < 1e-6 && r.sot_err < 1e-6,
                "{label}"
            );
        }
        let h = chain.horizon();
        for k in 0..probes.len() {
            assert!(trace.row(h - 1, k).consec_diff.unwrap() < 1e-6, "{label}");
        }
        let report = consecutive_difference_report(&trace);
        assert!(report.all_pass(), "{label}");
    }
}

#[test]
fn rate_bound_holds_on_certified_corpus_chains() {
    let tol = tol();
    let mut certified = 0;
    for spec in corpus_specs(&[2, 4], 4, 21) {
        let chain = spec.clone().with_horizon(120).build(&tol).unwrap();
        let Ok(SearchOutcome::Certified(cert)) =
            certificate_search(&chain, 120, &DEFAULT_DELTA_GRID, &tol)
        else {
            continue;
        };
        certified += 1;
        let mut rng = rng_from_seed(spec.seed.unwrap());
        for _ in 0..3 {
            let xi = random_unit_vector(spec.dim, &mut rng);
            match rate_bound_check(&chain, &cert, &xi, 1e-6, RateOptions::default(), &tol) {
                Ok(table) => assert!(table.bound_holds(), "{:?}", spec.kind()),
                Err(contraction_lab::gap::GapError::NoStartIndex { .. }) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
    assert!(certified > 10);
}
