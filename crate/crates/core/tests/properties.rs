use cel_core::canonical::{apply_td, canonical_image, gram_delta, sphere_metrics, CHECK_TOL};
use cel_core::embed::{schoenberg_test, PointConfiguration};
use cel_core::gauge::wd_distance;
use cel_core::metric::{lipschitz_constants, validate_metric, ValidationMode};
use cel_core::random::{corpus, random_space};
use cel_core::separation::{canonical_constants, separation_profile, verify_certificate};
use cel_core::MetricMeasureSpace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space_from(seed: u64, n: usize) -> MetricMeasureSpace {
    random_space(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn td_of_canonical_image_is_the_kernel(seed in any::<u64>(), n in 2usize..16) {
        let s = space_from(seed, n);
        let gram = gram_delta(&s).gram;
        let image = canonical_image(&s);
        for x in 0..n {
            prop_assert_eq!(apply_td(&s, image.values.row(x)).unwrap(), gram.row(x).to_vec());
        }
    }

    #[test]
    fn sphere_sandwich_holds(seed in any::<u64>(), n in 3usize..16) {
        let m = sphere_metrics(&space_from(seed, n)).unwrap();
        prop_assert!(m.sandwich.holds, "{:?}", m.sandwich);
    }

    #[test]
    fn canonical_lower_constant_is_scale_invariant(seed in any::<u64>(), n in 2usize..12, c in 0.1f64..10.0) {
        let s = space_from(seed, n);
        let a = canonical_constants(&s).unwrap().iota_d.lower;
        let b = canonical_constants(&s.scaled(c).unwrap()).unwrap().iota_d.lower;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn best_certificate_verifies(seed in any::<u64>(), n in 2usize..14) {
        let s = space_from(seed, n);
        let profile = separation_profile(&s).unwrap();
        let cert = profile.best.certificate();
        prop_assert!(verify_certificate(s.distances(), s.weights(), &cert).is_ok());
        // the certified mass can only drop as ε grows
        prop_assert!(profile.breakpoints.windows(2).all(|w| w[0].epsilon < w[1].epsilon && w[0].c >= w[1].c));
    }

    #[test]
    fn wd_vanishes_on_the_diagonal_and_is_symmetric(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_space(n, &mut rng);
        let b = cel_core::random::random_metric(n, &mut rng);
        let d = a.distances();
        prop_assert_eq!(wd_distance(d, d, d).unwrap().value, 0.0);
        prop_assert_eq!(wd_distance(d, d, &b).unwrap().value, wd_distance(d, &b, d).unwrap().value);
    }

    #[test]
    fn euclidean_configurations_pass_classical_scaling(
        pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 3..12)
    ) {
        let cfg = PointConfiguration::raw(pts).unwrap();
        let d = cel_core::MetricMatrix::new(cfg.distances()).unwrap();
        let spectrum = schoenberg_test(&d);
        prop_assert!(spectrum.embeddable, "{:?}", spectrum.eigenvalues);
        prop_assert!(spectrum.min_dimension <= 3);
    }
}

#[test]
fn corpus_spaces_are_metrics() {
    for s in corpus(100, 3, 30, 1) {
        assert!(validate_metric(s.distances(), ValidationMode::Exhaustive).passed);
    }
}

#[test]
fn normalized_corpus_satisfies_the_contraction_bound() {
    for s in corpus(100, 3, 30, 2) {
        let m = sphere_metrics(&s.normalized()).unwrap();
        assert!(m.sandwich.rho_le_d_margin >= -CHECK_TOL, "{:?}", m.sandwich);
    }
}

#[test]
fn sufficient_condition_implies_canonical_inequality() {
    let mut guaranteed = 0;
    for s in corpus(100, 3, 30, 3).into_iter().map(|s| s.normalized()) {
        let c = canonical_constants(&s).unwrap();
        if c.remark8_guaranteed {
            guaranteed += 1;
            assert!(c.remark8_ok);
        }
    }
    assert!(guaranteed > 0);
}

#[test]
fn canonical_map_is_one_to_one() {
    for s in corpus(30, 2, 20, 4) {
        let rho = cel_core::canonical::canonical_metric(&s);
        let r = lipschitz_constants(s.distances().matrix(), rho.matrix()).unwrap();
        assert!(r.lower > 0.0);
    }
}
