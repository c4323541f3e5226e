//! Cross-module checks: the corridor recurrence against the billiard, the
//! expansion bookkeeping against the cells, and determinism of the
//! parallel estimators.

use flatbill::corridor;
use flatbill::exponents;
use flatbill::hyperbolicity::{expansion_product, DEFAULT_FRONT_CURVATURE};
use flatbill::statistics::cells::{locate_cells, CellScanConfig, CellType};
use flatbill::statistics::correlations::{correlations, CorrelationConfig, Observable};
use flatbill::{build_table, Billiard, Exec, FlatFamilyParams, WindowSpec};
use proptest::prelude::*;

fn billiard(beta: f64) -> Billiard {
    let table = build_table(FlatFamilyParams::new(beta)).unwrap();
    let window = WindowSpec::new(&table, 0.5).unwrap();
    Billiard::new(table, window)
}

#[test]
fn corridor_orbit_matches_billiard() {
    for beta in [3.0, 4.0, 6.0] {
        let w_star = corridor::locate_stable_manifold(beta, 0.5, 1_000_000).unwrap();
        let err = flatbill::verify::corridor_equivalence(beta, 0.5, w_star).unwrap();
        assert!(err < 1e-9, "beta {beta}: {err}");
    }
}

#[test]
fn cell_heights_follow_predicted_exponent() {
    let b = billiard(6.0);
    let scan = locate_cells(
        &b,
        &CellScanConfig {
            n_top: 60,
            ..Default::default()
        },
        Exec::Parallel,
    )
    .unwrap();
    for t in [CellType::Prime, CellType::Dprime] {
        let fit = scan.height_fit(t, (10, 60)).unwrap();
        assert!(
            (fit.exponent + exponents::b(6.0)).abs() < 0.4,
            "{t:?}: {}",
            fit.exponent
        );
    }
}

#[test]
fn correlations_are_mode_independent() {
    let b = billiard(4.0);
    let mut cfg = CorrelationConfig::new(40_000, Observable::FreePath, Observable::CosPhi, 9);
    cfg.chunks = 8;
    cfg.burn_in = 100;
    cfg.max_lag = 10;
    let s = correlations(&b, &cfg, Exec::Sequential).unwrap();
    let p = correlations(&b, &cfg, Exec::Parallel).unwrap();
    assert_eq!(s.values, p.values);
    assert_eq!(s.standard_errors, p.standard_errors);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Dispersing walls only expand: every partial product is at least one.
    #[test]
    fn expansion_is_at_least_one(seed in any::<u64>(), beta in prop::sample::select(vec![3.0, 4.0, 6.0])) {
        use rand::SeedableRng;
        let b = billiard(beta);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c = b.sample_outside_window(&mut rng);
        if let Ok(exc) = b.excursion(&c, 2000) {
            if let Ok(e) = expansion_product(&exc.records, DEFAULT_FRONT_CURVATURE, exc.n_prime) {
                prop_assert!(e.log_lambda_1 >= -1e-12);
                prop_assert!(e.log_lambda_2 >= -1e-12);
                prop_assert!((e.log_lambda_total - e.log_lambda_1 - e.log_lambda_2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn exponent_relations(beta in 2.05f64..20.0) {
        prop_assert!((exponents::b(beta) - exponents::a(beta) - 2.0).abs() < 1e-9);
        prop_assert!((exponents::tail(beta) + exponents::a(beta) + 1.0).abs() < 1e-12);
        prop_assert!(
            (exponents::first_half_expansion(beta) + exponents::second_half_expansion(beta)
                - exponents::b(beta)).abs() < 1e-9
        );
    }
}
