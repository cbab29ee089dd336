use proptest::prelude::*;
use sgda_core::lowerbound::{build_instance, classify, membership_check, spectral_radius_closed, CaseId};
use sgda_core::optimizer::{initial_point, run};
use sgda_core::quadgame::{generate_game, GameGenConfig};
use sgda_core::sampling::{epoch_schedule, wr_prefix_variance_theory};
use sgda_core::{Algorithm, QuadraticGame, RunConfig, Scheme, StepSizes};

fn small_game(seed: u64) -> QuadraticGame {
    generate_game(&GameGenConfig {
        n: 12,
        d: 4,
        rank_deficiency: 1,
        seed,
        ..GameGenConfig::default()
    })
    .unwrap()
}

#[test]
fn game_file_round_trip_through_public_api() {
    let game = small_game(3);
    let text = game.serialize();
    let back = QuadraticGame::deserialize(&text).unwrap();
    assert_eq!(back.serialize(), text);
    let truncated: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
    let err = QuadraticGame::deserialize(&truncated).unwrap_err().to_string();
    assert!(err.contains("v[12]"), "{err}");
}

#[test]
fn shared_seeds_give_shared_schedules() {
    let game = small_game(4);
    let steps = StepSizes::new(1e-3, 1e-2).unwrap();
    let z0 = initial_point(4, 4, 9, 1.0);
    let digests = |alg| {
        let out = run(&game, &z0, &RunConfig::new(alg, Scheme::RR, 3, 5, steps, 77)).unwrap();
        out.diagnostics.iter().map(|d| d.schedule_digest).collect::<Vec<_>>()
    };
    assert_eq!(digests(Algorithm::SimSgda), digests(Algorithm::AltSgda));
    assert_eq!(digests(Algorithm::SimSgda), digests(Algorithm::Agda));
}

#[test]
fn regime_example_rows() {
    let (l, mu1, mu2) = (1.0, 0.1, 0.1);
    let inst = build_instance(CaseId::Three, l, mu1, mu2, l / mu2, 2.0).unwrap();
    assert_eq!(inst.case.predicted_rate(), "Omega(kappa1 r log(1/eps))");
    let one = build_instance(CaseId::One, l, mu1, mu2, 2.0, 2.0).unwrap();
    let th = spectral_radius_closed(&one, 1.0).unwrap().threshold;
    assert!(spectral_radius_closed(&one, 1.01 * th).unwrap().spectral_radius > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_ratio_has_a_member_instance(
        mu1 in 0.01f64..1.0,
        mu2 in 0.01f64..1.0,
        log_r in -4.0f64..4.0,
    ) {
        let l = 1.0;
        let c = 2.0f64.min(l / mu1).min(l / mu2).max(1.0 + 1e-9);
        prop_assume!(c > 1.0 + 1e-6);
        let r = 10f64.powf(log_r);
        let cases = classify(l, mu1, mu2, r, c);
        prop_assert!(!cases.is_empty(), "r = {r} unclassified");
        for case in cases {
            let inst = build_instance(case, l, mu1, mu2, r, c);
            prop_assert!(inst.is_ok(), "{case}: {:?}", inst.err());
            prop_assert!(membership_check(&inst.unwrap()).unwrap().passed);
        }
    }

    #[test]
    fn schedules_partition_the_components(n in 1usize..40, b in 1usize..8, seed in any::<u64>(), epoch in 0u64..5) {
        prop_assume!(b <= n && n % b == 0);
        for scheme in [Scheme::RR, Scheme::NS, Scheme::WORB, Scheme::WR] {
            let s = epoch_schedule(scheme, n, b, seed, epoch).unwrap();
            prop_assert_eq!(s.q(), n / b);
            prop_assert!(s.batches.iter().all(|batch| batch.len() == b && batch.windows(2).all(|w| w[0] <= w[1])));
            if matches!(scheme, Scheme::RR | Scheme::NS) {
                let mut all: Vec<usize> = s.batches.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn prefix_variance_decreases_in_k(n in 2usize..60, tau2 in 0.1f64..10.0) {
        let mut last = f64::INFINITY;
        for k in 1..=n {
            let v = wr_prefix_variance_theory(n, 1, k, tau2).unwrap();
            prop_assert!(v >= 0.0 && v < last);
            last = v;
        }
        prop_assert_eq!(last, 0.0);
    }
}

#[test]
fn initial_points_are_reproducible() {
    let a = initial_point(5, 5, 42, 1.0);
    let b = initial_point(5, 5, 42, 1.0);
    assert_eq!(a, b);
    assert_ne!(a, initial_point(5, 5, 43, 1.0));
}
