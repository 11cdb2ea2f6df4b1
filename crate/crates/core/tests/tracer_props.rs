mod common;

use std::sync::Arc;

use common::RawTable;
use idtrace_core::{
    run_random_baseline, run_titf, Bits, Observation, ObservationSet, Session, Status, TargetFound,
    TraceOptions, TracePolicy,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn recommendation_is_argmax_of_direct_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let table = RawTable::random(&mut rng, 80, 6, 6, 0.05);
        let u = Arc::new(table.universe());
        let known = common::observed_subset(&mut rng, &table, 2);
        let session = Session::start(u.clone(), known.clone().try_into().unwrap()).unwrap();
        if session.status() != Status::Active {
            continue;
        }
        let base: Vec<usize> = session.candidates().iter().collect();
        let mut best: Option<(usize, f64)> = None;
        for attr in 0..6 {
            if known.iter().any(|o| o.attribute == attr) {
                continue;
            }
            if let Some(h) = table.category_entropy(&base, attr) {
                if best.is_none_or(|(_, b)| h > b + 1e-12) {
                    best = Some((attr, h));
                }
            }
        }
        let rec = session.recommend_next().unwrap();
        let (attr, h) = best.unwrap();
        // The sweep sums in hash order, so near-ties may differ in the last ulp.
        let chosen_h = table.category_entropy(&base, rec.chosen).unwrap();
        assert!(chosen_h >= h - 1e-12);
        assert!(rec.chosen == attr || (chosen_h - h).abs() < 1e-12);
        assert!((rec.ranking[0].bits.value() - h).abs() < 1e-9);
        assert!(rec.ranking.windows(2).all(|w| w[0].bits >= w[1].bits));
    }
}

#[test]
fn whatif_matches_acquisition() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..100 {
        let table = RawTable::random(&mut rng, 60, 5, 5, 0.0);
        let u = Arc::new(table.universe());
        let target = rng.gen_range(0..60);
        let mut session = Session::start(u.clone(), ObservationSet::new()).unwrap();
        while session.status() == Status::Active {
            let attr = session.recommend_next().unwrap().chosen;
            let preview = session.whatif(attr).unwrap();
            let value = table.rows[target][attr];
            let projected = preview.iter().find(|w| w.value == value).unwrap().count;
            let total: usize = preview.iter().map(|w| w.count).sum();
            assert_eq!(total, session.candidates().len());
            session.observe(Observation::new(attr, value)).unwrap();
            assert_eq!(session.candidates().len(), projected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn titf_trace_converges_and_replays(seed in any::<u64>(), literal in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = RawTable::random(&mut rng, 40, 6, 4, 0.0);
        let u = Arc::new(table.universe());
        let target = rng.gen_range(0..40);
        let options = TraceOptions {
            policy: TracePolicy { stop_on_zero_information: !literal },
            ..Default::default()
        };
        let r = run_titf(&u, target, ObservationSet::new(), &options).unwrap();
        prop_assert!(r.entropy_history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(r.acquisitions, r.path.len());
        prop_assert!(r.acquisitions <= 6);
        let identified = r.status == Status::Identified;
        prop_assert_eq!(identified, r.entropy_history.last() == Some(&Bits::ZERO));
        if identified {
            prop_assert_eq!(&r.target_found, &TargetFound::Identified { object: target });
        } else {
            prop_assert_eq!(r.status, Status::Ambiguous);
        }

        let replayed = Session::replay(u.clone(), ObservationSet::new(), &r.path, options.policy).unwrap();
        prop_assert_eq!(replayed.status(), r.status);
        prop_assert_eq!(replayed.entropy_history(), r.entropy_history.as_slice());
    }

    #[test]
    fn random_baseline_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = RawTable::random(&mut rng, 30, 7, 3, 0.0);
        let u = Arc::new(table.universe());
        let target = rng.gen_range(0..30);
        let known = common::observed_subset(&mut rng, &RawTable { rows: vec![table.rows[target].clone()], k: table.k.clone() }, 3);
        let r = run_random_baseline(&u, target, known.clone().try_into().unwrap(), seed, &TraceOptions::default()).unwrap();
        prop_assert!(r.acquisitions <= 7 - known.len());
        let again = run_random_baseline(&u, target, known.try_into().unwrap(), seed, &TraceOptions::default()).unwrap();
        prop_assert_eq!(r.path, again.path);
    }
}
