use proptest::prelude::*;
use teamalloc::alloc::CandidateId;
use teamalloc::cost::{
    availability_cost, calibrate_gains, distance_cost, AvailabilityMode, BusyState, DistanceGains, DistanceRole,
    NegotiationCounts, Outcome, PreferenceLedger,
};

fn remaining(alpha: f64, nominal: f64, elapsed: f64) -> f64 {
    availability_cost(alpha, Some(BusyState { nominal, elapsed }), AvailabilityMode::RemainingTime)
}

proptest! {
    #[test]
    fn remaining_time_availability_decays_continuously(
        alpha in 1.0f64..100.0,
        nominal in 0.5f64..100.0,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let (t0, t1) = (a.min(b) * nominal, a.max(b) * nominal);
        let (x0, x1) = (remaining(alpha, nominal, t0), remaining(alpha, nominal, t1));
        prop_assert!(x1 <= x0);
        // Lipschitz with constant α/T.
        prop_assert!(x0 - x1 <= alpha / nominal * (t1 - t0) + 1e-9);
        prop_assert!((0.0..=alpha).contains(&x0));
    }

    #[test]
    fn preference_moves_with_outcomes(
        gain in 1.0f64..100.0,
        history in prop::collection::vec(any::<bool>(), 0..20),
        next in any::<bool>(),
    ) {
        let mut ledger = PreferenceLedger::new();
        let (c, a) = (CandidateId(0), 0);
        for rejected in history {
            ledger.record(c, a, if rejected { Outcome::Rejected } else { Outcome::Accepted });
        }
        let before = ledger.cost(c, a, gain);
        let outcome = if next { Outcome::Rejected } else { Outcome::Accepted };
        let counts = ledger.record(c, a, outcome);
        let after = ledger.cost(c, a, gain);
        prop_assert!(counts.negations <= counts.negotiations);
        prop_assert!((0.0..=gain).contains(&after));
        if next {
            prop_assert!(after >= before);
        } else {
            prop_assert!(after <= before);
        }
        prop_assert_eq!(ledger.counts(CandidateId(1), a), NegotiationCounts::default());
    }

    #[test]
    fn calibrated_terms_share_one_range(
        rows in prop::collection::vec(prop::collection::vec(prop::option::of(1u32..60), 1..6), 1..4),
    ) {
        let rows: Vec<Vec<Option<f64>>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|c| c.map(f64::from)).collect())
            .collect();
        let names: Vec<String> = (0..rows.len()).map(|i| format!("w{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let gains = calibrate_gains(&names, &rows);
        if rows.iter().any(|r| r.iter().all(Option::is_none)) {
            prop_assert!(gains.is_err());
            return Ok(());
        }
        for (row, gain) in rows.iter().zip(gains.unwrap()) {
            let max = row.iter().flatten().copied().fold(f64::MIN, f64::max);
            let always_rejected = NegotiationCounts { negations: 3, negotiations: 3 }.cost(gain);
            prop_assert_eq!(gain, max);
            prop_assert_eq!(remaining(gain, 10.0, 0.0), max);
            prop_assert_eq!(always_rejected, max);
        }
    }

    #[test]
    fn distance_cost_steers(c_init in 1.0f64..50.0, d0 in 0.0f64..5.0, step in 1e-3f64..5.0) {
        let gains = DistanceGains::default();
        let robot = |d| distance_cost(c_init, DistanceRole::Robot { human_to_action: d }, gains);
        let collab = |d| distance_cost(c_init, DistanceRole::Collaboration { human_to_robot: d }, gains);
        prop_assert!(robot(d0) > robot(d0 + step));
        prop_assert!(collab(d0) < collab(d0 + step));
        prop_assert_eq!(distance_cost(c_init, DistanceRole::Human, gains), c_init);
    }
}
