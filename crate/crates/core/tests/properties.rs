mod common;

use proptest::prelude::*;

use sleepguard::config::validate_str;
use sleepguard::detection::WindowCounter;
use sleepguard::energy::{depletion_tick, CostTable, Energy, PowerMode, SleepSchedule};
use sleepguard::engine::EventQueue;
use sleepguard::replay::verify;
use sleepguard::sim::run;
use sleepguard::topology::{build_graph, NodeId, Position};
use sleepguard::trace::Entry;

use common::{energy_books, leaks_after_isolation, seeded};

fn costs() -> CostTable {
    CostTable {
        transmit: Energy::from_units(0.02),
        receive: Energy::from_units(0.01),
        sense: Energy::from_units(0.005),
        idle_listen: Energy::from_units(0.01),
        sleep: Energy::from_units(0.0005),
        detection: Energy::from_units(0.002),
    }
}

fn schedule() -> impl Strategy<Value = SleepSchedule> {
    (2u64..40).prop_flat_map(|p| (Just(p), 0..p)).prop_flat_map(|(p, o)| (Just(p), Just(o), 1..=p - o)).prop_map(|(p, o, l)| SleepSchedule::new(p, o, l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_is_symmetric_and_matches_distance(
        pts in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0), 1..30),
        radius in 1.0f64..30.0,
    ) {
        let positions: Vec<Position> = pts.iter().map(|&(x, y)| Position::new(x, y)).collect();
        let graph = build_graph(&positions, radius).unwrap();
        for i in 0..positions.len() {
            for j in 0..positions.len() {
                let (a, b) = (NodeId(i as u32), NodeId(j as u32));
                let adj = graph.is_adjacent(a, b);
                prop_assert_eq!(adj, graph.is_adjacent(b, a));
                prop_assert_eq!(adj, i != j && positions[i].distance(&positions[j]) <= radius);
            }
        }
    }

    #[test]
    fn window_counter_matches_recount(
        gaps in prop::collection::vec(0u64..6, 1..60),
        window in 1u64..25,
    ) {
        let mut wc = WindowCounter::new(window);
        let (obs, src) = (NodeId(0), NodeId(1));
        let mut t = 0;
        let mut seen = Vec::new();
        for g in gaps {
            t += g;
            seen.push(t);
            let got = wc.record(obs, src, t);
            let want = seen.iter().filter(|&&s| s + window > t).count() as u32;
            prop_assert_eq!(got, want);
            prop_assert_eq!(wc.count(obs, src, t), want);
        }
    }

    #[test]
    fn awake_ticks_matches_enumeration(s in schedule(), from in 0u64..200, len in 0u64..200) {
        let to = from + len;
        let want = (from..to).filter(|&t| s.is_awake(t)).count() as u64;
        prop_assert_eq!(s.awake_ticks(from, to), want);
    }

    #[test]
    fn depletion_tick_is_first_exhausting_tick(s in schedule(), residual in 1i64..2_000_000, from in 0u64..50) {
        let mode = PowerMode::Duty(s);
        let c = costs();
        let to = from + 5_000;
        let spent = |end: u64| (from..end).map(|t| if s.is_awake(t) { c.idle_listen } else { c.sleep }).sum::<Energy>();
        let r = Energy::from_micros(residual);
        match depletion_tick(&mode, &c, from, to, r) {
            Some(d) => {
                prop_assert!(spent(d) >= r);
                prop_assert!(d == from || spent(d - 1) < r);
            }
            None => prop_assert!(spent(to) < r),
        }
    }

    #[test]
    fn queue_pops_in_time_then_insertion_order(times in prop::collection::vec(0u64..50, 1..80)) {
        let mut q = EventQueue::new();
        for (i, &t) in times.iter().enumerate() {
            q.schedule(t, i).unwrap();
        }
        let mut want: Vec<(u64, usize)> = times.iter().copied().zip(0..).collect();
        want.sort();
        let got: Vec<(u64, usize)> = std::iter::from_fn(|| q.pop()).map(|d| (d.at, d.payload)).collect();
        prop_assert_eq!(got, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let mut config = seeded("oracle", seed);
        config.horizon = 300;
        prop_assert_eq!(run(&config).unwrap().to_text(), run(&config).unwrap().to_text());
    }

    #[test]
    fn config_round_trips(
        seed in any::<u64>(),
        horizon in 1u64..100_000,
        rate in 1u32..50,
        window in 1u64..100,
        margin in 0.05f64..1.0,
        corroboration in 1u32..10,
    ) {
        let mut config = seeded("blind_flood", seed);
        config.horizon = horizon;
        config.detection.rate_threshold = rate;
        config.detection.window = window;
        config.detection.margin = margin;
        config.detection.corroboration = corroboration;
        config.attacks[0].stop = config.attacks[0].stop.min(horizon).max(config.attacks[0].start + 1);
        let back = validate_str(&config.to_toml()).unwrap();
        prop_assert!(back.defaults.is_empty());
        prop_assert_eq!(back.config, config);
    }

    #[test]
    fn energy_is_conserved_and_replay_agrees(seed in any::<u64>()) {
        let mut config = seeded("blind_flood", seed);
        config.horizon = 800;
        let trace = run(&config).unwrap();
        for (node, (drained, logged)) in energy_books(&trace) {
            prop_assert_eq!(drained, logged, "{}", trace.name(node));
        }
        let report = verify(&trace);
        prop_assert!(report.is_clean(), "{}", report);
        prop_assert!(leaks_after_isolation(&trace).is_empty());
    }

    #[test]
    fn isolation_list_only_grows(seed in any::<u64>()) {
        let trace = run(&seeded("oracle", seed)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for r in &trace.records {
            if let Entry::Isolate { node, .. } = r.entry {
                prop_assert!(seen.insert(node));
            }
            if let Entry::Profile(p) = &r.entry {
                prop_assert!(!seen.contains(&p.node), "isolated node re-profiled");
            }
        }
    }
}
