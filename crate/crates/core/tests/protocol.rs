mod common;

use sleepguard::config::{validate_str, ScenarioConfig};
use sleepguard::detection::{Phase1Reason, Tag};
use sleepguard::energy::{Action, Energy};
use sleepguard::metrics::{compare, compute, MetricsError};
use sleepguard::protocol::PacketKind;
use sleepguard::replay::{verify, AuditKind};
use sleepguard::roles::Role;
use sleepguard::sim::{run, run_with_detection};
use sleepguard::trace::{Entry, RunTrace, SleepCause};

use common::{scenario, seeded};

fn node<'a>(config: &'a mut ScenarioConfig, id: &str) -> &'a mut sleepguard::config::NodeConfig {
    config.nodes.iter_mut().find(|n| n.id == id).unwrap()
}

fn winners(trace: &RunTrace, role: Role) -> Vec<(u64, String)> {
    trace
        .records
        .iter()
        .filter_map(|r| match &r.entry {
            Entry::Elect(e) if e.role == role => Some((r.tick, trace.name(e.winner).to_string())),
            _ => None,
        })
        .collect()
}

#[test]
fn fig4_metrics_report_one_true_positive() {
    let m = compute(&run(&scenario("fig4")).unwrap()).unwrap();
    assert_eq!(m.quality.true_positives, 1);
    assert_eq!(m.quality.false_positives, 0);
    assert_eq!(m.quality.false_negatives, 0);
    assert_eq!(m.quality.latency.get("A"), Some(&4));
    assert_eq!(m.nodes, 9);
}

#[test]
fn fig4_attacker_ignored_after_isolation() {
    let trace = run(&scenario("fig4")).unwrap();
    let a = trace.node_by_name("A").unwrap();
    let wakes = trace.records.iter().filter(|r| matches!(r.entry, Entry::Wake { node, .. } if node == a)).count();
    assert_eq!(wakes, 1);
    let ignored = trace
        .records
        .iter()
        .filter(|r| matches!(&r.entry, Entry::Drop { hop, .. } if hop.kind == PacketKind::FakeRequest && hop.to == a))
        .count();
    assert!(ignored >= 5, "{ignored}");
}

#[test]
fn isolated_sic_is_replaced_at_next_election() {
    let mut config = scenario("fig4");
    node(&mut config, "E").initial_energy = Some(45.0);
    node(&mut config, "F").initial_energy = Some(44.0);
    node(&mut config, "G").initial_energy = Some(40.0);
    node(&mut config, "H").initial_energy = Some(40.0);
    config.attacks[0].targets = vec!["E".into()];
    config.attacks[0].range = 20.0;
    let trace = run(&config).unwrap();
    let e = trace.node_by_name("E").unwrap();
    let iso = trace
        .records
        .iter()
        .find_map(|r| match r.entry {
            Entry::Isolate { node, .. } if node == e => Some(r.tick),
            _ => None,
        })
        .expect("E isolated");
    let sics = winners(&trace, Role::SectorInCharge);
    assert!(sics.iter().any(|(t, w)| *t == 0 && w == "E"));
    let later: Vec<_> = sics.iter().filter(|(t, _)| *t > iso).collect();
    assert!(!later.is_empty(), "no re-election after {iso}");
    assert!(later.iter().all(|(_, w)| w != "E"));
    assert!(trace.records.iter().any(|r| matches!(&r.entry, Entry::Note { what, .. } if what.contains("holder_lost:E:SIC"))));
    assert!(verify(&trace).is_clean());
}

#[test]
fn late_arrival_is_put_to_sleep_then_profiled() {
    let mut config = scenario("fig4");
    config.attacks.clear();
    node(&mut config, "D").arrive_at = Some(37);
    let trace = run(&config).unwrap();
    let d = trace.node_by_name("D").unwrap();
    let kinds: Vec<(u64, &str)> = trace
        .records
        .iter()
        .filter(|r| match &r.entry {
            Entry::Arrive { node } | Entry::Profile(sleepguard::trace::ProfileRecord { node, .. }) => *node == d,
            Entry::Sleep { node, cause } => *node == d && *cause == SleepCause::Signal,
            _ => false,
        })
        .map(|r| (r.tick, r.entry.kind()))
        .collect();
    assert_eq!(kinds, vec![(37, "ARRIVE"), (38, "SLEEP"), (100, "PROFILE")]);
    let before = trace
        .records
        .iter()
        .filter(|r| r.tick < 37)
        .any(|r| matches!(&r.entry, Entry::Send(h) | Entry::Deliver(h) if h.src == d));
    assert!(!before);
}

#[test]
fn detection_off_emits_no_verdicts_and_saves_exactly_detection_cost() {
    let mut config = seeded("quiet", 5);
    config.horizon = 1_000;
    let on = run_with_detection(&config, true).unwrap();
    let off = run_with_detection(&config, false).unwrap();
    assert!(!off.records.iter().any(|r| matches!(r.entry, Entry::Tag { .. } | Entry::Decide { .. } | Entry::Isolate { .. })));
    let detect: Energy = on
        .records
        .iter()
        .filter_map(|r| match r.entry {
            Entry::Energy { action: Action::Detect, amount, .. } => Some(amount),
            _ => None,
        })
        .sum();
    assert!(detect > Energy::ZERO);
    let (m_on, m_off) = (compute(&on).unwrap(), compute(&off).unwrap());
    assert_eq!(m_on.total_consumed - m_off.total_consumed, detect);
    assert_eq!(m_on.packets.sent, m_off.packets.sent);
}

#[test]
fn blind_flood_raises_rate_tags_on_awake_packets() {
    let trace = run(&scenario("blind_flood")).unwrap();
    let rate = trace
        .records
        .iter()
        .filter(|r| matches!(&r.entry, Entry::Tag { verdict, .. } if verdict.reason == Phase1Reason::RateExceeded))
        .count();
    assert!(rate > 0);
    let report = verify(&trace);
    assert!(report.is_clean(), "{report}");
    assert!(report.tags_checked > 0);
}

#[test]
fn compare_of_identical_runs_is_zero_and_rejects_mismatch() {
    let config = scenario("fig4");
    let m = compute(&run(&config).unwrap()).unwrap();
    let c = compare(&m, &m).unwrap();
    assert_eq!(c.first_death_delta, 0);
    assert_eq!(c.half_dead_delta, 0);
    assert!(c.energy_delta_by_class.values().all(|&d| d == 0));

    let other = compute(&run(&seeded("fig4", 99)).unwrap()).unwrap();
    assert!(matches!(compare(&m, &other), Err(MetricsError::Mismatch(..))));
}

#[test]
fn truncated_trace_is_rejected() {
    let text = run(&scenario("fig4")).unwrap().to_text();
    let cut: String = text.lines().take(200).map(|l| format!("{l}\n")).collect();
    let trace = RunTrace::parse(&cut).unwrap();
    assert_eq!(compute(&trace), Err(MetricsError::Truncated));
}

#[test]
fn metrics_from_reparsed_trace_match() {
    let trace = run(&scenario("blind_flood")).unwrap();
    let again = RunTrace::parse(&trace.to_text()).unwrap();
    assert_eq!(compute(&trace).unwrap(), compute(&again).unwrap());
}

fn tamper(trace: &RunTrace, kind: &str, edit: impl Fn(&str) -> String) -> RunTrace {
    let mut done = false;
    let text: String = trace
        .to_text()
        .lines()
        .map(|l| {
            let edited = edit(l);
            let hit = !done && l.split('\t').nth(1) == Some(kind) && edited != l;
            done |= hit;
            format!("{}\n", if hit { edited } else { l.to_string() })
        })
        .collect();
    assert!(done, "no {kind} line");
    RunTrace::parse(&text).unwrap()
}

#[test]
fn replay_catches_forged_records() {
    let trace = run(&scenario("fig4")).unwrap();
    assert!(verify(&trace).is_clean());

    let forged = tamper(&trace, "TAG", |l| l.replace("tag=VALID", "tag=INVALID"));
    assert!(verify(&forged).count(AuditKind::Tag) > 0);

    let forged = tamper(&trace, "ENERGY", |l| l.replace("amount=", "amount=1"));
    assert!(verify(&forged).count(AuditKind::Conservation) > 0);

    let forged = tamper(&trace, "DECIDE", |l| l.replace("decision=FORWARD\tconfirmed=0", "decision=DROP\tconfirmed=1"));
    assert!(verify(&forged).count(AuditKind::Decision) > 0);

    let forged = tamper(&trace, "ELECT", |l| l.replace("ELECT\tE\t", "ELECT\tF\t"));
    let r = verify(&forged);
    assert!(r.count(AuditKind::Election) > 0, "{r}");
}

#[test]
fn first_tag_uses_tagger_window() {
    let trace = run(&scenario("fig4")).unwrap();
    let first = trace
        .records
        .iter()
        .find_map(|r| match &r.entry {
            Entry::Tag { verdict, .. } => Some(*verdict),
            _ => None,
        })
        .unwrap();
    assert_eq!(first.tag, Tag::Valid);
    assert_eq!(first.window_count, 1);
}

#[test]
fn bad_scenarios_are_rejected_with_paths() {
    let text = std::fs::read_to_string(common::scenario_path("fig4")).unwrap();
    let broken = text.replacen("class = \"head\"", "class = \"sink\"", 1);
    let err = validate_str(&broken).unwrap_err().errors().join("\n");
    assert!(err.contains("J") && err.contains("I"), "{err}");

    let broken = text.replace("targets = [\"A\"]", "targets = [\"Z\"]");
    let err = validate_str(&broken).unwrap_err().errors().join("\n");
    assert!(err.contains("attacks[0].targets"), "{err}");
}
