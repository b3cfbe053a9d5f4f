//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use sleepguard::detection::{Decision, Phase1Reason, Tag};
use sleepguard::metrics::{compare, compute};
use sleepguard::protocol::{PacketId, PacketKind};
use sleepguard::replay::{self, AuditKind, ReplayReport};
use sleepguard::roles::Role;
use sleepguard::sim::{run, run_with_detection};
use sleepguard::trace::{DropReason, Entry, RunTrace};

use common::{energy_books, isolations, leaks_after_isolation, scenario, seeded};

/// Running totals over every trace produced by the suite.
#[derive(Default)]
struct Ledger {
    runs: usize,
    conservation: Vec<String>,
    nodes_balanced: usize,
    elections: usize,
    election_faults: Vec<String>,
    isolations: usize,
    isolation_faults: Vec<String>,
}

impl Ledger {
    fn observe(&mut self, label: &str, trace: &RunTrace) {
        self.runs += 1;
        for (node, (drained, logged)) in energy_books(trace) {
            self.nodes_balanced += 1;
            if drained != logged {
                self.conservation.push(format!("{label} {}: drained {drained} logged {logged}", trace.name(node)));
            }
        }
        let mut report = ReplayReport::default();
        replay::audit_conservation(trace, &mut report);
        replay::audit_elections(trace, &mut report);
        replay::audit_isolation(trace, &mut report);
        self.elections += report.elections_checked;
        self.isolations += isolations(trace);
        for m in &report.mismatches {
            let line = format!("{label}: {m}");
            match m.kind {
                AuditKind::Conservation => self.conservation.push(line),
                AuditKind::Election => self.election_faults.push(line),
                _ => self.isolation_faults.push(line),
            }
        }
        self.isolation_faults.extend(leaks_after_isolation(trace).into_iter().map(|l| format!("{label}: {l}")));
    }
}

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, result: Result<String, String>) -> Outcome {
    match result {
        Ok(detail) => Outcome { id, pass: true, detail },
        Err(detail) => Outcome { id, pass: false, detail },
    }
}

fn within(limit: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took <= limit {
        Ok(took)
    } else {
        Err(format!("took {took:.2?}, limit {limit:?}"))
    }
}

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn ac1(ledger: &Mutex<Ledger>) -> Result<String, String> {
    let started = Instant::now();
    let config = scenario("fig4");
    let trace = run(&config).map_err(|e| e.to_string())?;
    let took = within(Duration::from_secs(1), started)?;
    ledger.lock().unwrap().observe("fig4", &trace);

    let id = |n: &str| trace.node_by_name(n).ok_or(format!("no node {n}"));
    let (a, c, k, j) = (id("A")?, id("C")?, id("K")?, id("J")?);
    let (e, f, g, h, i) = (id("E")?, id("F")?, id("G")?, id("H")?, id("I")?);

    let sensors = trace.records.iter().filter(|r| matches!(&r.entry, Entry::Node(n) if !n.attacker)).count();
    check(sensors == 10, format!("{sensors} sensors"))?;

    let winners: Vec<(Role, _)> = trace
        .records
        .iter()
        .filter_map(|r| match &r.entry {
            Entry::Elect(e) if r.tick == 0 => Some((e.role, e.winner)),
            _ => None,
        })
        .collect();
    let expected = [
        (Role::ClusterInCharge, i),
        (Role::SectorInCharge, e),
        (Role::SectorInCharge, f),
        (Role::SectorMonitor, g),
        (Role::SectorMonitor, h),
    ];
    check(winners == expected, format!("initial elections {winners:?}"))?;

    let fire = trace
        .records
        .iter()
        .find(|r| matches!(r.entry, Entry::Fire { attacker, target, .. } if attacker == k && target == a))
        .ok_or("K never fired at A")?;
    check(fire.tick == 30, format!("first fire at {}", fire.tick))?;

    let first_data = |src, after: u64| -> Option<PacketId> {
        trace.records.iter().find_map(|r| match &r.entry {
            Entry::Send(h) if h.src == src && h.kind == PacketKind::Data && h.hop == 1 && h.created > after => Some(h.pkt),
            _ => None,
        })
    };
    let p1 = first_data(a, fire.tick).ok_or("A never answered")?;
    let p2 = first_data(c, 0).ok_or("C never reported")?;

    let tag_of = |p: PacketId| {
        trace.records.iter().find_map(|r| match &r.entry {
            Entry::Tag { pkt, tagger, verdict, .. } if *pkt == p => Some((r.tick, *tagger, *verdict)),
            _ => None,
        })
    };

    let (t1, tagger1, v1) = tag_of(p1).ok_or("P1 untagged")?;
    check((t1, tagger1) == (33, g), format!("P1 tagged at {t1} by {}", trace.name(tagger1)))?;
    check(v1.tag == Tag::Invalid && v1.reason == Phase1Reason::SleepViolation, format!("P1 {}/{}", v1.tag, v1.reason))?;
    let th = v1.threshold.ok_or("P1 has no threshold")?;
    check(v1.suspected && v1.residual < th, format!("A residual {} vs threshold {th}", v1.residual))?;

    let decided = trace.records.iter().find_map(|r| match &r.entry {
        Entry::Decide { pkt, cic, decision, confirmed, .. } if *pkt == p1 => Some((r.tick, *cic, *decision, *confirmed)),
        _ => None,
    });
    check(decided == Some((34, i, Decision::Drop, true)), format!("P1 decision {decided:?}"))?;
    let dropped = trace.records.iter().any(|r| {
        matches!(&r.entry, Entry::Drop { hop, reason: DropReason::Detection } if hop.pkt == p1 && hop.to == i)
    });
    check(dropped, "P1 not dropped at I")?;
    let isolated = trace.records.iter().find_map(|r| match &r.entry {
        Entry::Isolate { node, verdict, .. } if *node == a => Some((r.tick, *verdict)),
        _ => None,
    });
    check(isolated == Some((34, p1)), format!("A isolation {isolated:?}"))?;

    let reached_sg = |p: PacketId| {
        trace.records.iter().find_map(|r| match &r.entry {
            Entry::Deliver(h) if h.pkt == p && h.to == j => Some(h.tag),
            _ => None,
        })
    };
    check(reached_sg(p1).is_none(), "P1 reached J")?;

    let (t2, tagger2, v2) = tag_of(p2).ok_or("P2 untagged")?;
    check((t2, tagger2) == (4, h), format!("P2 tagged at {t2} by {}", trace.name(tagger2)))?;
    check(v2.tag == Tag::Valid && v2.reason == Phase1Reason::None, format!("P2 {}/{}", v2.tag, v2.reason))?;
    check(reached_sg(p2) == Some(Tag::Valid), "P2 not delivered VALID to J")?;

    Ok(format!("P1=pkt {p1} dropped, A isolated at 34; P2=pkt {p2} VALID at J; {took:.2?}"))
}

fn ac2(ledger: &Mutex<Ledger>) -> Result<String, String> {
    let started = Instant::now();
    let failures: Vec<String> = (1..=50u64)
        .into_par_iter()
        .map(|seed| {
            let config = seeded("quiet", seed);
            let trace = run(&config).map_err(|e| format!("seed {seed}: {e}"))?;
            ledger.lock().unwrap().observe(&format!("quiet/{seed}"), &trace);
            let m = compute(&trace).map_err(|e| format!("seed {seed}: {e}"))?;
            if m.nodes > 30 || config.horizon != 10_000 {
                return Err(format!("seed {seed}: {} nodes, horizon {}", m.nodes, config.horizon));
            }
            if m.quality.confirmed_intrusions != 0 || m.quality.false_positives != 0 {
                return Err(format!(
                    "seed {seed}: confirmed={} fp={}",
                    m.quality.confirmed_intrusions, m.quality.false_positives
                ));
            }
            Ok(())
        })
        .filter_map(Result::err)
        .collect();
    check(failures.is_empty(), failures.join("; "))?;
    let took = within(Duration::from_secs(30), started)?;
    Ok(format!("50 quiet runs, no confirmed intrusion, FP=0; {took:.2?}"))
}

fn ac3(ledger: &Mutex<Ledger>) -> Result<String, String> {
    let mut tags = 0;
    let mut rate = 0;
    let mut sleep = 0;
    let mut faults = Vec::new();
    for seed in 1..=20u64 {
        let trace = run(&seeded("oracle", seed)).map_err(|e| e.to_string())?;
        ledger.lock().unwrap().observe(&format!("oracle/{seed}"), &trace);
        let sensors = trace.records.iter().filter(|r| matches!(r.entry, Entry::Node(_))).count();
        let events = trace.records.iter().find_map(|r| match r.entry {
            Entry::End { events, .. } => Some(events),
            _ => None,
        });
        check(sensors <= 12 && events.is_some_and(|e| e <= 2000), format!("seed {seed}: {sensors} nodes, {events:?} events"))?;
        let mut report = ReplayReport::default();
        replay::audit_detection(&trace, &mut report);
        tags += report.tags_checked;
        for r in &trace.records {
            if let Entry::Tag { verdict, .. } = &r.entry {
                match verdict.reason {
                    Phase1Reason::RateExceeded => rate += 1,
                    Phase1Reason::SleepViolation => sleep += 1,
                    Phase1Reason::None => {}
                }
            }
        }
        faults.extend(report.mismatches.iter().map(|m| format!("seed {seed}: {m}")));
    }
    check(faults.is_empty(), faults.join("; "))?;
    check(rate > 0 && sleep > 0, format!("oracle runs exercise too little: rate={rate} sleep={sleep}"))?;
    Ok(format!("{tags} tags agree (RATE_EXCEEDED {rate}, SLEEP_VIOLATION {sleep})"))
}

fn ac6(ledger: &Mutex<Ledger>) -> Result<String, String> {
    let started = Instant::now();
    let pairs: Vec<Result<(u64, i64), String>> = (1..=20u64)
        .into_par_iter()
        .map(|seed| {
            let config = seeded("sleep_targeted", seed);
            let on = run_with_detection(&config, true).map_err(|e| e.to_string())?;
            let off = run_with_detection(&config, false).map_err(|e| e.to_string())?;
            {
                let mut l = ledger.lock().unwrap();
                l.observe(&format!("sleep_targeted/{seed}/on"), &on);
                l.observe(&format!("sleep_targeted/{seed}/off"), &off);
            }
            let (m_on, m_off) = (compute(&on).map_err(|e| e.to_string())?, compute(&off).map_err(|e| e.to_string())?);
            let c = compare(&m_on, &m_off).map_err(|e| e.to_string())?;
            Ok((seed, c.first_death_delta))
        })
        .collect();
    let deltas: Vec<(u64, i64)> = pairs.into_iter().collect::<Result<_, _>>()?;
    let held = deltas.iter().filter(|(_, d)| *d >= 0).count();
    let mean = deltas.iter().map(|(_, d)| *d as f64).sum::<f64>() / deltas.len() as f64;
    let took = within(Duration::from_secs(120), started)?;
    let regressed: Vec<String> = deltas.iter().filter(|(_, d)| *d < 0).map(|(s, d)| format!("seed {s} ({d:+})")).collect();
    let summary = format!("{held}/20 pairs on>=off, mean delta {mean:.1} ticks; regressed: [{}]; {took:.2?}", regressed.join(", "));
    check(held >= 18 && mean > 0.0, summary.clone())?;
    Ok(summary)
}

fn ac7() -> Result<String, String> {
    let names = ["fig4", "quiet", "blind_flood", "oracle", "sleep_targeted"];
    for name in names {
        let config = scenario(name);
        let a = run(&config).map_err(|e| e.to_string())?.to_text();
        let b = run(&config).map_err(|e| e.to_string())?.to_text();
        check(a == b, format!("{name}: traces differ"))?;
        let reparsed = RunTrace::parse(&a).map_err(|e| format!("{name}: {e}"))?.to_text();
        check(a == reparsed, format!("{name}: canonical text not stable under reparse"))?;
    }
    Ok(format!("{} scenarios byte-identical across reruns", names.len()))
}

fn main() -> ExitCode {
    let ledger = Mutex::new(Ledger::default());
    for name in ["blind_flood", "quiet"] {
        let trace = run(&scenario(name)).expect(name);
        ledger.lock().unwrap().observe(name, &trace);
    }

    let mut outcomes = vec![
        outcome("AC-1", ac1(&ledger)),
        outcome("AC-2", ac2(&ledger)),
        outcome("AC-3", ac3(&ledger)),
    ];
    let ac6 = outcome("AC-6", ac6(&ledger));
    let ac7 = outcome("AC-7", ac7());

    let l = ledger.into_inner().unwrap();
    outcomes.push(outcome(
        "AC-4",
        if l.conservation.is_empty() {
            Ok(format!("{} node balances over {} runs match exactly", l.nodes_balanced, l.runs))
        } else {
            Err(l.conservation.join("; "))
        },
    ));
    outcomes.push(outcome(
        "AC-5",
        if l.election_faults.is_empty() && l.elections > 0 {
            Ok(format!("{} election records over {} runs satisfy their rule", l.elections, l.runs))
        } else {
            Err(format!("{} checked; {}", l.elections, l.election_faults.join("; ")))
        },
    ));
    outcomes.push(ac6);
    outcomes.push(ac7);
    outcomes.push(outcome(
        "AC-8",
        if l.isolation_faults.is_empty() && l.isolations > 0 {
            Ok(format!("{} isolations over {} runs, no packet past the first hop afterwards", l.isolations, l.runs))
        } else {
            Err(format!("{} isolations; {}", l.isolations, l.isolation_faults.join("; ")))
        },
    ));
    outcomes.sort_by_key(|o| o.id);

    let mut failed = 0;
    for o in &outcomes {
        println!("{} {} {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
