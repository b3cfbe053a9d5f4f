#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use sleepguard::config::{validate_file, ScenarioConfig};
use sleepguard::energy::Energy;
use sleepguard::topology::NodeId;
use sleepguard::trace::{Entry, RunTrace};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

pub fn scenario(name: &str) -> ScenarioConfig {
    validate_file(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}")).config
}

pub fn seeded(name: &str, seed: u64) -> ScenarioConfig {
    let mut c = scenario(name);
    c.seed = seed;
    c
}

/// `(initial - final residual, sum of ENERGY lines)` per finite node, from the
/// NODE headers and the last SAMPLE of each node.
pub fn energy_books(trace: &RunTrace) -> HashMap<NodeId, (Energy, Energy)> {
    let mut initial = HashMap::new();
    let mut last = HashMap::new();
    let mut logged: HashMap<NodeId, Energy> = HashMap::new();
    for r in &trace.records {
        match &r.entry {
            Entry::Node(h) => {
                if let Some(e) = h.initial {
                    initial.insert(trace.node_by_name(&h.name).unwrap(), e);
                }
            }
            Entry::Sample { node, residual } => {
                last.insert(*node, *residual);
            }
            Entry::Energy { node, amount, .. } => *logged.entry(*node).or_default() += *amount,
            _ => {}
        }
    }
    initial
        .into_iter()
        .map(|(n, init)| {
            let residual = last.get(&n).copied().expect("every finite node is sampled at the end");
            (n, (init - residual, logged.get(&n).copied().unwrap_or_default()))
        })
        .collect()
}

/// Packets originated by a node that travel past their first hop after the
/// node's isolation record.
pub fn leaks_after_isolation(trace: &RunTrace) -> Vec<String> {
    let mut isolated = Vec::new();
    let mut leaks = Vec::new();
    for r in &trace.records {
        match &r.entry {
            Entry::Isolate { node, .. } => isolated.push(*node),
            Entry::Send(h) | Entry::Deliver(h) if h.hop > 1 && isolated.contains(&h.src) => {
                leaks.push(format!("tick {} pkt {} from {} hop {}", r.tick, h.pkt, trace.name(h.src), h.hop));
            }
            _ => {}
        }
    }
    leaks
}

pub fn isolations(trace: &RunTrace) -> usize {
    trace.records.iter().filter(|r| matches!(r.entry, Entry::Isolate { .. })).count()
}
