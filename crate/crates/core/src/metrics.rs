//! Lifetime, energy, traffic and detection-quality metrics computed from a trace.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::energy::Energy;
use crate::engine::SimTime;
use crate::protocol::PacketKind;
use crate::roles::Tier;
use crate::topology::NodeId;
use crate::trace::{Entry, RunTrace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("trace is truncated (no END record)")]
    Truncated,
    #[error("trace has no CONFIG header")]
    NoHeader,
    #[error("runs are not comparable: config fingerprints differ ({0} vs {1})")]
    Mismatch(String, String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketCounts {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub data_to_sg: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectionQuality {
    pub targets: BTreeSet<String>,
    pub isolated: BTreeSet<String>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub confirmed_intrusions: u64,
    pub invalid_tags: u64,
    /// Ticks from the first fake request at a victim to its isolation.
    pub latency: BTreeMap<String, SimTime>,
    pub attackers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub fingerprint: String,
    pub seed: u64,
    pub detection: bool,
    pub end_tick: SimTime,
    pub nodes: usize,
    /// `None` if no node died before the end of the run.
    pub lifetime_first_death: Option<SimTime>,
    pub lifetime_half_dead: Option<SimTime>,
    pub deaths: usize,
    pub consumed: BTreeMap<String, Energy>,
    pub consumed_by_class: BTreeMap<String, Energy>,
    pub total_consumed: Energy,
    pub packets: PacketCounts,
    pub quality: DetectionQuality,
}

impl RunMetrics {
    /// First-death lifetime with runs that saw no death censored at the end tick.
    pub fn first_death_or_end(&self) -> SimTime {
        self.lifetime_first_death.unwrap_or(self.end_tick)
    }

    pub fn half_dead_or_end(&self) -> SimTime {
        self.lifetime_half_dead.unwrap_or(self.end_tick)
    }

    pub fn to_kv(&self) -> String {
        let opt = |v: Option<SimTime>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        let set = |s: &BTreeSet<String>| if s.is_empty() { "-".to_string() } else { s.iter().cloned().collect::<Vec<_>>().join(",") };
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("fingerprint", self.fingerprint.clone());
        kv("seed", self.seed.to_string());
        kv("detection", u8::from(self.detection).to_string());
        kv("end_tick", self.end_tick.to_string());
        kv("nodes", self.nodes.to_string());
        kv("lifetime_first_death", opt(self.lifetime_first_death));
        kv("lifetime_half_dead", opt(self.lifetime_half_dead));
        kv("deaths", self.deaths.to_string());
        kv("total_consumed", self.total_consumed.to_string());
        kv("packets_sent", self.packets.sent.to_string());
        kv("packets_delivered", self.packets.delivered.to_string());
        kv("packets_dropped", self.packets.dropped.to_string());
        kv("data_to_sg", self.packets.data_to_sg.to_string());
        kv("confirmed_intrusions", self.quality.confirmed_intrusions.to_string());
        kv("invalid_tags", self.quality.invalid_tags.to_string());
        kv("tp", self.quality.true_positives.to_string());
        kv("fp", self.quality.false_positives.to_string());
        kv("fn", self.quality.false_negatives.to_string());
        kv("targets", set(&self.quality.targets));
        kv("isolated", set(&self.quality.isolated));
        kv("attackers", if self.quality.attackers.is_empty() { "-".into() } else { self.quality.attackers.join(",") });
        for (node, lat) in &self.quality.latency {
            kv(&format!("latency.{node}"), lat.to_string());
        }
        for (class, e) in &self.consumed_by_class {
            kv(&format!("consumed_class.{class}"), e.to_string());
        }
        for (node, e) in &self.consumed {
            kv(&format!("consumed.{node}"), e.to_string());
        }
        out
    }

    pub const CSV_HEADER: &'static str = "fingerprint,seed,detection,end_tick,nodes,lifetime_first_death,lifetime_half_dead,deaths,total_consumed,packets_sent,packets_delivered,packets_dropped,data_to_sg,confirmed_intrusions,tp,fp,fn";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<SimTime>| v.map_or_else(String::new, |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.fingerprint,
            self.seed,
            u8::from(self.detection),
            self.end_tick,
            self.nodes,
            opt(self.lifetime_first_death),
            opt(self.lifetime_half_dead),
            self.deaths,
            self.total_consumed,
            self.packets.sent,
            self.packets.delivered,
            self.packets.dropped,
            self.packets.data_to_sg,
            self.quality.confirmed_intrusions,
            self.quality.true_positives,
            self.quality.false_positives,
            self.quality.false_negatives,
        )
    }
}

/// Derives all metrics from a complete trace; ground truth comes from its ATTACK headers.
pub fn compute(trace: &RunTrace) -> Result<RunMetrics, MetricsError> {
    if !trace.is_complete() {
        return Err(MetricsError::Truncated);
    }
    let mut header = None;
    let mut class_of: BTreeMap<NodeId, String> = BTreeMap::new();
    let mut lifetime_nodes: BTreeSet<NodeId> = BTreeSet::new();
    let mut sg = None;
    let mut attackers = Vec::new();
    let mut targets: BTreeSet<NodeId> = BTreeSet::new();
    let mut first_fire: BTreeMap<NodeId, SimTime> = BTreeMap::new();
    let mut isolated: BTreeMap<NodeId, SimTime> = BTreeMap::new();
    let mut deaths: Vec<SimTime> = Vec::new();
    let mut consumed: BTreeMap<NodeId, Energy> = BTreeMap::new();
    let mut packets = PacketCounts::default();
    let mut confirmed = 0;
    let mut invalid_tags = 0;
    let mut end_tick = 0;

    for r in &trace.records {
        match &r.entry {
            Entry::Config(c) => header = Some(c.clone()),
            Entry::Node(h) => {
                let id = trace.node_by_name(&h.name).expect("node header registers a name");
                class_of.insert(id, h.class.clone());
                if h.attacker {
                    attackers.push(h.name.clone());
                } else if h.tier == Some(Tier::Sink) {
                    sg = Some(id);
                } else {
                    lifetime_nodes.insert(id);
                }
            }
            Entry::Attack(a) => targets.extend(a.targets.iter().copied()),
            Entry::Fire { target, .. } => {
                first_fire.entry(*target).or_insert(r.tick);
            }
            Entry::Isolate { node, .. } => {
                isolated.entry(*node).or_insert(r.tick);
            }
            Entry::Death { node, at } => {
                if lifetime_nodes.contains(node) {
                    deaths.push(*at);
                }
            }
            Entry::Energy { node, amount, .. } => *consumed.entry(*node).or_default() += *amount,
            Entry::Send(_) => packets.sent += 1,
            Entry::Deliver(h) => {
                packets.delivered += 1;
                if h.kind == PacketKind::Data && Some(h.to) == sg {
                    packets.data_to_sg += 1;
                }
            }
            Entry::Drop { .. } => packets.dropped += 1,
            Entry::Decide { confirmed: true, .. } => confirmed += 1,
            Entry::Tag { verdict, .. } if verdict.tag == crate::detection::Tag::Invalid => invalid_tags += 1,
            Entry::End { .. } => end_tick = r.tick,
            _ => {}
        }
    }
    let header = header.ok_or(MetricsError::NoHeader)?;
    deaths.sort_unstable();
    let n = lifetime_nodes.len();
    let half = n.div_ceil(2).max(1);
    let lifetime_half_dead = (n > 0 && deaths.len() >= half).then(|| deaths[half - 1]);

    let name = |id: &NodeId| trace.name(*id).to_string();
    let mut consumed_by_class: BTreeMap<String, Energy> = BTreeMap::new();
    for (id, e) in &consumed {
        *consumed_by_class.entry(class_of.get(id).cloned().unwrap_or_default()).or_default() += *e;
    }
    let quality = DetectionQuality {
        targets: targets.iter().map(name).collect(),
        isolated: isolated.keys().map(name).collect(),
        true_positives: isolated.keys().filter(|n| targets.contains(n)).count(),
        false_positives: isolated.keys().filter(|n| !targets.contains(n)).count(),
        false_negatives: targets.iter().filter(|n| !isolated.contains_key(n)).count(),
        confirmed_intrusions: confirmed,
        invalid_tags,
        latency: isolated
            .iter()
            .filter_map(|(n, &t)| first_fire.get(n).map(|&f| (name(n), t.saturating_sub(f))))
            .collect(),
        attackers,
    };
    Ok(RunMetrics {
        fingerprint: header.fingerprint,
        seed: header.seed,
        detection: header.detection,
        end_tick,
        nodes: n,
        lifetime_first_death: deaths.first().copied(),
        lifetime_half_dead,
        deaths: deaths.len(),
        total_consumed: consumed.values().copied().sum(),
        consumed: consumed.iter().map(|(k, v)| (name(k), *v)).collect(),
        consumed_by_class,
        packets,
        quality,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub fingerprint: String,
    pub seed: u64,
    /// `on - off`, with runs that saw no death censored at their end tick.
    pub first_death_delta: i64,
    pub half_dead_delta: i64,
    /// `on - off` consumed energy per class.
    pub energy_delta_by_class: BTreeMap<String, i64>,
    /// Detection-on first death came earlier than detection-off.
    pub lifetime_regressed: bool,
}

impl Comparison {
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "fingerprint={}", self.fingerprint);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "first_death_delta={}", self.first_death_delta);
        let _ = writeln!(out, "half_dead_delta={}", self.half_dead_delta);
        let _ = writeln!(out, "lifetime_regressed={}", u8::from(self.lifetime_regressed));
        for (class, d) in &self.energy_delta_by_class {
            let _ = writeln!(out, "energy_delta.{class}={d}");
        }
        out
    }
}

/// Pairs a detection-on run with its detection-off twin (in either order).
/// Runs from different configs are rejected.
pub fn compare(a: &RunMetrics, b: &RunMetrics) -> Result<Comparison, MetricsError> {
    if a.fingerprint != b.fingerprint {
        return Err(MetricsError::Mismatch(a.fingerprint.clone(), b.fingerprint.clone()));
    }
    let (on, off) = match (a.detection, b.detection) {
        (true, false) => (a, b),
        (false, true) => (b, a),
        _ => (a, b),
    };
    let mut energy: BTreeMap<String, i64> = BTreeMap::new();
    for (class, e) in &on.consumed_by_class {
        *energy.entry(class.clone()).or_default() += e.micros();
    }
    for (class, e) in &off.consumed_by_class {
        *energy.entry(class.clone()).or_default() -= e.micros();
    }
    let first = on.first_death_or_end() as i64 - off.first_death_or_end() as i64;
    Ok(Comparison {
        fingerprint: on.fingerprint.clone(),
        seed: on.seed,
        first_death_delta: first,
        half_dead_delta: on.half_dead_or_end() as i64 - off.half_dead_or_end() as i64,
        energy_delta_by_class: energy,
        lifetime_regressed: first < 0,
    })
}
