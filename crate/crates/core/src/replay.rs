//! Offline trace auditor.
//!
//! Re-derives every phase-1 tag and phase-2 decision from the raw delivery
//! log, re-checks every election against its logged candidate list, and
//! checks energy conservation and isolation discipline. It deliberately shares
//! no decision code with the simulator: it only reads the trace.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::detection::{Decision, Phase1Reason, Tag};
use crate::energy::{Energy, SleepSchedule};
use crate::engine::SimTime;
use crate::protocol::{PacketId, PacketKind};
use crate::roles::{Candidate, Role};
use crate::topology::NodeId;
use crate::trace::{DropReason, Entry, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuditKind {
    Tag,
    Decision,
    Election,
    Conservation,
    Isolation,
    Structure,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub kind: AuditKind,
    /// Index of the offending record.
    pub record: usize,
    pub tick: SimTime,
    pub detail: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] record {} tick {}: {}", self.kind, self.record, self.tick, self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub tags_checked: usize,
    pub decisions_checked: usize,
    pub elections_checked: usize,
    pub samples_checked: usize,
    pub isolations_checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn count(&self, kind: AuditKind) -> usize {
        self.mismatches.iter().filter(|m| m.kind == kind).count()
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "tags={} decisions={} elections={} samples={} isolations={} mismatches={}",
            self.tags_checked,
            self.decisions_checked,
            self.elections_checked,
            self.samples_checked,
            self.isolations_checked,
            self.mismatches.len()
        )?;
        for m in &self.mismatches {
            writeln!(f, "{m}")?;
        }
        Ok(())
    }
}

/// Runs every audit.
pub fn verify(trace: &RunTrace) -> ReplayReport {
    let mut report = ReplayReport::default();
    audit_detection(trace, &mut report);
    audit_elections(trace, &mut report);
    audit_conservation(trace, &mut report);
    audit_isolation(trace, &mut report);
    report
}

fn push(report: &mut ReplayReport, kind: AuditKind, record: usize, tick: SimTime, detail: String) {
    report.mismatches.push(Mismatch { kind, record, tick, detail });
}

/// Awake iff `t mod period` lies in `[offset, offset + len)`.
fn awake(s: &SleepSchedule, t: SimTime) -> bool {
    let phase = t % s.period();
    s.wake_offset() <= phase && phase - s.wake_offset() < s.wake_len()
}

/// Number of ticks in `log` within `(t - window, t]`.
fn in_window(log: &[SimTime], t: SimTime, window: u64) -> u32 {
    log.iter().rev().take_while(|&&s| s + window > t).filter(|&&s| s <= t).count() as u32
}

struct TagFacts {
    reason: Phase1Reason,
    tag: Tag,
    suspected: bool,
}

/// Phase-1 tags from the delivery log and profiles; phase-2 decisions from the
/// tags and the CIC's own INVALID history.
pub fn audit_detection(trace: &RunTrace, report: &mut ReplayReport) {
    let Some(cfg) = trace.records.iter().find_map(|r| match &r.entry {
        Entry::Config(c) => Some(c.clone()),
        _ => None,
    }) else {
        push(report, AuditKind::Structure, 0, 0, "missing CONFIG header".into());
        return;
    };
    let w = cfg.window;

    // (receiver, src) -> delivery ticks so far
    let mut deliveries: HashMap<(NodeId, NodeId), Vec<SimTime>> = HashMap::new();
    // node -> Some(None) always on, Some(Some(s)) duty cycle
    let mut profiles: HashMap<NodeId, Option<SleepSchedule>> = HashMap::new();
    let mut stamped: HashMap<PacketId, Energy> = HashMap::new();
    let mut tags: HashMap<PacketId, TagFacts> = HashMap::new();
    let mut invalid_seen: HashMap<(NodeId, NodeId), Vec<SimTime>> = HashMap::new();

    for (i, r) in trace.records.iter().enumerate() {
        let t = r.tick;
        match &r.entry {
            Entry::Query { .. } => profiles.clear(),
            Entry::Profile(p) => {
                profiles.insert(p.node, p.schedule);
            }
            Entry::Send(h) if h.hop == 1 && h.from == h.src => {
                stamped.entry(h.pkt).or_insert(h.residual);
            }
            Entry::Deliver(h) if h.kind != PacketKind::SleepSignal => {
                deliveries.entry((h.to, h.src)).or_default().push(t);
            }
            Entry::Tag { tagger, pkt, src, created, verdict } => {
                report.tags_checked += 1;
                let count = deliveries.get(&(*tagger, *src)).map_or(0, |log| in_window(log, t, w));
                let profile = profiles.get(src);
                let in_sleep = match profile {
                    None => true,
                    Some(None) => false,
                    Some(Some(s)) => !awake(s, *created),
                };
                let (tag, reason) = if in_sleep {
                    (Tag::Invalid, Phase1Reason::SleepViolation)
                } else if count > cfg.rate_threshold {
                    (Tag::Invalid, Phase1Reason::RateExceeded)
                } else {
                    (Tag::Valid, Phase1Reason::None)
                };
                if verdict.tag != tag || verdict.reason != reason || verdict.window_count != count {
                    push(
                        report,
                        AuditKind::Tag,
                        i,
                        t,
                        format!(
                            "pkt {pkt}: logged {}/{}/count={} but replay gives {tag}/{reason}/count={count}",
                            verdict.tag, verdict.reason, verdict.window_count
                        ),
                    );
                }
                if verdict.unprofiled != profile.is_none() {
                    push(report, AuditKind::Tag, i, t, format!("pkt {pkt}: unprofiled flag disagrees with profile log"));
                }
                if let Some(&res) = stamped.get(pkt) {
                    if res != verdict.residual {
                        push(report, AuditKind::Tag, i, t, format!("pkt {pkt}: residual {} differs from stamped {res}", verdict.residual));
                    }
                }
                let suspected = match (verdict.tag, verdict.threshold) {
                    (Tag::Invalid, Some(th)) => verdict.residual < th,
                    (Tag::Invalid, None) => {
                        push(report, AuditKind::Tag, i, t, format!("pkt {pkt}: INVALID without a threshold"));
                        false
                    }
                    _ => false,
                };
                if suspected != verdict.suspected {
                    push(report, AuditKind::Tag, i, t, format!("pkt {pkt}: suspected flag disagrees with residual vs threshold"));
                }
                tags.insert(*pkt, TagFacts { reason: verdict.reason, tag: verdict.tag, suspected: verdict.suspected });
            }
            Entry::Decide { cic, pkt, src, tag, decision, confirmed, invalid_count } => {
                report.decisions_checked += 1;
                let Some(facts) = tags.get(pkt) else {
                    push(report, AuditKind::Decision, i, t, format!("pkt {pkt}: decision without a tag"));
                    continue;
                };
                if facts.tag != *tag {
                    push(report, AuditKind::Decision, i, t, format!("pkt {pkt}: decided tag {tag} but tagged {}", facts.tag));
                }
                let log = invalid_seen.entry((*cic, *src)).or_default();
                if facts.tag == Tag::Invalid {
                    log.push(t);
                }
                let count = in_window(log, t, w);
                let confirm = facts.tag == Tag::Invalid
                    && facts.suspected
                    && (facts.reason == Phase1Reason::SleepViolation || count >= cfg.corroboration);
                let expect = if confirm { Decision::Drop } else { Decision::Forward };
                if *decision != expect || *confirmed != confirm || *invalid_count != count {
                    push(
                        report,
                        AuditKind::Decision,
                        i,
                        t,
                        format!(
                            "pkt {pkt}: logged {decision}/confirmed={confirmed}/count={invalid_count}, replay gives {expect}/confirmed={confirm}/count={count}"
                        ),
                    );
                }
            }
            _ => {}
        }
    }
}

/// Every election winner must be the best logged candidate under its role's rule.
pub fn audit_elections(trace: &RunTrace, report: &mut ReplayReport) {
    for (i, r) in trace.records.iter().enumerate() {
        let Entry::Elect(e) = &r.entry else {
            continue;
        };
        report.elections_checked += 1;
        let winner = e.candidates.iter().find(|c| c.node == e.winner);
        let Some(w) = winner else {
            push(report, AuditKind::Election, i, r.tick, format!("{} winner not among candidates", e.role));
            continue;
        };
        let beats = |c: &Candidate| -> bool {
            match e.role {
                Role::ClusterInCharge => {
                    (c.energy, c.degree) > (w.energy, w.degree) || ((c.energy, c.degree) == (w.energy, w.degree) && c.node < w.node)
                }
                Role::SectorInCharge => c.energy > w.energy || (c.energy == w.energy && c.node < w.node),
                Role::SectorMonitor => {
                    let (dc, dw) = (c.distance.unwrap_or(f64::INFINITY), w.distance.unwrap_or(f64::INFINITY));
                    dc < dw || (dc == dw && c.node < w.node)
                }
                Role::SinkGateway | Role::LeafNode => false,
            }
        };
        if let Some(better) = e.candidates.iter().find(|c| c.node != w.node && beats(c)) {
            push(
                report,
                AuditKind::Election,
                i,
                r.tick,
                format!("{} winner {} beaten by {}", e.role, trace.name(w.node), trace.name(better.node)),
            );
        }
    }
}

/// At every SAMPLE: `initial - residual` equals the energy logged so far.
pub fn audit_conservation(trace: &RunTrace, report: &mut ReplayReport) {
    let mut initial: HashMap<NodeId, Energy> = HashMap::new();
    let mut spent: HashMap<NodeId, Energy> = HashMap::new();
    let mut last: HashMap<NodeId, Energy> = HashMap::new();
    for (i, r) in trace.records.iter().enumerate() {
        match &r.entry {
            Entry::Node(h) => {
                if let Some(e) = h.initial {
                    let id = trace.node_by_name(&h.name).expect("registered");
                    initial.insert(id, e);
                }
            }
            Entry::Energy { node, amount, .. } => {
                if *amount < Energy::ZERO {
                    push(report, AuditKind::Conservation, i, r.tick, "negative debit".into());
                }
                *spent.entry(*node).or_default() += *amount;
            }
            Entry::Sample { node, residual } => {
                report.samples_checked += 1;
                let Some(&init) = initial.get(node) else {
                    continue;
                };
                let used = spent.get(node).copied().unwrap_or_default();
                if init - *residual != used {
                    push(
                        report,
                        AuditKind::Conservation,
                        i,
                        r.tick,
                        format!("{}: initial {init} - residual {residual} != logged {used}", trace.name(*node)),
                    );
                }
                if let Some(prev) = last.insert(*node, *residual) {
                    if *residual > prev {
                        push(report, AuditKind::Conservation, i, r.tick, format!("{}: residual increased", trace.name(*node)));
                    }
                }
            }
            _ => {}
        }
    }
}

/// Isolation follows a confirmed decision, is never undone, and nothing an
/// isolated node originates travels past the first hop afterwards.
pub fn audit_isolation(trace: &RunTrace, report: &mut ReplayReport) {
    let mut confirmed: HashMap<PacketId, NodeId> = HashMap::new();
    let mut dropped_by_detection: HashSet<PacketId> = HashSet::new();
    let mut isolated: HashSet<NodeId> = HashSet::new();
    let mut tagged: HashMap<PacketId, Tag> = HashMap::new();
    let mut sg = None;
    let mut detection = false;
    for (i, r) in trace.records.iter().enumerate() {
        let t = r.tick;
        match &r.entry {
            Entry::Config(c) => detection = c.detection,
            Entry::Node(h) if h.tier == Some(crate::roles::Tier::Sink) => sg = trace.node_by_name(&h.name),
            Entry::Tag { pkt, verdict, .. } => {
                tagged.insert(*pkt, verdict.tag);
            }
            Entry::Decide { pkt, src, confirmed: true, .. } => {
                confirmed.insert(*pkt, *src);
            }
            Entry::Drop { hop, reason: DropReason::Detection } => {
                dropped_by_detection.insert(hop.pkt);
                if tagged.get(&hop.pkt) != Some(&Tag::Invalid) {
                    push(report, AuditKind::Isolation, i, t, format!("pkt {} dropped by detection without an INVALID tag", hop.pkt));
                }
            }
            Entry::Isolate { node, verdict, .. } => {
                report.isolations_checked += 1;
                if confirmed.get(verdict) != Some(node) {
                    push(report, AuditKind::Isolation, i, t, format!("{} isolated without a confirmed verdict", trace.name(*node)));
                }
                if !isolated.insert(*node) {
                    push(report, AuditKind::Isolation, i, t, format!("{} isolated twice", trace.name(*node)));
                }
            }
            Entry::Send(h) | Entry::Deliver(h) if h.hop > 1 && isolated.contains(&h.src) => {
                push(report, AuditKind::Isolation, i, t, format!("pkt {} from isolated {} at hop {}", h.pkt, trace.name(h.src), h.hop));
            }
            Entry::Deliver(h) if detection && h.kind == PacketKind::Data && Some(h.to) == sg => {
                if h.tag != Tag::Valid && h.tag != Tag::Invalid {
                    push(report, AuditKind::Isolation, i, t, format!("pkt {} reached the gateway untagged", h.pkt));
                }
                if dropped_by_detection.contains(&h.pkt) {
                    push(report, AuditKind::Isolation, i, t, format!("pkt {} reached the gateway after a drop", h.pkt));
                }
            }
            _ => {}
        }
    }
}
