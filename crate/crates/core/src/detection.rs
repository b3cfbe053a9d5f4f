//! Two-phase sleep-deprivation detection.
//!
//! Phase 1 runs on the sector monitor: a packet is anomalous when its sender
//! exceeded the rate threshold inside the sliding window or when it was created
//! inside the sender's sleep window; the sender of an anomalous packet is
//! suspected when its stamped residual energy is below the expected baseline.
//! Phase 2 runs on the cluster-in-charge and only confirms an intrusion when
//! the corroboration rule holds; confirmed senders go on the gateway's
//! isolation list.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::energy::{Energy, SleepSchedule};
use crate::engine::SimTime;
use crate::protocol::PacketId;
use crate::topology::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Untagged,
    Valid,
    Invalid,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Untagged => "UNTAGGED",
            Tag::Valid => "VALID",
            Tag::Invalid => "INVALID",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UNTAGGED" => Ok(Tag::Untagged),
            "VALID" => Ok(Tag::Valid),
            "INVALID" => Ok(Tag::Invalid),
            _ => Err(format!("unknown tag `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase1Reason {
    RateExceeded,
    SleepViolation,
    None,
}

impl Phase1Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase1Reason::RateExceeded => "RATE_EXCEEDED",
            Phase1Reason::SleepViolation => "SLEEP_VIOLATION",
            Phase1Reason::None => "NONE",
        }
    }
}

impl fmt::Display for Phase1Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase1Reason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RATE_EXCEEDED" => Ok(Phase1Reason::RateExceeded),
            "SLEEP_VIOLATION" => Ok(Phase1Reason::SleepViolation),
            "NONE" => Ok(Phase1Reason::None),
            _ => Err(format!("unknown phase-1 reason `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Forward,
    Drop,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Forward => "FORWARD",
            Decision::Drop => "DROP",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FORWARD" => Ok(Decision::Forward),
            "DROP" => Ok(Decision::Drop),
            _ => Err(format!("unknown decision `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionParams {
    /// Packets per window above which a sender is anomalous.
    pub rate_threshold: u32,
    /// Sliding window length in ticks.
    pub window: u64,
    /// Confirmations from repeated INVALID packets need at least this many in the window.
    pub corroboration: u32,
}

/// What the monitor knows about a sender's wake pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SenderProfile {
    Unprofiled,
    AlwaysOn,
    Duty(SleepSchedule),
}

/// Phase-1 outcome plus the evidence behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase1Verdict {
    pub tag: Tag,
    pub reason: Phase1Reason,
    pub window_count: u32,
    pub in_sleep: bool,
    pub unprofiled: bool,
    pub residual: Energy,
    /// Only evaluated for INVALID packets.
    pub threshold: Option<Energy>,
    pub suspected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionVerdict {
    pub pkt: PacketId,
    pub src: NodeId,
    pub phase1: Phase1Verdict,
    pub phase2: Decision,
    pub confirmed_intrusion: bool,
    pub cluster_invalid_count: u32,
}

/// Applies the rate and sleep-window rules. A schedule violation takes
/// precedence over a rate violation when both hold; an unprofiled sender is
/// treated as a schedule violation.
pub fn phase1_classify(
    params: &DetectionParams,
    window_count: u32,
    created_at: SimTime,
    sender: &SenderProfile,
) -> (Tag, Phase1Reason) {
    let in_sleep = match sender {
        SenderProfile::Unprofiled => true,
        SenderProfile::AlwaysOn => false,
        SenderProfile::Duty(s) => !s.is_awake(created_at),
    };
    if in_sleep {
        (Tag::Invalid, Phase1Reason::SleepViolation)
    } else if window_count > params.rate_threshold {
        (Tag::Invalid, Phase1Reason::RateExceeded)
    } else {
        (Tag::Valid, Phase1Reason::None)
    }
}

/// Strict comparison of the stamped residual against `Th_RE`.
pub fn phase1_suspect(sender_residual: Energy, threshold: Energy) -> bool {
    sender_residual < threshold
}

/// Corroboration rule at the CIC: an INVALID packet is confirmed only if its
/// sender is suspected and either the anomaly was a sleep-window violation or
/// the sender produced at least `corroboration` INVALID packets in the window.
pub fn phase2_decide(params: &DetectionParams, phase1: &Phase1Verdict, cluster_invalid_count: u32) -> (Decision, bool) {
    match phase1.tag {
        Tag::Valid | Tag::Untagged => (Decision::Forward, false),
        Tag::Invalid => {
            let corroborated =
                phase1.reason == Phase1Reason::SleepViolation || cluster_invalid_count >= params.corroboration;
            if phase1.suspected && corroborated {
                (Decision::Drop, true)
            } else {
                (Decision::Forward, false)
            }
        }
    }
}

/// Per-(observer, sender) counts of packets seen within `(t - window, t]`.
#[derive(Debug, Clone, Default)]
pub struct WindowCounter {
    window: u64,
    seen: HashMap<(NodeId, NodeId), VecDeque<SimTime>>,
}

impl WindowCounter {
    pub fn new(window: u64) -> Self {
        WindowCounter {
            window,
            seen: HashMap::new(),
        }
    }

    /// Records one observation at `t` and returns the count including it.
    pub fn record(&mut self, observer: NodeId, sender: NodeId, t: SimTime) -> u32 {
        let q = self.seen.entry((observer, sender)).or_default();
        q.push_back(t);
        while q.front().is_some_and(|&f| f + self.window <= t) {
            q.pop_front();
        }
        q.len() as u32
    }

    pub fn count(&self, observer: NodeId, sender: NodeId, t: SimTime) -> u32 {
        self.seen
            .get(&(observer, sender))
            .map_or(0, |q| q.iter().filter(|&&s| s + self.window > t && s <= t).count() as u32)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectionError {
    #[error("refusing to isolate the sink gateway {0}")]
    IsolateSink(NodeId),
    #[error("verdict for packet {0} does not confirm an intrusion")]
    NotConfirmed(PacketId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IsolationEntry {
    pub tick: SimTime,
    pub verdict: PacketId,
}

/// Append-only list kept by the gateway.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IsolationList {
    entries: BTreeMap<NodeId, IsolationEntry>,
}

impl IsolationList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `Ok(true)` if the node was newly added.
    pub fn isolate(&mut self, sg: NodeId, verdict: &DetectionVerdict, tick: SimTime) -> Result<bool, DetectionError> {
        if !verdict.confirmed_intrusion {
            return Err(DetectionError::NotConfirmed(verdict.pkt));
        }
        if verdict.src == sg {
            return Err(DetectionError::IsolateSink(sg));
        }
        if self.entries.contains_key(&verdict.src) {
            return Ok(false);
        }
        self.entries.insert(
            verdict.src,
            IsolationEntry {
                tick,
                verdict: verdict.pkt,
            },
        );
        Ok(true)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.entries.contains_key(&node)
    }

    pub fn get(&self, node: NodeId) -> Option<&IsolationEntry> {
        self.entries.get(&node)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &IsolationEntry)> {
        self.entries.iter().map(|(n, e)| (*n, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: DetectionParams = DetectionParams {
        rate_threshold: 10,
        window: 20,
        corroboration: 3,
    };

    fn leaf() -> SenderProfile {
        SenderProfile::Duty(SleepSchedule::new(20, 0, 5).unwrap())
    }

    fn verdict(tag: Tag, reason: Phase1Reason, suspected: bool) -> Phase1Verdict {
        Phase1Verdict {
            tag,
            reason,
            window_count: 1,
            in_sleep: reason == Phase1Reason::SleepViolation,
            unprofiled: false,
            residual: Energy::ZERO,
            threshold: None,
            suspected,
        }
    }

    #[test]
    fn sleep_window_packet_is_invalid() {
        assert_eq!(phase1_classify(&PARAMS, 1, 12, &leaf()), (Tag::Invalid, Phase1Reason::SleepViolation));
        assert_eq!(phase1_classify(&PARAMS, 1, 2, &leaf()), (Tag::Valid, Phase1Reason::None));
    }

    #[test]
    fn rate_threshold_is_exclusive() {
        assert_eq!(phase1_classify(&PARAMS, 10, 2, &leaf()), (Tag::Valid, Phase1Reason::None));
        assert_eq!(phase1_classify(&PARAMS, 11, 2, &leaf()), (Tag::Invalid, Phase1Reason::RateExceeded));
    }

    #[test]
    fn unprofiled_sender_is_conservatively_invalid() {
        assert_eq!(
            phase1_classify(&PARAMS, 1, 2, &SenderProfile::Unprofiled),
            (Tag::Invalid, Phase1Reason::SleepViolation)
        );
        assert_eq!(phase1_classify(&PARAMS, 1, 17, &SenderProfile::AlwaysOn), (Tag::Valid, Phase1Reason::None));
    }

    #[test]
    fn suspicion_is_strict() {
        assert!(phase1_suspect(Energy::from_units(30.0), Energy::from_units(40.0)));
        assert!(!phase1_suspect(Energy::from_units(40.0), Energy::from_units(40.0)));
        assert!(!phase1_suspect(Energy::from_units(50.0), Energy::from_units(40.0)));
    }

    #[test]
    fn phase2_rule() {
        // suspected sleep violation: drop on first sight
        let v = verdict(Tag::Invalid, Phase1Reason::SleepViolation, true);
        assert_eq!(phase2_decide(&PARAMS, &v, 1), (Decision::Drop, true));
        // valid: forward
        let v = verdict(Tag::Valid, Phase1Reason::None, false);
        assert_eq!(phase2_decide(&PARAMS, &v, 0), (Decision::Forward, false));
        // rate burst from a healthy node: reclassified
        let v = verdict(Tag::Invalid, Phase1Reason::RateExceeded, false);
        assert_eq!(phase2_decide(&PARAMS, &v, 5), (Decision::Forward, false));
        // suspected rate burst needs repetition
        let v = verdict(Tag::Invalid, Phase1Reason::RateExceeded, true);
        assert_eq!(phase2_decide(&PARAMS, &v, 2), (Decision::Forward, false));
        assert_eq!(phase2_decide(&PARAMS, &v, 3), (Decision::Drop, true));
        // unsuspected sleep violation is not confirmed
        let v = verdict(Tag::Invalid, Phase1Reason::SleepViolation, false);
        assert_eq!(phase2_decide(&PARAMS, &v, 9), (Decision::Forward, false));
    }

    #[test]
    fn window_counter_matches_recount() {
        let mut c = WindowCounter::new(20);
        let (obs, src) = (NodeId(1), NodeId(2));
        let ticks = [0u64, 3, 3, 10, 19, 20, 22, 40, 41, 70];
        let mut log = Vec::new();
        for &t in &ticks {
            log.push(t);
            let brute = log.iter().filter(|&&s| s + 20 > t && s <= t).count() as u32;
            assert_eq!(c.record(obs, src, t), brute, "t={t}");
            assert_eq!(c.count(obs, src, t), brute);
        }
        assert_eq!(c.count(NodeId(9), src, 70), 0);
    }

    #[test]
    fn isolation_is_idempotent_and_refuses_sink() {
        let mut list = IsolationList::new();
        let v = DetectionVerdict {
            pkt: PacketId(7),
            src: NodeId(3),
            phase1: verdict(Tag::Invalid, Phase1Reason::SleepViolation, true),
            phase2: Decision::Drop,
            confirmed_intrusion: true,
            cluster_invalid_count: 1,
        };
        assert_eq!(list.isolate(NodeId(0), &v, 5), Ok(true));
        assert_eq!(list.isolate(NodeId(0), &v, 9), Ok(false));
        assert_eq!(list.len(), 1);
        assert_eq!(list.get(NodeId(3)).unwrap().tick, 5);
        let sink = DetectionVerdict { src: NodeId(0), ..v };
        assert_eq!(list.isolate(NodeId(0), &sink, 9), Err(DetectionError::IsolateSink(NodeId(0))));
        let weak = DetectionVerdict { confirmed_intrusion: false, ..v };
        assert!(list.isolate(NodeId(0), &weak, 9).is_err());
    }
}
