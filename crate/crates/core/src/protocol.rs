//! Message pipeline: discovery and profiles, collection rounds, hop-by-hop
//! forwarding toward the gateway, sleep signals for late arrivals.
//!
//! The handlers live on [`World`]; this module owns the packet types and the
//! per-hop rules.

use std::fmt;
use std::str::FromStr;

use crate::detection::{
    phase1_classify, phase1_suspect, phase2_decide, Decision, DetectionVerdict, Phase1Verdict, SenderProfile, Tag,
};
use crate::energy::{Action, Debit, Energy, PowerMode, SleepSchedule};
use crate::engine::SimTime;
use crate::roles::{form_hierarchy, ElectionView, Role};
use crate::sim::{Event, World};
use crate::topology::NodeId;
use crate::trace::{DropReason, Entry, HopRecord, ProfileRecord, SleepCause};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for PacketId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(PacketId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Query,
    StatusResponse,
    StatusProfile,
    DataRequest,
    Data,
    SleepSignal,
    FakeRequest,
}

impl PacketKind {
    pub const ALL: [PacketKind; 7] = [
        PacketKind::Query,
        PacketKind::StatusResponse,
        PacketKind::StatusProfile,
        PacketKind::DataRequest,
        PacketKind::Data,
        PacketKind::SleepSignal,
        PacketKind::FakeRequest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Query => "QUERY",
            PacketKind::StatusResponse => "STATUS_RESPONSE",
            PacketKind::StatusProfile => "STATUS_PROFILE",
            PacketKind::DataRequest => "DATA_REQUEST",
            PacketKind::Data => "DATA",
            PacketKind::SleepSignal => "SLEEP_SIGNAL",
            PacketKind::FakeRequest => "FAKE_REQUEST",
        }
    }

    /// Whether a monitor's rate counter sees this kind.
    pub fn counts_toward_rate(self) -> bool {
        self != PacketKind::SleepSignal
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PacketKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PacketKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown packet kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: PacketId,
    pub kind: PacketKind,
    pub src: NodeId,
    pub created_at: SimTime,
    /// Residual of `src` when the packet was built.
    pub sender_residual: Energy,
    pub tag: Tag,
    pub phase1: Option<Phase1Verdict>,
}

/// A packet on the air between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub packet: Packet,
    pub from: NodeId,
    pub to: NodeId,
    pub hop: u32,
    /// Role the receiver was addressed in; `None` for direct messages.
    pub expect: Option<Role>,
}

impl Hop {
    pub fn record(&self) -> HopRecord {
        HopRecord {
            pkt: self.packet.id,
            kind: self.packet.kind,
            src: self.packet.src,
            from: self.from,
            to: self.to,
            hop: self.hop,
            created: self.packet.created_at,
            residual: self.packet.sender_residual,
            tag: self.packet.tag,
        }
    }
}

/// What the gateway hands a node after discovery.
#[derive(Debug, Clone, PartialEq)]
pub struct StatusProfile {
    pub node: NodeId,
    pub role: Role,
    /// `None` for always-on roles.
    pub schedule: Option<SleepSchedule>,
    pub class: usize,
    pub issued_at: SimTime,
}

impl StatusProfile {
    pub fn sender_profile(&self) -> SenderProfile {
        self.schedule.map_or(SenderProfile::AlwaysOn, SenderProfile::Duty)
    }
}

impl World {
    pub(crate) fn next_packet(&mut self, kind: PacketKind, src: NodeId, t: SimTime) -> Packet {
        let id = PacketId(self.next_pkt);
        self.next_pkt += 1;
        Packet {
            id,
            kind,
            src,
            created_at: t,
            sender_residual: self.nodes[src.index()].energy.residual(),
            tag: Tag::Untagged,
            phase1: None,
        }
    }

    /// Charges the sender, logs the hop and schedules its delivery. Returns
    /// `false` if the sender died while transmitting.
    pub(crate) fn transmit(&mut self, hop: Hop, t: SimTime) -> bool {
        if self.charge(hop.from, Action::Transmit, t) == ChargeOutcome::Died {
            return false;
        }
        self.log(t, Entry::Send(hop.record()));
        let at = t + self.protocol.hop_latency;
        self.schedule(at, Event::Deliver(hop));
        true
    }

    /// Forwards `packet` from `from` to its parent in the role tree.
    fn forward_up(&mut self, packet: Packet, from: NodeId, hop: u32, t: SimTime) {
        if self.isolation.contains(packet.src) {
            self.log(t, Entry::Note { node: from, what: format!("packet {} from isolated source held", packet.id) });
            return;
        }
        let Some((to, role)) = self.parent_of(from) else {
            self.log(t, Entry::Note { node: from, what: format!("no route for packet {}", packet.id) });
            return;
        };
        self.transmit(Hop { packet, from, to, hop: hop + 1, expect: Some(role) }, t);
    }

    pub(crate) fn parent_of(&self, node: NodeId) -> Option<(NodeId, Role)> {
        let h = self.hierarchy.as_ref()?;
        let a = self.assignments[node.index()]?;
        let up = h.upstream(&a)?;
        let role = self.assignments[up.index()]?.role;
        Some((up, role))
    }

    pub(crate) fn role_of(&self, node: NodeId) -> Option<Role> {
        self.assignments[node.index()].map(|a| a.role)
    }

    /// Gateway query, elections and profile issue.
    pub(crate) fn discover(&mut self, t: SimTime) {
        let n = self.nodes.len();
        let sg = self.sg;
        let participants: Vec<NodeId> = (0..n)
            .map(|i| NodeId(i as u32))
            .filter(|&id| {
                let s = &self.nodes[id.index()];
                id != sg && !s.spec.attacker && s.arrived && !s.energy.is_dead() && !self.isolation.contains(id)
            })
            .collect();
        self.log(t, Entry::Query { sg, participants: participants.len() });
        self.profiles.iter_mut().for_each(|p| *p = None);
        self.pending.clear();

        let mut responded = vec![false; n];
        for &id in &participants {
            if self.charge(id, Action::Receive, t) == ChargeOutcome::Died {
                continue;
            }
            if self.charge(id, Action::Transmit, t) == ChargeOutcome::Died {
                continue;
            }
            self.charge(sg, Action::Receive, t);
            responded[id.index()] = true;
        }

        let present: Vec<bool> = self
            .nodes
            .iter()
            .map(|s| !s.spec.attacker && s.arrived && !s.energy.is_dead())
            .collect();
        let energies: Vec<Energy> = self.nodes.iter().map(|s| s.energy.residual()).collect();
        let (responses, h) = {
            let view = ElectionView {
                graph: &self.graph,
                positions: &self.positions,
                tiers: &self.tiers,
                energies: &energies,
                present: &present,
                eligible: &responded,
            };
            let responses: Vec<(NodeId, usize)> =
                participants.iter().filter(|id| responded[id.index()]).map(|&id| (id, view.live_degree(id))).collect();
            (responses, form_hierarchy(&view, sg, self.roles.clusters, self.roles.sectors_per_cluster, t))
        };
        for (id, degree) in responses {
            self.log(t, Entry::Response { node: id, residual: energies[id.index()], degree });
        }

        for r in &h.records {
            self.log(t, Entry::Elect(r.clone()));
        }
        if let Some(e) = &h.halted {
            self.log(t, Entry::Halt { sg, reason: e.to_string() });
        }
        if h.sic_shortfall > 0 {
            self.log(t, Entry::Note { node: sg, what: format!("sic shortfall {}", h.sic_shortfall) });
        }

        self.assignments = h.assignments(n);
        self.hierarchy = if h.halted.is_some() { None } else { Some(h) };
        if self.hierarchy.is_none() {
            self.assignments.iter_mut().enumerate().for_each(|(i, a)| {
                if i != sg.index() {
                    *a = None;
                }
            });
        }

        for &id in &participants {
            let i = id.index();
            if !responded[i] || self.nodes[i].energy.is_dead() {
                continue;
            }
            let assignment = self.assignments[i];
            let schedule = match assignment.map(|a| a.role) {
                Some(Role::ClusterInCharge) => None,
                Some(Role::SectorInCharge | Role::SectorMonitor) => Some(self.sector_schedule),
                _ => self.own_schedule(id),
            };
            let mode = schedule.map_or(PowerMode::AlwaysOn, PowerMode::Duty);
            self.set_mode(id, mode, t);
            let Some(a) = assignment else {
                continue;
            };
            if self.charge(sg, Action::Transmit, t) == ChargeOutcome::Died
                || self.charge(id, Action::Receive, t) == ChargeOutcome::Died
            {
                continue;
            }
            let parent = self.parent_of(id).map(|(p, _)| p);
            let profile = StatusProfile { node: id, role: a.role, schedule, class: self.nodes[i].spec.class, issued_at: t };
            self.log(
                t,
                Entry::Profile(ProfileRecord {
                    node: id,
                    role: a.role,
                    schedule,
                    class: self.classes[profile.class].name.clone(),
                    parent,
                    cluster: Some(a.cluster),
                    sector: a.sector,
                }),
            );
            self.profiles[i] = Some(profile);
        }
    }

    /// Each CIC asks each of its SICs for data.
    pub(crate) fn collect_round(&mut self, t: SimTime) {
        let Some(h) = &self.hierarchy else {
            return;
        };
        let requests: Vec<(NodeId, NodeId)> = h
            .clusters
            .iter()
            .flat_map(|c| c.sectors.iter().map(move |s| (c.cic, s.sic)))
            .collect();
        for (cic, sic) in requests {
            if !self.settle_alive(cic, t) {
                continue;
            }
            let packet = self.next_packet(PacketKind::DataRequest, cic, t);
            self.transmit(Hop { packet, from: cic, to: sic, hop: 1, expect: Some(Role::SectorInCharge) }, t);
        }
    }

    pub(crate) fn send_sleep_signal(&mut self, node: NodeId, t: SimTime) {
        let sg = self.sg;
        let packet = self.next_packet(PacketKind::SleepSignal, sg, t);
        self.transmit(Hop { packet, from: sg, to: node, hop: 1, expect: None }, t);
    }

    pub(crate) fn deliver(&mut self, hop: Hop, t: SimTime) {
        let to = hop.to;
        let src = hop.packet.src;
        let drop = |w: &mut World, reason| w.log(t, Entry::Drop { hop: hop.record(), reason });

        if !self.settle_alive(to, t) {
            return drop(self, DropReason::DeadReceiver);
        }
        if hop.packet.kind == PacketKind::FakeRequest && self.isolation.contains(to) {
            return drop(self, DropReason::TargetIsolated);
        }
        if self.isolation.contains(src) {
            self.charge(to, Action::Receive, t);
            return drop(self, DropReason::Isolated);
        }
        if hop.packet.kind == PacketKind::DataRequest && !self.is_awake(to, t) {
            return drop(self, DropReason::Asleep);
        }
        if let Some(role) = hop.expect {
            if self.role_of(to) != Some(role) {
                self.charge(to, Action::Receive, t);
                return drop(self, DropReason::StaleRoute);
            }
        }

        let woke = hop.packet.kind == PacketKind::FakeRequest && !self.is_awake(to, t);
        if self.charge(to, Action::Receive, t) == ChargeOutcome::Died {
            return;
        }
        self.log(t, Entry::Deliver(hop.record()));
        if hop.packet.kind.counts_toward_rate() {
            self.window.record(to, src, t);
        }

        match hop.packet.kind {
            PacketKind::DataRequest => self.on_data_request(hop, t),
            PacketKind::Data => self.on_data(hop, t),
            PacketKind::FakeRequest => self.on_fake_request(hop, woke, t),
            PacketKind::SleepSignal => {
                self.set_mode(to, PowerMode::Asleep, t);
                self.log(t, Entry::Sleep { node: to, cause: SleepCause::Signal });
            }
            PacketKind::Query | PacketKind::StatusResponse | PacketKind::StatusProfile => {}
        }
    }

    fn on_data_request(&mut self, hop: Hop, t: SimTime) {
        let to = hop.to;
        match self.role_of(to) {
            Some(Role::SectorInCharge) => {
                let Some(a) = self.assignments[to.index()] else {
                    return;
                };
                let leaves: Vec<NodeId> = self
                    .hierarchy
                    .as_ref()
                    .and_then(|h| h.sector(&a))
                    .map(|s| s.leaves.clone())
                    .unwrap_or_default();
                for leaf in leaves {
                    if self.isolation.contains(leaf) {
                        continue;
                    }
                    if !self.transmit(Hop { packet: hop.packet, from: to, to: leaf, hop: hop.hop + 1, expect: Some(Role::LeafNode) }, t) {
                        break;
                    }
                }
            }
            Some(Role::LeafNode) => self.respond_with_data(to, t),
            _ => {}
        }
    }

    fn on_fake_request(&mut self, hop: Hop, woke: bool, t: SimTime) {
        let to = hop.to;
        if woke {
            let len = self.wake_len(to);
            let amount = self.costs.idle_listen.times(len);
            let until = t + len;
            self.nodes[to.index()].forced_until = until;
            if self.charge_amount(to, Action::Wake, amount, t) == ChargeOutcome::Died {
                return;
            }
            let s = &mut self.nodes[to.index()];
            s.settled_at = s.settled_at.max(until);
            self.log(t, Entry::Wake { node: to, cause: hop.packet.id, until });
            self.schedule(until, Event::SleepStart { node: to, at: until });
        }
        if matches!(self.role_of(to), Some(Role::LeafNode | Role::SectorInCharge | Role::SectorMonitor)) {
            self.respond_with_data(to, t);
        }
    }

    fn respond_with_data(&mut self, node: NodeId, t: SimTime) {
        if self.charge(node, Action::Sense, t) == ChargeOutcome::Died {
            return;
        }
        let packet = self.next_packet(PacketKind::Data, node, t);
        self.forward_up(packet, node, 0, t);
    }

    fn on_data(&mut self, hop: Hop, t: SimTime) {
        let to = hop.to;
        let mut packet = hop.packet;
        let Some(role) = self.role_of(to) else {
            return;
        };
        match role {
            Role::SinkGateway => {}
            Role::SectorInCharge => self.forward_up(packet, to, hop.hop, t),
            Role::SectorMonitor => {
                if self.detection_enabled {
                    if self.charge(to, Action::Detect, t) == ChargeOutcome::Died {
                        return;
                    }
                    self.tag_packet(to, &mut packet, t);
                }
                self.forward_up(packet, to, hop.hop, t);
            }
            Role::ClusterInCharge => {
                if self.detection_enabled {
                    if self.charge(to, Action::Detect, t) == ChargeOutcome::Died {
                        return;
                    }
                    if packet.tag == Tag::Untagged {
                        self.tag_packet(to, &mut packet, t);
                    }
                    if !self.decide(to, &packet, &hop, t) {
                        return;
                    }
                }
                self.forward_up(packet, to, hop.hop, t);
            }
            Role::LeafNode => {}
        }
    }

    /// Phase 1 at `tagger`.
    fn tag_packet(&mut self, tagger: NodeId, packet: &mut Packet, t: SimTime) {
        let src = packet.src;
        let profile = self.profiles[src.index()]
            .as_ref()
            .map_or(SenderProfile::Unprofiled, StatusProfile::sender_profile);
        let count = self.window.count(tagger, src, t);
        let (tag, reason) = phase1_classify(&self.detection, count, packet.created_at, &profile);
        let in_sleep = match profile {
            SenderProfile::Unprofiled => true,
            SenderProfile::AlwaysOn => false,
            SenderProfile::Duty(s) => !s.is_awake(packet.created_at),
        };
        let threshold = (tag == Tag::Invalid).then(|| self.threshold_re(src, packet.created_at));
        let suspected = threshold.is_some_and(|th| phase1_suspect(packet.sender_residual, th));
        let verdict = Phase1Verdict {
            tag,
            reason,
            window_count: count,
            in_sleep,
            unprofiled: profile == SenderProfile::Unprofiled,
            residual: packet.sender_residual,
            threshold,
            suspected,
        };
        packet.tag = tag;
        packet.phase1 = Some(verdict);
        self.log(t, Entry::Tag { tagger, pkt: packet.id, src, created: packet.created_at, verdict });
    }

    /// Phase 2 at the CIC. Returns whether the packet continues to the gateway.
    fn decide(&mut self, cic: NodeId, packet: &Packet, hop: &Hop, t: SimTime) -> bool {
        let Some(phase1) = packet.phase1 else {
            return true;
        };
        let invalid_count = if phase1.tag == Tag::Invalid {
            self.invalid_window.record(cic, packet.src, t)
        } else {
            self.invalid_window.count(cic, packet.src, t)
        };
        let (decision, confirmed) = phase2_decide(&self.detection, &phase1, invalid_count);
        self.log(
            t,
            Entry::Decide {
                cic,
                pkt: packet.id,
                src: packet.src,
                tag: packet.tag,
                decision,
                confirmed,
                invalid_count,
            },
        );
        if decision == Decision::Forward {
            return true;
        }
        self.log(t, Entry::Drop { hop: Hop { packet: *packet, ..*hop }.record(), reason: DropReason::Detection });
        if confirmed {
            let verdict = DetectionVerdict {
                pkt: packet.id,
                src: packet.src,
                phase1,
                phase2: decision,
                confirmed_intrusion: confirmed,
                cluster_invalid_count: invalid_count,
            };
            self.report_intrusion(cic, &verdict, t);
        }
        false
    }

    fn report_intrusion(&mut self, cic: NodeId, verdict: &DetectionVerdict, t: SimTime) {
        let sg = self.sg;
        self.charge(cic, Action::Transmit, t);
        self.charge(sg, Action::Receive, t);
        match self.isolation.isolate(sg, verdict, t) {
            Ok(true) => self.log(t, Entry::Isolate { node: verdict.src, verdict: verdict.pkt, by: cic }),
            Ok(false) => {}
            Err(e) => self.log(t, Entry::Note { node: sg, what: e.to_string() }),
        }
    }
}

/// Result of a single debit as seen by the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ChargeOutcome {
    Charged,
    Died,
}

impl From<Debit> for ChargeOutcome {
    fn from(d: Debit) -> Self {
        match d {
            Debit::Charged(_) => ChargeOutcome::Charged,
            Debit::Died(_) | Debit::Ignored => ChargeOutcome::Died,
        }
    }
}
