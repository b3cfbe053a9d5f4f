//! Role taxonomy, CIC / SIC / SM election, sector formation and rotation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{Energy, PPM};
use crate::engine::SimTime;
use crate::topology::{NeighborGraph, NodeId, Position};

/// Hardware capability class of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Sink,
    /// May serve as CIC, SIC or SM.
    Head,
    /// May serve as SIC or SM.
    Relay,
    Leaf,
}

impl Tier {
    pub fn can_head(self) -> bool {
        self == Tier::Head
    }

    pub fn can_sector(self) -> bool {
        matches!(self, Tier::Head | Tier::Relay)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Sink => "sink",
            Tier::Head => "head",
            Tier::Relay => "relay",
            Tier::Leaf => "leaf",
        }
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sink" => Ok(Tier::Sink),
            "head" => Ok(Tier::Head),
            "relay" => Ok(Tier::Relay),
            "leaf" => Ok(Tier::Leaf),
            _ => Err(format!("unknown tier `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    SinkGateway,
    ClusterInCharge,
    SectorMonitor,
    SectorInCharge,
    LeafNode,
}

impl Role {
    pub fn layer(self) -> u8 {
        match self {
            Role::SinkGateway => 4,
            Role::ClusterInCharge => 3,
            Role::SectorMonitor | Role::SectorInCharge => 2,
            Role::LeafNode => 1,
        }
    }

    /// Phase-1 anomaly detector active.
    pub fn runs_anomaly_detector(self) -> bool {
        matches!(self, Role::SectorMonitor | Role::ClusterInCharge)
    }

    /// Phase-2 decision maker active.
    pub fn runs_decision_maker(self) -> bool {
        self == Role::ClusterInCharge
    }

    pub fn abbrev(self) -> &'static str {
        match self {
            Role::SinkGateway => "SG",
            Role::ClusterInCharge => "CIC",
            Role::SectorMonitor => "SM",
            Role::SectorInCharge => "SIC",
            Role::LeafNode => "LN",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SG" => Ok(Role::SinkGateway),
            "CIC" => Ok(Role::ClusterInCharge),
            "SM" => Ok(Role::SectorMonitor),
            "SIC" => Ok(Role::SectorInCharge),
            "LN" => Ok(Role::LeafNode),
            _ => Err(format!("unknown role `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub node: NodeId,
    pub energy: Energy,
    pub degree: usize,
    /// Distance to the CIC; only recorded for SM elections.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectionRecord {
    pub tick: SimTime,
    pub role: Role,
    pub cluster: usize,
    pub sector: Option<usize>,
    pub winner: NodeId,
    pub candidates: Vec<Candidate>,
}

/// CIC ordering: higher energy, then higher degree, then lower id.
pub fn cic_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.energy
        .cmp(&b.energy)
        .then(a.degree.cmp(&b.degree))
        .then(b.node.cmp(&a.node))
}

/// SIC ordering: higher energy, then lower id.
pub fn sic_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.energy.cmp(&b.energy).then(b.node.cmp(&a.node))
}

/// SM ordering: smaller distance to the CIC, then lower id (greater = better).
pub fn sm_order(a: &Candidate, b: &Candidate) -> Ordering {
    let da = a.distance.unwrap_or(f64::INFINITY);
    let db = b.distance.unwrap_or(f64::INFINITY);
    db.total_cmp(&da).then(b.node.cmp(&a.node))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElectionError {
    #[error("sink gateway {0} has no eligible neighbor to serve as cluster-in-charge")]
    NoEligibleCic(NodeId),
}

/// Snapshot of everything an election looks at.
#[derive(Debug, Clone, Copy)]
pub struct ElectionView<'a> {
    pub graph: &'a NeighborGraph,
    pub positions: &'a [Position],
    pub tiers: &'a [Tier],
    pub energies: &'a [Energy],
    /// Alive and in the network; counts toward degree.
    pub present: &'a [bool],
    /// May be elected or assigned (alive, responded, not isolated).
    pub eligible: &'a [bool],
}

impl ElectionView<'_> {
    fn neighbors(&self, n: NodeId) -> &[NodeId] {
        self.graph.neighbors(n).unwrap_or(&[])
    }

    pub fn live_degree(&self, n: NodeId) -> usize {
        self.neighbors(n).iter().filter(|m| self.present[m.index()]).count()
    }

    fn candidate(&self, n: NodeId, distance: Option<f64>) -> Candidate {
        Candidate {
            node: n,
            energy: self.energies[n.index()],
            degree: self.live_degree(n),
            distance,
        }
    }
}

fn best_by(candidates: &[Candidate], order: fn(&Candidate, &Candidate) -> Ordering) -> Option<NodeId> {
    candidates.iter().max_by(|a, b| order(a, b)).map(|c| c.node)
}

/// Elects a CIC among the SG's eligible, head-capable, unclaimed neighbors.
pub fn elect_cic(
    view: &ElectionView<'_>,
    sg: NodeId,
    claimed: &[bool],
    cluster: usize,
    tick: SimTime,
) -> Result<ElectionRecord, ElectionError> {
    let candidates: Vec<Candidate> = view
        .neighbors(sg)
        .iter()
        .copied()
        .filter(|n| view.eligible[n.index()] && !claimed[n.index()] && view.tiers[n.index()].can_head())
        .map(|n| view.candidate(n, None))
        .collect();
    let winner = best_by(&candidates, cic_order).ok_or(ElectionError::NoEligibleCic(sg))?;
    Ok(ElectionRecord {
        tick,
        role: Role::ClusterInCharge,
        cluster,
        sector: None,
        winner,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    pub sic: NodeId,
    pub sm: Option<NodeId>,
    pub leaves: Vec<NodeId>,
}

impl Sector {
    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.sic).chain(self.sm).chain(self.leaves.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SicElection {
    pub records: Vec<ElectionRecord>,
    /// `(sic, members excluding the sic)` in election order.
    pub sectors: Vec<(NodeId, Vec<NodeId>)>,
    /// How many of the requested `k` SICs could not be elected.
    pub shortfall: usize,
}

/// Elects up to `k` SICs from the cluster and claims their sectors greedily in election order.
pub fn elect_sics(
    view: &ElectionView<'_>,
    cic: NodeId,
    cluster_members: &[NodeId],
    k: usize,
    cluster: usize,
    tick: SimTime,
) -> SicElection {
    let mut pool: Vec<Candidate> = cluster_members
        .iter()
        .copied()
        .filter(|n| view.tiers[n.index()].can_sector() && view.eligible[n.index()])
        .map(|n| view.candidate(n, None))
        .collect();
    let mut records = Vec::new();
    while records.len() < k {
        let Some(winner) = best_by(&pool, sic_order) else {
            break;
        };
        records.push(ElectionRecord {
            tick,
            role: Role::SectorInCharge,
            cluster,
            sector: Some(records.len()),
            winner,
            candidates: pool.clone(),
        });
        pool.retain(|c| c.node != winner);
    }
    let shortfall = k - records.len();

    let mut claimed: Vec<NodeId> = std::iter::once(cic).chain(records.iter().map(|r| r.winner)).collect();
    let mut sectors = Vec::with_capacity(records.len());
    for r in &records {
        let members: Vec<NodeId> = view
            .neighbors(r.winner)
            .iter()
            .copied()
            .filter(|n| cluster_members.contains(n) && !claimed.contains(n))
            .collect();
        claimed.extend(members.iter().copied());
        sectors.push((r.winner, members));
    }
    SicElection {
        records,
        sectors,
        shortfall,
    }
}

/// Elects the sector member nearest to the CIC (adjacent to it, layer-2 capable, not the SIC).
pub fn elect_sm(
    view: &ElectionView<'_>,
    sic: NodeId,
    members: &[NodeId],
    cic: NodeId,
    cluster: usize,
    sector: usize,
    tick: SimTime,
) -> Option<ElectionRecord> {
    let cic_pos = view.positions[cic.index()];
    let candidates: Vec<Candidate> = members
        .iter()
        .copied()
        .filter(|&n| n != sic && view.graph.is_adjacent(n, cic) && view.tiers[n.index()].can_sector())
        .map(|n| view.candidate(n, Some(view.positions[n.index()].distance(&cic_pos))))
        .collect();
    let winner = best_by(&candidates, sm_order)?;
    Some(ElectionRecord {
        tick,
        role: Role::SectorMonitor,
        cluster,
        sector: Some(sector),
        winner,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub cic: NodeId,
    /// Cluster members other than the CIC, including those left outside every sector.
    pub members: Vec<NodeId>,
    pub sectors: Vec<Sector>,
}

impl Cluster {
    pub fn all_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.cic).chain(self.members.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    pub role: Role,
    pub cluster: usize,
    pub sector: Option<usize>,
}

/// The elected role tree rooted at the SG.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub sg: NodeId,
    pub tick: SimTime,
    pub clusters: Vec<Cluster>,
    pub records: Vec<ElectionRecord>,
    /// Set when not even one CIC could be elected.
    pub halted: Option<ElectionError>,
    pub sic_shortfall: usize,
}

impl Hierarchy {
    pub fn assignments(&self, node_count: usize) -> Vec<Option<Assignment>> {
        let mut out = vec![None; node_count];
        out[self.sg.index()] = Some(Assignment {
            role: Role::SinkGateway,
            cluster: usize::MAX,
            sector: None,
        });
        for (ci, c) in self.clusters.iter().enumerate() {
            out[c.cic.index()] = Some(Assignment {
                role: Role::ClusterInCharge,
                cluster: ci,
                sector: None,
            });
            for (si, s) in c.sectors.iter().enumerate() {
                let mut put = |n: NodeId, role| {
                    out[n.index()] = Some(Assignment {
                        role,
                        cluster: ci,
                        sector: Some(si),
                    })
                };
                put(s.sic, Role::SectorInCharge);
                if let Some(sm) = s.sm {
                    put(sm, Role::SectorMonitor);
                }
                for &l in &s.leaves {
                    put(l, Role::LeafNode);
                }
            }
        }
        out
    }

    pub fn sector(&self, a: &Assignment) -> Option<&Sector> {
        self.clusters.get(a.cluster)?.sectors.get(a.sector?)
    }

    /// Parent of a node in the tree rooted at the SG.
    pub fn upstream(&self, a: &Assignment) -> Option<NodeId> {
        match a.role {
            Role::SinkGateway => None,
            Role::ClusterInCharge => Some(self.sg),
            Role::SectorMonitor => Some(self.clusters.get(a.cluster)?.cic),
            Role::SectorInCharge => {
                let s = self.sector(a)?;
                Some(s.sm.unwrap_or(self.clusters[a.cluster].cic))
            }
            Role::LeafNode => Some(self.sector(a)?.sic),
        }
    }
}

/// Builds the full role tree: `cluster_count` CICs, `k` sectors each, one SM per sector.
pub fn form_hierarchy(
    view: &ElectionView<'_>,
    sg: NodeId,
    cluster_count: usize,
    k: usize,
    tick: SimTime,
) -> Hierarchy {
    let n = view.tiers.len();
    let mut claimed = vec![false; n];
    claimed[sg.index()] = true;
    let mut h = Hierarchy {
        sg,
        tick,
        clusters: Vec::new(),
        records: Vec::new(),
        halted: None,
        sic_shortfall: 0,
    };
    for ci in 0..cluster_count {
        let rec = match elect_cic(view, sg, &claimed, ci, tick) {
            Ok(r) => r,
            Err(e) => {
                if ci == 0 {
                    h.halted = Some(e);
                }
                break;
            }
        };
        let cic = rec.winner;
        h.records.push(rec);
        claimed[cic.index()] = true;
        let members: Vec<NodeId> = view
            .neighbors(cic)
            .iter()
            .copied()
            .filter(|m| view.eligible[m.index()] && !claimed[m.index()])
            .collect();
        for m in &members {
            claimed[m.index()] = true;
        }

        let sics = elect_sics(view, cic, &members, k, ci, tick);
        h.sic_shortfall += sics.shortfall;
        h.records.extend(sics.records.iter().cloned());
        let mut sectors = Vec::new();
        for (si, (sic, sec_members)) in sics.sectors.into_iter().enumerate() {
            let sm_rec = elect_sm(view, sic, &sec_members, cic, ci, si, tick);
            let sm = sm_rec.as_ref().map(|r| r.winner);
            h.records.extend(sm_rec);
            let leaves = sec_members.into_iter().filter(|&m| Some(m) != sm).collect();
            sectors.push(Sector { sic, sm, leaves });
        }
        h.clusters.push(Cluster {
            cic,
            members,
            sectors,
        });
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RotationTrigger {
    /// Holder's residual fell below `ratio * mean` of its cluster's alive members.
    LowEnergy { node: NodeId, role: Role },
    /// Holder died or was isolated.
    HolderLost { node: NodeId, role: Role },
    /// An isolated node is still placed in a sector.
    IsolatedMember { node: NodeId },
    /// A newly arrived node has not been through discovery yet.
    PendingArrival { node: NodeId },
    /// No role tree is in place.
    NoHierarchy,
}

#[derive(Debug, Clone, Copy)]
pub struct RotationState<'a> {
    pub hierarchy: Option<&'a Hierarchy>,
    pub residuals: &'a [Energy],
    pub alive: &'a [bool],
    pub isolated: &'a [bool],
    pub pending: &'a [NodeId],
    pub ratio_ppm: u32,
}

/// Lists every reason the role tree must be rebuilt at this election tick.
pub fn rotation_triggers(state: &RotationState<'_>) -> Vec<RotationTrigger> {
    let mut out: Vec<RotationTrigger> = state
        .pending
        .iter()
        .map(|&node| RotationTrigger::PendingArrival { node })
        .collect();
    let Some(h) = state.hierarchy.filter(|h| !h.clusters.is_empty()) else {
        out.push(RotationTrigger::NoHierarchy);
        return out;
    };
    for c in &h.clusters {
        let alive: Vec<NodeId> = c.all_nodes().filter(|n| state.alive[n.index()]).collect();
        let sum: i128 = alive.iter().map(|n| state.residuals[n.index()].micros() as i128).sum();
        let count = alive.len() as i128;
        let mut holders = vec![(c.cic, Role::ClusterInCharge)];
        for s in &c.sectors {
            holders.push((s.sic, Role::SectorInCharge));
            if let Some(sm) = s.sm {
                holders.push((sm, Role::SectorMonitor));
            }
        }
        for (node, role) in holders {
            let i = node.index();
            if !state.alive[i] || state.isolated[i] {
                out.push(RotationTrigger::HolderLost { node, role });
            } else if (state.residuals[i].micros() as i128) * count * (PPM as i128) < state.ratio_ppm as i128 * sum {
                out.push(RotationTrigger::LowEnergy { node, role });
            }
        }
        for s in &c.sectors {
            for &l in &s.leaves {
                if state.isolated[l.index()] {
                    out.push(RotationTrigger::IsolatedMember { node: l });
                }
            }
        }
    }
    out
}

/// Re-elects the whole role tree if any trigger fired; `None` means no change.
pub fn rotate_roles(
    triggers: &[RotationTrigger],
    view: &ElectionView<'_>,
    sg: NodeId,
    cluster_count: usize,
    k: usize,
    tick: SimTime,
) -> Option<Hierarchy> {
    if triggers.is_empty() {
        return None;
    }
    Some(form_hierarchy(view, sg, cluster_count, k, tick))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_graph;

    struct Fixture {
        graph: NeighborGraph,
        positions: Vec<Position>,
        tiers: Vec<Tier>,
        energies: Vec<Energy>,
        present: Vec<bool>,
    }

    impl Fixture {
        fn new(positions: Vec<Position>, radius: f64, tiers: Vec<Tier>, energies: &[f64]) -> Self {
            let n = positions.len();
            Fixture {
                graph: build_graph(&positions, radius).unwrap(),
                positions,
                tiers,
                energies: energies.iter().map(|&e| Energy::from_units(e)).collect(),
                present: vec![true; n],
            }
        }

        fn view(&self) -> ElectionView<'_> {
            ElectionView {
                graph: &self.graph,
                positions: &self.positions,
                tiers: &self.tiers,
                energies: &self.energies,
                present: &self.present,
                eligible: &self.present,
            }
        }
    }

    #[test]
    fn cic_energy_tie_broken_by_degree() {
        // 0 = SG, 1 = B (degree 1), 2 = C (degree 4), 3..5 hang off C.
        let positions = vec![
            Position::new(0.0, 0.0),
            Position::new(-1.0, 0.0),
            Position::new(1.0, 0.0),
            Position::new(2.0, 0.5),
            Position::new(2.0, -0.5),
            Position::new(1.5, 1.0),
        ];
        let tiers = vec![Tier::Sink, Tier::Head, Tier::Head, Tier::Leaf, Tier::Leaf, Tier::Leaf];
        let f = Fixture::new(positions, 1.2, tiers, &[100.0, 5.0, 5.0, 1.0, 1.0, 1.0]);
        let view = f.view();
        assert_eq!(view.live_degree(NodeId(1)), 1);
        assert_eq!(view.live_degree(NodeId(2)), 4);
        let rec = elect_cic(&view, NodeId(0), &[false; 6], 0, 0).unwrap();
        assert_eq!(rec.winner, NodeId(2));
    }

    #[test]
    fn single_neighbor_wins_and_none_halts() {
        let f = Fixture::new(
            vec![Position::new(0.0, 0.0), Position::new(1.0, 0.0), Position::new(9.0, 0.0)],
            2.0,
            vec![Tier::Sink, Tier::Head, Tier::Head],
            &[100.0, 1.0, 50.0],
        );
        let view = f.view();
        assert_eq!(elect_cic(&view, NodeId(0), &[false; 3], 0, 0).unwrap().winner, NodeId(1));
        assert_eq!(
            elect_cic(&view, NodeId(0), &[false, true, false], 0, 0),
            Err(ElectionError::NoEligibleCic(NodeId(0)))
        );
    }

    #[test]
    fn sic_sectors_claimed_greedily() {
        // 6-node instance: CIC=0; SICs 1 (e=9) and 2 (e=8); 3 and 4 are in range of both,
        // 5 only of SIC 2. Greedy claim: SIC 1 takes {3, 4}, SIC 2 takes {5}.
        let positions = vec![
            Position::new(0.0, 0.0),
            Position::new(-1.0, 1.0),
            Position::new(1.0, 1.0),
            Position::new(0.0, 1.5),
            Position::new(0.0, 0.8),
            Position::new(1.8, 1.0),
        ];
        let tiers = vec![Tier::Head, Tier::Relay, Tier::Relay, Tier::Leaf, Tier::Leaf, Tier::Leaf];
        let f = Fixture::new(positions, 2.0, tiers, &[50.0, 9.0, 8.0, 1.0, 1.0, 1.0]);
        let view = f.view();
        let members: Vec<NodeId> = (1..6).map(NodeId).collect();
        let out = elect_sics(&view, NodeId(0), &members, 2, 0, 0);
        assert_eq!(out.shortfall, 0);
        assert_eq!(out.sectors[0], (NodeId(1), vec![NodeId(3), NodeId(4)]));
        assert_eq!(out.sectors[1], (NodeId(2), vec![NodeId(5)]));

        let out = elect_sics(&view, NodeId(0), &members, 3, 0, 0);
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.shortfall, 1);
    }

    #[test]
    fn sm_tie_goes_to_lower_id() {
        let positions = vec![
            Position::new(0.0, 0.0),
            Position::new(0.0, 1.0),
            Position::new(1.0, 0.0),
            Position::new(-1.0, 0.0),
        ];
        let tiers = vec![Tier::Head, Tier::Relay, Tier::Relay, Tier::Relay];
        let f = Fixture::new(positions, 1.5, tiers, &[9.0, 9.0, 9.0, 9.0]);
        let view = f.view();
        let rec = elect_sm(&view, NodeId(1), &[NodeId(3), NodeId(2)], NodeId(0), 0, 0, 0).unwrap();
        assert_eq!(rec.winner, NodeId(2));
        assert!(elect_sm(&view, NodeId(1), &[], NodeId(0), 0, 0, 0).is_none());
    }

    #[test]
    fn upstream_follows_role_order() {
        let h = Hierarchy {
            sg: NodeId(0),
            tick: 0,
            clusters: vec![Cluster {
                cic: NodeId(1),
                members: vec![NodeId(2), NodeId(3), NodeId(4), NodeId(5)],
                sectors: vec![
                    Sector { sic: NodeId(2), sm: Some(NodeId(3)), leaves: vec![NodeId(4)] },
                    Sector { sic: NodeId(5), sm: None, leaves: vec![] },
                ],
            }],
            records: vec![],
            halted: None,
            sic_shortfall: 0,
        };
        let a = h.assignments(6);
        let up = |i: usize| h.upstream(a[i].as_ref().unwrap());
        assert_eq!(up(4), Some(NodeId(2)));
        assert_eq!(up(2), Some(NodeId(3)));
        assert_eq!(up(3), Some(NodeId(1)));
        assert_eq!(up(1), Some(NodeId(0)));
        assert_eq!(up(0), None);
        assert_eq!(up(5), Some(NodeId(1)));
    }

    #[test]
    fn rotation_triggers_and_no_change() {
        let h = Hierarchy {
            sg: NodeId(0),
            tick: 0,
            clusters: vec![Cluster {
                cic: NodeId(1),
                members: vec![NodeId(2), NodeId(3), NodeId(4)],
                sectors: vec![Sector { sic: NodeId(2), sm: Some(NodeId(3)), leaves: vec![NodeId(4)] }],
            }],
            records: vec![],
            halted: None,
            sic_shortfall: 0,
        };
        let alive = [true; 5];
        let isolated = [false; 5];
        let healthy: Vec<Energy> = [0.0, 10.0, 10.0, 10.0, 10.0].iter().map(|&e| Energy::from_units(e)).collect();
        let state = RotationState {
            hierarchy: Some(&h),
            residuals: &healthy,
            alive: &alive,
            isolated: &isolated,
            pending: &[],
            ratio_ppm: 500_000,
        };
        assert!(rotation_triggers(&state).is_empty());

        // CIC at 2 against a cluster mean of 8 -> below half.
        let low: Vec<Energy> = [0.0, 2.0, 10.0, 10.0, 10.0].iter().map(|&e| Energy::from_units(e)).collect();
        let state = RotationState { residuals: &low, ..state };
        assert_eq!(
            rotation_triggers(&state),
            vec![RotationTrigger::LowEnergy { node: NodeId(1), role: Role::ClusterInCharge }]
        );

        let mut iso = isolated;
        iso[4] = true;
        let state = RotationState { residuals: &healthy, isolated: &iso, ..state };
        assert_eq!(rotation_triggers(&state), vec![RotationTrigger::IsolatedMember { node: NodeId(4) }]);
    }
}
