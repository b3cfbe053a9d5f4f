//! The simulated network and its run loop.

use thiserror::Error;

use crate::attacker::AttackPlan;
use crate::config::{generated_ids, ScenarioConfig};
use crate::detection::{DetectionParams, IsolationList, WindowCounter};
use crate::energy::{depletion_tick, Action, CostTable, Debit, Energy, EnergyBaseline, EnergyState, PowerMode, SleepSchedule};
use crate::engine::{EventQueue, RngSeed, RngStream, ScheduleError, SimTime};
use crate::protocol::{ChargeOutcome, Hop, StatusProfile};
use crate::roles::{rotation_triggers, Assignment, Hierarchy, RotationState, RotationTrigger, Tier};
use crate::topology::{build_graph, uniform_positions, NeighborGraph, NodeId, Position, TopologyError};
use crate::trace::{AttackHeader, ConfigHeader, EndReason, Entry, NodeHeader, RunTrace};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("scheduler: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Arrive { node: NodeId },
    Election,
    Round,
    Sample,
    Fire { plan: usize },
    Deliver(Hop),
    SleepStart { node: NodeId, at: SimTime },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub tier: Tier,
    pub initial: Energy,
    pub schedule: Option<SleepSchedule>,
    pub awake_rate: Energy,
    pub sleep_rate: Energy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    /// Index into the class table; unused for attackers.
    pub class: usize,
    pub position: Position,
    /// `None` for an unlimited attacker.
    pub initial: Option<Energy>,
    pub schedule: Option<SleepSchedule>,
    pub arrive_at: SimTime,
    pub attacker: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct NodeState {
    pub(crate) spec: NodeSpec,
    pub(crate) energy: EnergyState,
    pub(crate) mode: PowerMode,
    /// Background energy has been charged up to this tick.
    pub(crate) settled_at: SimTime,
    /// Forced awake (by a fake request) until this tick.
    pub(crate) forced_until: SimTime,
    pub(crate) arrived: bool,
}

pub struct World {
    pub(crate) nodes: Vec<NodeState>,
    pub(crate) positions: Vec<Position>,
    pub(crate) tiers: Vec<Tier>,
    pub(crate) graph: NeighborGraph,
    pub(crate) sg: NodeId,
    pub(crate) classes: Vec<ClassSpec>,
    pub(crate) costs: CostTable,
    pub(crate) leaf_schedule: SleepSchedule,
    pub(crate) sector_schedule: SleepSchedule,
    pub(crate) detection: DetectionParams,
    pub(crate) margin_ppm: u32,
    pub(crate) detection_enabled: bool,
    pub(crate) roles: crate::config::RolesConfig,
    pub(crate) protocol: crate::config::ProtocolConfig,
    pub(crate) attacks: Vec<AttackPlan>,
    pub(crate) horizon: SimTime,
    pub(crate) queue: EventQueue<Event>,
    pub(crate) trace: RunTrace,
    pub(crate) hierarchy: Option<Hierarchy>,
    pub(crate) assignments: Vec<Option<Assignment>>,
    pub(crate) profiles: Vec<Option<StatusProfile>>,
    pub(crate) isolation: IsolationList,
    pub(crate) window: WindowCounter,
    pub(crate) invalid_window: WindowCounter,
    pub(crate) pending: Vec<NodeId>,
    pub(crate) next_pkt: u64,
    events: u64,
    schedule_error: Option<ScheduleError>,
}

/// Runs the scenario with its configured detection switch.
pub fn run(config: &ScenarioConfig) -> Result<RunTrace, SimError> {
    run_with_detection(config, config.detection.enabled)
}

pub fn run_with_detection(config: &ScenarioConfig, detection: bool) -> Result<RunTrace, SimError> {
    World::new(config, detection)?.run()
}

fn schedule_of(c: &crate::config::ScheduleConfig, path: &str) -> Result<SleepSchedule, SimError> {
    c.schedule().ok_or_else(|| SimError::Scenario(format!("{path}: bad schedule")))
}

/// Resolves the node table: sensors in config order (or generated), then attackers.
pub fn build_nodes(config: &ScenarioConfig) -> Result<(Vec<ClassSpec>, Vec<NodeSpec>), SimError> {
    let mut classes = Vec::new();
    for (name, c) in &config.classes {
        classes.push(ClassSpec {
            name: name.clone(),
            tier: c.tier,
            initial: Energy::from_units(c.initial_energy),
            schedule: c.schedule.as_ref().map(|s| schedule_of(s, name)).transpose()?,
            awake_rate: Energy::from_units(c.awake_rate),
            sleep_rate: Energy::from_units(c.sleep_rate),
        });
    }
    let class_index = |name: &str| {
        classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| SimError::Scenario(format!("unknown class `{name}`")))
    };

    let mut nodes = Vec::new();
    match &config.topology.generator {
        Some(g) => {
            let ids = generated_ids(g);
            let mut rng = RngSeed(config.seed).stream(RngStream::Topology);
            let positions = uniform_positions(&mut rng, ids.len() - 1, g.width, g.height);
            for (k, (name, class)) in ids.into_iter().enumerate() {
                let ci = class_index(&class)?;
                let position = if k == 0 { Position::new(g.sink_x, g.sink_y) } else { positions[k - 1] };
                nodes.push(NodeSpec {
                    name,
                    class: ci,
                    position,
                    initial: Some(classes[ci].initial),
                    schedule: None,
                    arrive_at: 0,
                    attacker: false,
                });
            }
        }
        None => {
            for (i, n) in config.nodes.iter().enumerate() {
                let ci = class_index(&n.class)?;
                nodes.push(NodeSpec {
                    name: n.id.clone(),
                    class: ci,
                    position: Position::new(n.x, n.y),
                    initial: Some(n.initial_energy.map_or(classes[ci].initial, Energy::from_units)),
                    schedule: n.schedule.as_ref().map(|s| schedule_of(s, &format!("nodes[{i}]"))).transpose()?,
                    arrive_at: n.arrive_at.unwrap_or(0),
                    attacker: false,
                });
            }
        }
    }

    for a in &config.attacks {
        let first = a
            .targets
            .first()
            .and_then(|t| nodes.iter().find(|n| n.name == *t))
            .ok_or_else(|| SimError::Scenario(format!("attacker {} has no valid target", a.id)))?;
        let position = match (a.x, a.y) {
            (Some(x), Some(y)) => Position::new(x, y),
            _ => first.position,
        };
        nodes.push(NodeSpec {
            name: a.id.clone(),
            class: usize::MAX,
            position,
            initial: a.energy.map(Energy::from_units),
            schedule: None,
            arrive_at: 0,
            attacker: true,
        });
    }
    Ok((classes, nodes))
}

impl World {
    pub fn new(config: &ScenarioConfig, detection_enabled: bool) -> Result<World, SimError> {
        let (classes, specs) = build_nodes(config)?;
        let sensors = specs.iter().filter(|s| !s.attacker).count();
        let positions: Vec<Position> = specs.iter().map(|s| s.position).collect();
        let graph = build_graph(&positions[..sensors], config.topology.radius)?;
        let tiers: Vec<Tier> = specs
            .iter()
            .map(|s| if s.attacker { Tier::Leaf } else { classes[s.class].tier })
            .collect();
        let sg = tiers
            .iter()
            .position(|&t| t == Tier::Sink)
            .map(|i| NodeId(i as u32))
            .ok_or_else(|| SimError::Scenario("no sink gateway".into()))?;

        let by_name = |name: &str| {
            specs
                .iter()
                .position(|s| s.name == name)
                .map(|i| NodeId(i as u32))
                .ok_or_else(|| SimError::Scenario(format!("unknown node `{name}`")))
        };
        let mut attacks = Vec::new();
        for a in &config.attacks {
            attacks.push(AttackPlan {
                attacker: by_name(&a.id)?,
                targets: a.targets.iter().map(|t| by_name(t)).collect::<Result<_, _>>()?,
                start: a.start,
                stop: a.stop,
                period: a.period.max(1),
                mode: a.mode,
                range: a.range,
            });
        }

        let leaf_schedule = schedule_of(&config.schedules.leaf, "schedules.leaf")?;
        let sector_schedule = schedule_of(&config.schedules.sector, "schedules.sector")?;
        let detection = DetectionParams {
            rate_threshold: config.detection.rate_threshold,
            window: config.detection.window,
            corroboration: config.detection.corroboration,
        };

        let n = specs.len();
        let mut world = World {
            nodes: Vec::with_capacity(n),
            positions,
            tiers,
            graph,
            sg,
            classes,
            costs: config.cost_table(),
            leaf_schedule,
            sector_schedule,
            detection,
            margin_ppm: config.detection.margin_ppm(),
            detection_enabled,
            roles: config.roles.clone(),
            protocol: config.protocol.clone(),
            attacks,
            horizon: config.horizon,
            queue: EventQueue::new(),
            trace: RunTrace::new(),
            hierarchy: None,
            assignments: vec![None; n],
            profiles: vec![None; n],
            isolation: IsolationList::new(),
            window: WindowCounter::new(detection.window),
            invalid_window: WindowCounter::new(detection.window),
            pending: Vec::new(),
            next_pkt: 0,
            events: 0,
            schedule_error: None,
        };
        for spec in specs {
            let energy = spec.initial.map_or_else(EnergyState::unlimited, EnergyState::new);
            let arrived = spec.arrive_at == 0;
            world.nodes.push(NodeState {
                spec,
                energy,
                mode: PowerMode::Off,
                settled_at: 0,
                forced_until: 0,
                arrived,
            });
        }
        for i in 0..n {
            let id = NodeId(i as u32);
            let s = &world.nodes[i];
            if s.arrived && !s.spec.attacker {
                let mode = if id == sg {
                    PowerMode::AlwaysOn
                } else {
                    world.own_schedule(id).map_or(PowerMode::AlwaysOn, PowerMode::Duty)
                };
                world.nodes[i].mode = mode;
            }
        }
        world.header(config, detection_enabled);
        Ok(world)
    }

    fn header(&mut self, config: &ScenarioConfig, detection_enabled: bool) {
        self.log(
            0,
            Entry::Config(ConfigHeader {
                fingerprint: config.fingerprint(),
                seed: config.seed,
                horizon: config.horizon,
                detection: detection_enabled,
                rate_threshold: self.detection.rate_threshold,
                window: self.detection.window,
                margin_ppm: self.margin_ppm,
                corroboration: self.detection.corroboration,
            }),
        );
        for i in 0..self.nodes.len() {
            let s = &self.nodes[i].spec;
            let h = NodeHeader {
                name: s.name.clone(),
                class: if s.attacker { "attacker".into() } else { self.classes[s.class].name.clone() },
                tier: (!s.attacker).then(|| self.tiers[i]),
                x: s.position.x,
                y: s.position.y,
                initial: s.initial,
                attacker: s.attacker,
                arrive: (s.arrive_at > 0).then_some(s.arrive_at),
            };
            self.log(0, Entry::Node(h));
        }
        for a in self.attacks.clone() {
            self.log(
                0,
                Entry::Attack(AttackHeader {
                    attacker: a.attacker,
                    targets: a.targets.clone(),
                    mode: a.mode,
                    start: a.start,
                    stop: a.stop,
                    period: a.period,
                }),
            );
        }
    }

    pub(crate) fn log(&mut self, t: SimTime, entry: Entry) {
        self.trace.push(t, entry);
    }

    pub(crate) fn schedule(&mut self, at: SimTime, event: Event) {
        if let Err(e) = self.queue.schedule(at, event) {
            self.schedule_error.get_or_insert(e);
        }
    }

    pub fn run(mut self) -> Result<RunTrace, SimError> {
        let horizon = self.horizon;
        for i in 0..self.nodes.len() {
            let at = self.nodes[i].spec.arrive_at;
            if at > 0 && at < horizon {
                self.schedule(at, Event::Arrive { node: NodeId(i as u32) });
            }
        }
        if horizon > 0 {
            self.schedule(0, Event::Election);
            self.schedule(0, Event::Round);
        }
        if self.protocol.sample_period < horizon {
            self.schedule(self.protocol.sample_period, Event::Sample);
        }
        for (i, plan) in self.attacks.clone().iter().enumerate() {
            if let Some(first) = plan.fire_ticks(horizon).next() {
                self.schedule(first, Event::Fire { plan: i });
            }
        }

        let mut end = (horizon, EndReason::Horizon);
        while let Some(ev) = self.queue.pop_before(horizon) {
            self.events += 1;
            let t = ev.at;
            match ev.payload {
                Event::Arrive { node } => self.on_arrive(node, t),
                Event::Election => {
                    self.on_election(t);
                    let next = t + self.roles.election_period;
                    if next < horizon {
                        self.schedule(next, Event::Election);
                    }
                }
                Event::Round => {
                    self.collect_round(t);
                    let next = t + self.protocol.round_period;
                    if next < horizon {
                        self.schedule(next, Event::Round);
                    }
                }
                Event::Sample => {
                    self.settle_all(t);
                    self.sample_all(t);
                    if self.all_sensors_dead() {
                        end = (t, EndReason::AllDead);
                        break;
                    }
                    let next = t + self.protocol.sample_period;
                    if next < horizon {
                        self.schedule(next, Event::Sample);
                    }
                }
                Event::Fire { plan } => self.fire(plan, t),
                Event::Deliver(hop) => self.deliver(hop, t),
                Event::SleepStart { node, at } => self.on_sleep_start(node, at, t),
            }
            if let Some(e) = self.schedule_error.take() {
                return Err(e.into());
            }
        }

        let (t, reason) = end;
        if reason == EndReason::Horizon {
            self.queue.advance_to(t);
            self.settle_all(t);
            self.sample_all(t);
        }
        let events = self.events;
        self.log(t, Entry::End { reason, events });
        Ok(self.trace)
    }

    fn on_arrive(&mut self, node: NodeId, t: SimTime) {
        let s = &mut self.nodes[node.index()];
        s.arrived = true;
        s.settled_at = t;
        s.mode = PowerMode::Asleep;
        self.pending.push(node);
        self.log(t, Entry::Arrive { node });
        if !t.is_multiple_of(self.roles.election_period) {
            self.send_sleep_signal(node, t);
        }
    }

    fn on_election(&mut self, t: SimTime) {
        self.settle_all(t);
        let n = self.nodes.len();
        let residuals: Vec<Energy> = self.nodes.iter().map(|s| s.energy.residual()).collect();
        let alive: Vec<bool> = self.nodes.iter().map(|s| !s.energy.is_dead()).collect();
        let isolated: Vec<bool> = (0..n).map(|i| self.isolation.contains(NodeId(i as u32))).collect();
        let pending = self.pending.clone();
        let triggers = rotation_triggers(&RotationState {
            hierarchy: self.hierarchy.as_ref(),
            residuals: &residuals,
            alive: &alive,
            isolated: &isolated,
            pending: &pending,
            ratio_ppm: (self.roles.rotation_ratio * 1e6).round() as u32,
        });
        if triggers.is_empty() {
            return;
        }
        let what: Vec<String> = triggers.iter().map(|tr| self.describe_trigger(tr)).collect();
        self.log(t, Entry::Note { node: self.sg, what: format!("election: {}", what.join(" ")) });
        self.discover(t);
    }

    fn describe_trigger(&self, tr: &RotationTrigger) -> String {
        let name = |n: &NodeId| self.nodes[n.index()].spec.name.clone();
        match tr {
            RotationTrigger::LowEnergy { node, role } => format!("low_energy:{}:{role}", name(node)),
            RotationTrigger::HolderLost { node, role } => format!("holder_lost:{}:{role}", name(node)),
            RotationTrigger::IsolatedMember { node } => format!("isolated_member:{}", name(node)),
            RotationTrigger::PendingArrival { node } => format!("pending:{}", name(node)),
            RotationTrigger::NoHierarchy => "no_hierarchy".into(),
        }
    }

    fn on_sleep_start(&mut self, node: NodeId, at: SimTime, t: SimTime) {
        let s = &self.nodes[node.index()];
        if s.forced_until != at || s.energy.is_dead() || s.mode.is_awake(t) {
            return;
        }
        self.log(t, Entry::Sleep { node, cause: crate::trace::SleepCause::ForcedEnd });
    }

    fn all_sensors_dead(&self) -> bool {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, s)| *i != self.sg.index() && !s.spec.attacker)
            .all(|(_, s)| s.energy.is_dead())
    }

    fn sample_all(&mut self, t: SimTime) {
        for i in 0..self.nodes.len() {
            let s = &self.nodes[i];
            if s.energy.is_unlimited() {
                continue;
            }
            let residual = s.energy.residual();
            self.log(t, Entry::Sample { node: NodeId(i as u32), residual });
        }
    }

    pub(crate) fn settle_all(&mut self, t: SimTime) {
        for i in 0..self.nodes.len() {
            self.settle(NodeId(i as u32), t);
        }
    }

    /// Charges background idle/sleep energy up to `t`.
    pub(crate) fn settle(&mut self, node: NodeId, t: SimTime) {
        let i = node.index();
        let s = &mut self.nodes[i];
        if s.energy.is_dead() || !s.arrived || s.energy.is_unlimited() {
            s.settled_at = s.settled_at.max(t);
            return;
        }
        if t <= s.settled_at {
            return;
        }
        let from = s.settled_at;
        s.settled_at = t;
        let mode = s.mode;
        let residual = s.energy.residual();
        let (end, dies) = match depletion_tick(&mode, &self.costs, from, t, residual) {
            Some(d) => (d, true),
            None => (t, false),
        };
        let (idle, sleep) = mode.background(&self.costs, from, end);
        for (action, amount) in [(Action::Idle, idle), (Action::Sleep, sleep)] {
            if amount > Energy::ZERO {
                self.debit(node, action, amount, t, end);
            }
        }
        debug_assert!(!dies || self.nodes[i].energy.is_dead());
    }

    /// Low-level debit with logging. `died_at` is reported if the debit kills the node.
    fn debit(&mut self, node: NodeId, action: Action, amount: Energy, t: SimTime, died_at: SimTime) -> Debit {
        let d = self.nodes[node.index()].energy.consume(action, amount);
        let charged = d.charged();
        if charged > Energy::ZERO {
            self.log(t, Entry::Energy { node, action, amount: charged });
        }
        if let Debit::Died(_) = d {
            self.nodes[node.index()].mode = PowerMode::Off;
            self.log(t, Entry::Death { node, at: died_at });
        }
        d
    }

    pub(crate) fn charge(&mut self, node: NodeId, action: Action, t: SimTime) -> ChargeOutcome {
        let amount = self.costs.cost(action);
        self.charge_amount(node, action, amount, t)
    }

    pub(crate) fn charge_amount(&mut self, node: NodeId, action: Action, amount: Energy, t: SimTime) -> ChargeOutcome {
        self.settle(node, t);
        if self.nodes[node.index()].energy.is_dead() {
            return ChargeOutcome::Died;
        }
        self.debit(node, action, amount, t, t).into()
    }

    /// Settles and reports whether the node is alive and in the network.
    pub(crate) fn settle_alive(&mut self, node: NodeId, t: SimTime) -> bool {
        self.settle(node, t);
        let s = &self.nodes[node.index()];
        s.arrived && !s.energy.is_dead()
    }

    pub(crate) fn set_mode(&mut self, node: NodeId, mode: PowerMode, t: SimTime) {
        self.settle(node, t);
        let s = &mut self.nodes[node.index()];
        if !s.energy.is_dead() {
            s.mode = mode;
        }
    }

    pub(crate) fn is_awake(&self, node: NodeId, t: SimTime) -> bool {
        let s = &self.nodes[node.index()];
        t < s.forced_until || s.mode.is_awake(t)
    }

    /// Node override, then class schedule, then the tier's default.
    pub(crate) fn own_schedule(&self, node: NodeId) -> Option<SleepSchedule> {
        let s = &self.nodes[node.index()].spec;
        if s.attacker {
            return None;
        }
        let class = &self.classes[s.class];
        s.schedule.or(class.schedule).or(match class.tier {
            Tier::Sink => None,
            Tier::Head | Tier::Relay => Some(self.sector_schedule),
            Tier::Leaf => Some(self.leaf_schedule),
        })
    }

    /// Length of a forced wake-up: one full wake window of the node's schedule.
    pub(crate) fn wake_len(&self, node: NodeId) -> u64 {
        match self.nodes[node.index()].mode {
            PowerMode::Duty(s) => s.wake_len(),
            _ => self.own_schedule(node).unwrap_or(self.leaf_schedule).wake_len(),
        }
    }

    /// `Th_RE` for `node`'s class at `t`, measured from the node's arrival.
    pub(crate) fn threshold_re(&self, node: NodeId, t: SimTime) -> Energy {
        let s = &self.nodes[node.index()].spec;
        let class = &self.classes[s.class];
        let schedule = self
            .own_schedule(node)
            .unwrap_or_else(|| SleepSchedule::new(1, 0, 1).expect("always-awake schedule"));
        EnergyBaseline {
            initial: class.initial,
            schedule,
            awake_rate: class.awake_rate,
            sleep_rate: class.sleep_rate,
            margin_ppm: self.margin_ppm,
        }
        .threshold(t.saturating_sub(s.arrive_at))
    }
}
