//! Scenario configuration: TOML schema, defaults, validation.
//!
//! Parsing goes through an all-optional raw form so that every default that
//! gets filled in can be reported, and so that every problem is reported with
//! the path of the offending field instead of stopping at the first one.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::attacker::AttackMode;
use crate::energy::{CostTable, Energy, SleepSchedule};
use crate::engine::SimTime;
use crate::roles::Tier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub period: u64,
    pub offset: u64,
    pub len: u64,
}

impl ScheduleConfig {
    pub fn schedule(&self) -> Option<SleepSchedule> {
        SleepSchedule::new(self.period, self.offset, self.len).ok()
    }
}

impl From<SleepSchedule> for ScheduleConfig {
    fn from(s: SleepSchedule) -> Self {
        ScheduleConfig {
            period: s.period(),
            offset: s.wake_offset(),
            len: s.wake_len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub width: f64,
    pub height: f64,
    pub sink_x: f64,
    pub sink_y: f64,
    /// Number of generated nodes per class; ids are `<class><index>`.
    pub counts: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub id: String,
    pub class: String,
    pub x: f64,
    pub y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arrive_at: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfig {
    pub tier: Tier,
    pub initial_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    /// Baseline drain per awake tick.
    pub awake_rate: f64,
    /// Baseline drain per asleep tick.
    pub sleep_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    pub transmit: f64,
    pub receive: f64,
    pub sense: f64,
    pub idle_listen: f64,
    pub sleep: f64,
    pub detection: f64,
}

impl CostConfig {
    pub fn table(&self) -> CostTable {
        CostTable {
            transmit: Energy::from_units(self.transmit),
            receive: Energy::from_units(self.receive),
            sense: Energy::from_units(self.sense),
            idle_listen: Energy::from_units(self.idle_listen),
            sleep: Energy::from_units(self.sleep),
            detection: Energy::from_units(self.detection),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulesConfig {
    pub leaf: ScheduleConfig,
    pub sector: ScheduleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub enabled: bool,
    pub rate_threshold: u32,
    pub window: u64,
    pub margin: f64,
    pub corroboration: u32,
}

impl DetectionConfig {
    pub fn margin_ppm(&self) -> u32 {
        (self.margin * 1e6).round() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolesConfig {
    pub clusters: usize,
    pub sectors_per_cluster: usize,
    pub election_period: u64,
    pub rotation_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub round_period: u64,
    pub hop_latency: u64,
    pub sample_period: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub id: String,
    /// Defaults to the first target's position when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub range: f64,
    pub targets: Vec<String>,
    pub start: SimTime,
    pub stop: SimTime,
    pub period: u64,
    pub mode: AttackMode,
    /// `None` means unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
}

/// Fully resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub horizon: SimTime,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub topology: TopologyConfig,
    pub costs: CostConfig,
    pub schedules: SchedulesConfig,
    pub detection: DetectionConfig,
    pub roles: RolesConfig,
    pub protocol: ProtocolConfig,
    pub classes: BTreeMap<String, ClassConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attacks: Vec<AttackConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<ConfigError>),
}

impl LoadError {
    pub fn errors(&self) -> Vec<String> {
        match self {
            LoadError::Invalid(v) => v.iter().map(ToString::to_string).collect(),
            other => vec![other.to_string()],
        }
    }
}

/// A default that validation filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct AppliedDefault {
    pub path: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub config: ScenarioConfig,
    pub defaults: Vec<AppliedDefault>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    horizon: Option<SimTime>,
    output_dir: Option<String>,
    topology: Option<RawTopology>,
    costs: Option<RawCosts>,
    schedules: Option<RawSchedules>,
    detection: Option<RawDetection>,
    roles: Option<RawRoles>,
    protocol: Option<RawProtocol>,
    classes: Option<BTreeMap<String, RawClass>>,
    nodes: Option<Vec<NodeConfig>>,
    attacks: Option<Vec<RawAttack>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTopology {
    radius: Option<f64>,
    generator: Option<RawGenerator>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    width: Option<f64>,
    height: Option<f64>,
    sink_x: Option<f64>,
    sink_y: Option<f64>,
    counts: Option<BTreeMap<String, u32>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCosts {
    transmit: Option<f64>,
    receive: Option<f64>,
    sense: Option<f64>,
    idle_listen: Option<f64>,
    sleep: Option<f64>,
    detection: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedules {
    leaf: Option<ScheduleConfig>,
    sector: Option<ScheduleConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    enabled: Option<bool>,
    rate_threshold: Option<u32>,
    window: Option<u64>,
    margin: Option<f64>,
    corroboration: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoles {
    clusters: Option<usize>,
    sectors_per_cluster: Option<usize>,
    election_period: Option<u64>,
    rotation_ratio: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    round_period: Option<u64>,
    hop_latency: Option<u64>,
    sample_period: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    tier: Option<Tier>,
    initial_energy: Option<f64>,
    schedule: Option<ScheduleConfig>,
    awake_rate: Option<f64>,
    sleep_rate: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    id: Option<String>,
    x: Option<f64>,
    y: Option<f64>,
    range: Option<f64>,
    targets: Option<Vec<String>>,
    start: Option<SimTime>,
    stop: Option<SimTime>,
    period: Option<u64>,
    mode: Option<AttackMode>,
    energy: Option<f64>,
}

pub const DEFAULT_COSTS: CostConfig = CostConfig {
    transmit: 0.02,
    receive: 0.01,
    sense: 0.005,
    idle_listen: 0.01,
    sleep: 0.0005,
    detection: 0.002,
};

fn default_class(name: &str) -> Option<(Tier, f64)> {
    match name {
        "sink" => Some((Tier::Sink, 1_000_000.0)),
        "head" => Some((Tier::Head, 100.0)),
        "relay" => Some((Tier::Relay, 60.0)),
        "leaf" => Some((Tier::Leaf, 20.0)),
        _ => None,
    }
}

const DEFAULT_CLASSES: [&str; 4] = ["sink", "head", "relay", "leaf"];

struct Resolver {
    errors: Vec<ConfigError>,
    defaults: Vec<AppliedDefault>,
}

impl Resolver {
    fn or<T: fmt::Display>(&mut self, v: Option<T>, path: &str, default: T) -> T {
        match v {
            Some(v) => v,
            None => {
                log::info!("default applied: {path} = {default}");
                self.defaults.push(AppliedDefault { path: path.to_string(), value: default.to_string() });
                default
            }
        }
    }

    fn required<T>(&mut self, v: Option<T>, path: &str) -> Option<T> {
        if v.is_none() {
            self.err(path, "required field is missing");
        }
        v
    }

    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, path: &str, message: &str) {
        if !ok {
            self.err(path, message);
        }
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s != "-" && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn schedule_display(s: &ScheduleConfig) -> String {
    format!("{}/{}/{}", s.period, s.offset, s.len)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<ScenarioConfig, LoadError> {
        validate_str(text).map(|v| v.config)
    }

    pub fn load(path: &Path) -> Result<ScenarioConfig, LoadError> {
        validate_file(path).map(|v| v.config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Hash of the canonical form with detection forced on and the output
    /// directory removed, so that detection-on/off pairs share it.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.detection.enabled = true;
        c.output_dir = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn cost_table(&self) -> CostTable {
        self.costs.table()
    }

    /// Node ids in table order, generated or explicit, sink first for generated layouts.
    pub fn node_ids(&self) -> Vec<(String, String)> {
        match &self.topology.generator {
            Some(g) => generated_ids(g),
            None => self.nodes.iter().map(|n| (n.id.clone(), n.class.clone())).collect(),
        }
    }
}

pub(crate) fn generated_ids(g: &GeneratorConfig) -> Vec<(String, String)> {
    let mut out = vec![("sink".to_string(), "sink".to_string())];
    for (class, &count) in &g.counts {
        for i in 0..count {
            out.push((format!("{class}{i}"), class.clone()));
        }
    }
    out
}

pub fn validate_file(path: &Path) -> Result<Validated, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    validate_str(&text)
}

pub fn validate_str(text: &str) -> Result<Validated, LoadError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| LoadError::Parse(e.to_string()))?;
    resolve(raw)
}

fn resolve(raw: RawConfig) -> Result<Validated, LoadError> {
    let mut r = Resolver { errors: Vec::new(), defaults: Vec::new() };

    let seed = r.or(raw.seed, "seed", 0);
    let horizon = r.required(raw.horizon, "horizon").unwrap_or(0);

    let rc = raw.costs.unwrap_or_default();
    let d = DEFAULT_COSTS;
    let costs = CostConfig {
        transmit: r.or(rc.transmit, "costs.transmit", d.transmit),
        receive: r.or(rc.receive, "costs.receive", d.receive),
        sense: r.or(rc.sense, "costs.sense", d.sense),
        idle_listen: r.or(rc.idle_listen, "costs.idle_listen", d.idle_listen),
        sleep: r.or(rc.sleep, "costs.sleep", d.sleep),
        detection: r.or(rc.detection, "costs.detection", d.detection),
    };
    for (path, v) in [
        ("costs.transmit", costs.transmit),
        ("costs.receive", costs.receive),
        ("costs.sense", costs.sense),
        ("costs.idle_listen", costs.idle_listen),
        ("costs.sleep", costs.sleep),
        ("costs.detection", costs.detection),
    ] {
        r.check(v.is_finite() && v >= 0.0, path, "must be a finite, non-negative number");
    }
    if let Err(e) = costs.table().validate() {
        r.err("costs.sleep", e.to_string());
    }

    let rs = raw.schedules.unwrap_or_default();
    let leaf = rs.leaf.unwrap_or_else(|| {
        let s = ScheduleConfig { period: 20, offset: 0, len: 5 };
        r.or(None, "schedules.leaf", schedule_display(&s));
        s
    });
    let sector = rs.sector.unwrap_or_else(|| {
        let s = ScheduleConfig { period: 20, offset: 0, len: 10 };
        r.or(None, "schedules.sector", schedule_display(&s));
        s
    });
    for (path, s) in [("schedules.leaf", &leaf), ("schedules.sector", &sector)] {
        if let Err(e) = SleepSchedule::new(s.period, s.offset, s.len) {
            r.err(path, e.to_string());
        }
    }

    let rd = raw.detection.unwrap_or_default();
    let detection = DetectionConfig {
        enabled: r.or(rd.enabled, "detection.enabled", true),
        rate_threshold: r.or(rd.rate_threshold, "detection.rate_threshold", 10),
        window: r.or(rd.window, "detection.window", 20),
        margin: r.or(rd.margin, "detection.margin", 0.8),
        corroboration: r.or(rd.corroboration, "detection.corroboration", 3),
    };
    r.check(detection.rate_threshold > 0, "detection.rate_threshold", "must be positive");
    r.check(detection.window > 0, "detection.window", "must be positive");
    r.check(
        detection.margin > 0.0 && detection.margin < 1.0,
        "detection.margin",
        "must lie strictly between 0 and 1",
    );
    r.check(detection.corroboration > 0, "detection.corroboration", "must be positive");

    let rr = raw.roles.unwrap_or_default();
    let roles = RolesConfig {
        clusters: r.or(rr.clusters, "roles.clusters", 1),
        sectors_per_cluster: r.or(rr.sectors_per_cluster, "roles.sectors_per_cluster", 2),
        election_period: r.or(rr.election_period, "roles.election_period", 100),
        rotation_ratio: r.or(rr.rotation_ratio, "roles.rotation_ratio", 0.5),
    };
    r.check(roles.clusters > 0, "roles.clusters", "must be positive");
    r.check(roles.sectors_per_cluster > 0, "roles.sectors_per_cluster", "must be positive");
    r.check(roles.election_period > 0, "roles.election_period", "must be positive");
    r.check(
        roles.rotation_ratio > 0.0 && roles.rotation_ratio <= 1.0,
        "roles.rotation_ratio",
        "must lie in (0, 1]",
    );

    let rp = raw.protocol.unwrap_or_default();
    let protocol = ProtocolConfig {
        round_period: r.or(rp.round_period, "protocol.round_period", 20),
        hop_latency: r.or(rp.hop_latency, "protocol.hop_latency", 1),
        sample_period: r.or(rp.sample_period, "protocol.sample_period", 10),
    };
    r.check(protocol.round_period > 0, "protocol.round_period", "must be positive");
    r.check(protocol.hop_latency > 0, "protocol.hop_latency", "must be positive");
    r.check(protocol.sample_period > 0, "protocol.sample_period", "must be positive");

    let mut classes = BTreeMap::new();
    let mut raw_classes = raw.classes.unwrap_or_default();
    for name in DEFAULT_CLASSES {
        if !raw_classes.contains_key(name) {
            r.or(None, &format!("classes.{name}"), "built-in");
            raw_classes.insert(
                name.to_string(),
                RawClass { tier: None, initial_energy: None, schedule: None, awake_rate: None, sleep_rate: None },
            );
        }
    }
    for (name, rc) in raw_classes {
        let path = format!("classes.{name}");
        if !valid_name(&name) {
            r.err(&path, "class names may only contain letters, digits, `_` and `.`");
        }
        let builtin = default_class(&name);
        let tier = match (rc.tier, builtin) {
            (Some(t), _) => t,
            (None, Some((t, _))) => t,
            (None, None) => {
                r.err(format!("{path}.tier"), "required for custom classes");
                Tier::Leaf
            }
        };
        let initial_energy = match (rc.initial_energy, builtin) {
            (Some(e), _) => e,
            (None, Some((_, e))) => r.or(None, &format!("{path}.initial_energy"), e),
            (None, None) => {
                r.err(format!("{path}.initial_energy"), "required for custom classes");
                0.0
            }
        };
        r.check(
            initial_energy.is_finite() && initial_energy > 0.0,
            &format!("{path}.initial_energy"),
            "must be positive",
        );
        if let Some(s) = &rc.schedule {
            if let Err(e) = SleepSchedule::new(s.period, s.offset, s.len) {
                r.err(format!("{path}.schedule"), e.to_string());
            }
        }
        let awake_rate = r.or(rc.awake_rate, &format!("{path}.awake_rate"), costs.idle_listen);
        let sleep_rate = r.or(rc.sleep_rate, &format!("{path}.sleep_rate"), costs.sleep);
        r.check(
            sleep_rate >= 0.0 && awake_rate >= sleep_rate,
            &format!("{path}.awake_rate"),
            "baseline rates need 0 <= sleep_rate <= awake_rate",
        );
        classes.insert(name, ClassConfig { tier, initial_energy, schedule: rc.schedule, awake_rate, sleep_rate });
    }

    let rt = raw.topology.unwrap_or_default();
    let radius = r.required(rt.radius, "topology.radius").unwrap_or(1.0);
    r.check(radius.is_finite() && radius > 0.0, "topology.radius", "must be positive");
    let generator = rt.generator.map(|g| {
        let p = "topology.generator";
        let g = GeneratorConfig {
            width: r.required(g.width, &format!("{p}.width")).unwrap_or(1.0),
            height: r.required(g.height, &format!("{p}.height")).unwrap_or(1.0),
            sink_x: r.required(g.sink_x, &format!("{p}.sink_x")).unwrap_or(0.0),
            sink_y: r.required(g.sink_y, &format!("{p}.sink_y")).unwrap_or(0.0),
            counts: r.required(g.counts, &format!("{p}.counts")).unwrap_or_default(),
        };
        r.check(g.width > 0.0 && g.height > 0.0, &format!("{p}.width"), "area must be positive");
        r.check(g.sink_x.is_finite() && g.sink_y.is_finite(), &format!("{p}.sink_x"), "must be finite");
        for class in g.counts.keys() {
            match classes.get(class) {
                None => r.err(format!("{p}.counts.{class}"), format!("unknown class `{class}`")),
                Some(c) if c.tier == Tier::Sink => {
                    r.err(format!("{p}.counts.{class}"), "the sink is placed by the generator; sink-tier classes cannot be generated")
                }
                _ => {}
            }
        }
        g
    });
    let nodes = raw.nodes.unwrap_or_default();
    let topology = TopologyConfig { radius, generator };

    match (&topology.generator, nodes.is_empty()) {
        (Some(_), false) => r.err("nodes", "give either explicit nodes or topology.generator, not both"),
        (None, true) => r.err("nodes", "no nodes: give explicit nodes or topology.generator"),
        _ => {}
    }

    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut sinks = Vec::new();
    for (i, n) in nodes.iter().enumerate() {
        let path = format!("nodes[{i}]");
        if !valid_name(&n.id) {
            r.err(format!("{path}.id"), format!("invalid node id `{}`", n.id));
        }
        if let Some(j) = seen.insert(&n.id, i) {
            r.err(format!("{path}.id"), format!("duplicate id `{}` (also nodes[{j}])", n.id));
        }
        if !(n.x.is_finite() && n.y.is_finite()) {
            r.err(format!("{path}.x"), "coordinates must be finite");
        }
        match classes.get(&n.class) {
            None => r.err(format!("{path}.class"), format!("unknown class `{}`", n.class)),
            Some(c) if c.tier == Tier::Sink => sinks.push((i, n.id.clone())),
            _ => {}
        }
        if let Some(e) = n.initial_energy {
            r.check(e.is_finite() && e > 0.0, &format!("{path}.initial_energy"), "must be positive");
        }
        if let Some(s) = &n.schedule {
            if let Err(e) = SleepSchedule::new(s.period, s.offset, s.len) {
                r.err(format!("{path}.schedule"), e.to_string());
            }
        }
        for (j, other) in nodes.iter().enumerate().take(i) {
            if other.x == n.x && other.y == n.y {
                r.err(format!("{path}.x"), format!("position ({}, {}) already used by nodes[{j}] ({})", n.x, n.y, other.id));
            }
        }
    }
    if topology.generator.is_none() && !nodes.is_empty() {
        match sinks.as_slice() {
            [] => r.err("nodes", "exactly one sink-tier node is required, found none"),
            [(i, _)] => {
                if nodes[*i].arrive_at.unwrap_or(0) != 0 {
                    r.err(format!("nodes[{i}].arrive_at"), "the sink must be present from the start");
                }
            }
            many => {
                let names: Vec<String> = many.iter().map(|(i, id)| format!("nodes[{i}] ({id})")).collect();
                r.err("nodes", format!("exactly one sink-tier node is required, found {}: {}", many.len(), names.join(", ")));
            }
        }
    }

    let ids: Vec<(String, String)> = match &topology.generator {
        Some(g) => generated_ids(g),
        None => nodes.iter().map(|n| (n.id.clone(), n.class.clone())).collect(),
    };
    let sink_ids: Vec<&str> = ids
        .iter()
        .filter(|(_, c)| classes.get(c).is_some_and(|c| c.tier == Tier::Sink))
        .map(|(id, _)| id.as_str())
        .collect();

    let mut attacks = Vec::new();
    for (i, a) in raw.attacks.unwrap_or_default().into_iter().enumerate() {
        let path = format!("attacks[{i}]");
        let id = r.required(a.id, &format!("{path}.id")).unwrap_or_default();
        if !valid_name(&id) {
            r.err(format!("{path}.id"), format!("invalid attacker id `{id}`"));
        }
        if ids.iter().any(|(n, _)| *n == id) || attacks.iter().any(|x: &AttackConfig| x.id == id) {
            r.err(format!("{path}.id"), format!("id `{id}` is already in use"));
        }
        let targets = r.required(a.targets, &format!("{path}.targets")).unwrap_or_default();
        if targets.is_empty() {
            r.err(format!("{path}.targets"), "at least one target is required");
        }
        for (j, t) in targets.iter().enumerate() {
            if !ids.iter().any(|(n, _)| n == t) {
                r.err(format!("{path}.targets[{j}]"), format!("unknown node `{t}`"));
            } else if sink_ids.contains(&t.as_str()) {
                r.err(format!("{path}.targets[{j}]"), "the sink gateway cannot be a target");
            }
        }
        let range = r.required(a.range, &format!("{path}.range")).unwrap_or(0.0);
        r.check(range.is_finite() && range > 0.0, &format!("{path}.range"), "must be positive");
        if a.x.is_some() != a.y.is_some() {
            r.err(format!("{path}.x"), "give both x and y or neither");
        }
        let start = r.or(a.start, &format!("{path}.start"), 0);
        let stop = r.or(a.stop, &format!("{path}.stop"), horizon);
        r.check(start < stop, &format!("{path}.stop"), "must be after start");
        let period = r.or(a.period, &format!("{path}.period"), 1);
        r.check(period >= 1, &format!("{path}.period"), "must be at least 1");
        let mode = r.or(a.mode, &format!("{path}.mode"), AttackMode::SleepTargeted);
        if let Some(e) = a.energy {
            r.check(e.is_finite() && e > 0.0, &format!("{path}.energy"), "must be positive");
        }
        attacks.push(AttackConfig { id, x: a.x, y: a.y, range, targets, start, stop, period, mode, energy: a.energy });
    }

    if !r.errors.is_empty() {
        return Err(LoadError::Invalid(r.errors));
    }
    Ok(Validated {
        config: ScenarioConfig {
            seed,
            horizon,
            output_dir: raw.output_dir,
            topology,
            costs,
            schedules: SchedulesConfig { leaf, sector },
            detection,
            roles,
            protocol,
            classes,
            nodes,
            attacks,
        },
        defaults: r.defaults,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
horizon = 100
[topology]
radius = 5.0
[[nodes]]
id = "S"
class = "sink"
x = 0.0
y = 0.0
[[nodes]]
id = "H"
class = "head"
x = 1.0
y = 0.0
"#;

    #[test]
    fn defaults_are_applied_and_reported() {
        let v = validate_str(MINIMAL).unwrap();
        assert_eq!(v.config.detection.rate_threshold, 10);
        assert!(v.defaults.iter().any(|d| d.path == "detection.rate_threshold" && d.value == "10"));
        assert_eq!(v.config.classes["leaf"].initial_energy, 20.0);
    }

    #[test]
    fn two_sinks_are_named() {
        let text = format!("{MINIMAL}\n[[nodes]]\nid = \"S2\"\nclass = \"sink\"\nx = 3.0\ny = 0.0\n");
        let err = validate_str(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nodes[0] (S)") && msg.contains("nodes[2] (S2)"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[detection]\nrate_treshold = 4\n");
        assert!(matches!(validate_str(&text), Err(LoadError::Parse(m)) if m.contains("rate_treshold")));
    }

    #[test]
    fn errors_carry_paths() {
        let text = MINIMAL.replace("horizon = 100", "").replace("class = \"head\"", "class = \"nope\"");
        let err = validate_str(&text).unwrap_err().errors();
        assert!(err.iter().any(|e| e.starts_with("horizon:")));
        assert!(err.iter().any(|e| e.starts_with("nodes[1].class:")));
    }

    #[test]
    fn serialized_config_validates_to_itself() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn fingerprint_ignores_detection_switch() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        let mut off = c.clone();
        off.detection.enabled = false;
        assert_eq!(c.fingerprint(), off.fingerprint());
        let mut other = c.clone();
        other.seed += 1;
        assert_ne!(c.fingerprint(), other.fingerprint());
    }
}
