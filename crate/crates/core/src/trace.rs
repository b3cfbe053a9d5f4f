//! Run trace: one record per line, tab separated.
//!
//! ```text
//! <tick>\t<KIND>\t<actor>\t<key>=<value>\t...
//! ```
//!
//! Node ids are written by name; the `NODE` header lines at tick 0 define the
//! name table, so a trace file is self-contained. Energies are integer
//! micro-units.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::attacker::AttackMode;
use crate::detection::{Decision, Phase1Verdict, Tag};
use crate::energy::{Action, Energy, SleepSchedule};
use crate::engine::SimTime;
use crate::protocol::{PacketId, PacketKind};
use crate::roles::{Candidate, ElectionRecord, Role, Tier};
use crate::topology::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigHeader {
    pub fingerprint: String,
    pub seed: u64,
    pub horizon: SimTime,
    pub detection: bool,
    pub rate_threshold: u32,
    pub window: u64,
    pub margin_ppm: u32,
    pub corroboration: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeHeader {
    pub name: String,
    pub class: String,
    pub tier: Option<Tier>,
    pub x: f64,
    pub y: f64,
    /// `None` for an attacker with unlimited energy.
    pub initial: Option<Energy>,
    pub attacker: bool,
    pub arrive: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackHeader {
    pub attacker: NodeId,
    pub targets: Vec<NodeId>,
    pub mode: AttackMode,
    pub start: SimTime,
    pub stop: SimTime,
    pub period: u64,
}

/// A profile as issued by the gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRecord {
    pub node: NodeId,
    pub role: Role,
    /// `None` means always awake.
    pub schedule: Option<SleepSchedule>,
    pub class: String,
    pub parent: Option<NodeId>,
    pub cluster: Option<usize>,
    pub sector: Option<usize>,
}

/// One radio hop of one packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopRecord {
    pub pkt: PacketId,
    pub kind: PacketKind,
    pub src: NodeId,
    pub from: NodeId,
    pub to: NodeId,
    /// 1 for the first hop after the originator.
    pub hop: u32,
    pub created: SimTime,
    pub residual: Energy,
    pub tag: Tag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    /// Sender is on the isolation list.
    Isolated,
    DeadReceiver,
    /// A legitimate request reached a sleeping leaf.
    Asleep,
    /// Receiver no longer holds the role the packet was routed for.
    StaleRoute,
    /// Final phase-2 decision.
    Detection,
    TargetIsolated,
    NoRoute,
}

impl DropReason {
    const ALL: [DropReason; 7] = [
        DropReason::Isolated,
        DropReason::DeadReceiver,
        DropReason::Asleep,
        DropReason::StaleRoute,
        DropReason::Detection,
        DropReason::TargetIsolated,
        DropReason::NoRoute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Isolated => "isolated",
            DropReason::DeadReceiver => "dead_receiver",
            DropReason::Asleep => "asleep",
            DropReason::StaleRoute => "stale_route",
            DropReason::Detection => "detection",
            DropReason::TargetIsolated => "target_isolated",
            DropReason::NoRoute => "no_route",
        }
    }
}

impl FromStr for DropReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DropReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown drop reason `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SleepCause {
    /// A forced wake window ended.
    ForcedEnd,
    /// The gateway told a newly arrived node to sleep.
    Signal,
}

impl SleepCause {
    pub fn as_str(self) -> &'static str {
        match self {
            SleepCause::ForcedEnd => "forced_end",
            SleepCause::Signal => "signal",
        }
    }
}

impl FromStr for SleepCause {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forced_end" => Ok(SleepCause::ForcedEnd),
            "signal" => Ok(SleepCause::Signal),
            _ => Err(format!("unknown sleep cause `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EndReason {
    Horizon,
    AllDead,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::Horizon => "horizon",
            EndReason::AllDead => "all_dead",
        }
    }
}

impl FromStr for EndReason {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "horizon" => Ok(EndReason::Horizon),
            "all_dead" => Ok(EndReason::AllDead),
            _ => Err(format!("unknown end reason `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Config(ConfigHeader),
    Node(NodeHeader),
    Attack(AttackHeader),
    Query { sg: NodeId, participants: usize },
    Response { node: NodeId, residual: Energy, degree: usize },
    Elect(ElectionRecord),
    Halt { sg: NodeId, reason: String },
    Profile(ProfileRecord),
    Send(HopRecord),
    Deliver(HopRecord),
    Drop { hop: HopRecord, reason: DropReason },
    Tag { tagger: NodeId, pkt: PacketId, src: NodeId, created: SimTime, verdict: Phase1Verdict },
    Decide { cic: NodeId, pkt: PacketId, src: NodeId, tag: Tag, decision: Decision, confirmed: bool, invalid_count: u32 },
    Isolate { node: NodeId, verdict: PacketId, by: NodeId },
    Energy { node: NodeId, action: Action, amount: Energy },
    Death { node: NodeId, at: SimTime },
    Wake { node: NodeId, cause: PacketId, until: SimTime },
    Sleep { node: NodeId, cause: SleepCause },
    Fire { attacker: NodeId, target: NodeId, pkt: PacketId },
    Arrive { node: NodeId },
    Sample { node: NodeId, residual: Energy },
    Note { node: NodeId, what: String },
    End { reason: EndReason, events: u64 },
}

impl Entry {
    pub fn kind(&self) -> &'static str {
        match self {
            Entry::Config(_) => "CONFIG",
            Entry::Node(_) => "NODE",
            Entry::Attack(_) => "ATTACK",
            Entry::Query { .. } => "QUERY",
            Entry::Response { .. } => "RESPONSE",
            Entry::Elect(_) => "ELECT",
            Entry::Halt { .. } => "HALT",
            Entry::Profile(_) => "PROFILE",
            Entry::Send(_) => "SEND",
            Entry::Deliver(_) => "DELIVER",
            Entry::Drop { .. } => "DROP",
            Entry::Tag { .. } => "TAG",
            Entry::Decide { .. } => "DECIDE",
            Entry::Isolate { .. } => "ISOLATE",
            Entry::Energy { .. } => "ENERGY",
            Entry::Death { .. } => "DEATH",
            Entry::Wake { .. } => "WAKE",
            Entry::Sleep { .. } => "SLEEP",
            Entry::Fire { .. } => "FIRE",
            Entry::Arrive { .. } => "ARRIVE",
            Entry::Sample { .. } => "SAMPLE",
            Entry::Note { .. } => "NOTE",
            Entry::End { .. } => "END",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: SimTime,
    pub entry: Entry,
}

/// Complete, ordered log of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    names: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

struct Line {
    out: String,
}

impl Line {
    fn new(tick: SimTime, kind: &str, actor: &str) -> Self {
        let mut out = String::with_capacity(96);
        let _ = write!(out, "{tick}\t{kind}\t{actor}");
        Line { out }
    }

    fn kv(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        let _ = write!(self.out, "\t{key}={value}");
        self
    }
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn flag(b: bool) -> u8 {
    u8::from(b)
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tick: SimTime, entry: Entry) {
        if let Entry::Node(h) = &entry {
            self.names.push(h.name.clone());
        }
        self.records.push(TraceRecord { tick, entry });
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: NodeId) -> &str {
        self.names.get(id.index()).map_or("?", String::as_str)
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|n| n == name).map(|i| NodeId(i as u32))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.records.last(), Some(TraceRecord { entry: Entry::End { .. }, .. }))
    }

    pub fn format_record(&self, r: &TraceRecord) -> String {
        let n = |id: NodeId| self.name(id);
        let t = r.tick;
        let kind = r.entry.kind();
        let mut l;
        match &r.entry {
            Entry::Config(c) => {
                l = Line::new(t, kind, "-");
                l.kv("fp", &c.fingerprint)
                    .kv("seed", c.seed)
                    .kv("horizon", c.horizon)
                    .kv("detection", flag(c.detection))
                    .kv("rate_threshold", c.rate_threshold)
                    .kv("window", c.window)
                    .kv("margin_ppm", c.margin_ppm)
                    .kv("corroboration", c.corroboration);
            }
            Entry::Node(h) => {
                l = Line::new(t, kind, &h.name);
                l.kv("class", &h.class)
                    .kv("tier", h.tier.map_or("-", Tier::as_str))
                    .kv("x", h.x)
                    .kv("y", h.y)
                    .kv("initial", h.initial.map_or_else(|| "inf".to_string(), |e| e.to_string()))
                    .kv("attacker", flag(h.attacker))
                    .kv("arrive", opt(h.arrive));
            }
            Entry::Attack(a) => {
                l = Line::new(t, kind, n(a.attacker));
                let targets: Vec<&str> = a.targets.iter().map(|&x| n(x)).collect();
                l.kv("targets", targets.join(","))
                    .kv("mode", a.mode.as_str())
                    .kv("start", a.start)
                    .kv("stop", a.stop)
                    .kv("period", a.period);
            }
            Entry::Query { sg, participants } => {
                l = Line::new(t, kind, n(*sg));
                l.kv("participants", participants);
            }
            Entry::Response { node, residual, degree } => {
                l = Line::new(t, kind, n(*node));
                l.kv("residual", residual).kv("degree", degree);
            }
            Entry::Elect(e) => {
                l = Line::new(t, kind, n(e.winner));
                let cands: Vec<String> = e
                    .candidates
                    .iter()
                    .map(|c| format!("{}:{}:{}:{}", n(c.node), c.energy, c.degree, opt(c.distance)))
                    .collect();
                l.kv("role", e.role)
                    .kv("cluster", e.cluster)
                    .kv("sector", opt(e.sector))
                    .kv("cands", cands.join(","));
            }
            Entry::Halt { sg, reason } => {
                l = Line::new(t, kind, n(*sg));
                l.kv("reason", reason.replace('\t', " "));
            }
            Entry::Profile(p) => {
                l = Line::new(t, kind, n(p.node));
                l.kv("role", p.role)
                    .kv("schedule", p.schedule.map_or_else(|| "on".to_string(), |s| s.to_string()))
                    .kv("class", &p.class)
                    .kv("parent", p.parent.map_or("-", n))
                    .kv("cluster", opt(p.cluster))
                    .kv("sector", opt(p.sector));
            }
            Entry::Send(h) => {
                l = Line::new(t, kind, n(h.from));
                hop_fields(&mut l, h, n).kv("to", n(h.to));
            }
            Entry::Deliver(h) => {
                l = Line::new(t, kind, n(h.to));
                hop_fields(&mut l, h, n).kv("from", n(h.from));
            }
            Entry::Drop { hop, reason } => {
                l = Line::new(t, kind, n(hop.to));
                hop_fields(&mut l, hop, n).kv("from", n(hop.from)).kv("reason", reason.as_str());
            }
            Entry::Tag { tagger, pkt, src, created, verdict: v } => {
                l = Line::new(t, kind, n(*tagger));
                l.kv("pkt", pkt)
                    .kv("src", n(*src))
                    .kv("created", created)
                    .kv("tag", v.tag)
                    .kv("reason", v.reason)
                    .kv("count", v.window_count)
                    .kv("in_sleep", flag(v.in_sleep))
                    .kv("unprofiled", flag(v.unprofiled))
                    .kv("residual", v.residual)
                    .kv("threshold", opt(v.threshold))
                    .kv("suspected", flag(v.suspected));
            }
            Entry::Decide { cic, pkt, src, tag, decision, confirmed, invalid_count } => {
                l = Line::new(t, kind, n(*cic));
                l.kv("pkt", pkt)
                    .kv("src", n(*src))
                    .kv("tag", tag)
                    .kv("decision", decision)
                    .kv("confirmed", flag(*confirmed))
                    .kv("invalid_count", invalid_count);
            }
            Entry::Isolate { node, verdict, by } => {
                l = Line::new(t, kind, n(*node));
                l.kv("verdict", verdict).kv("by", n(*by));
            }
            Entry::Energy { node, action, amount } => {
                l = Line::new(t, kind, n(*node));
                l.kv("action", action).kv("amount", amount);
            }
            Entry::Death { node, at } => {
                l = Line::new(t, kind, n(*node));
                l.kv("at", at);
            }
            Entry::Wake { node, cause, until } => {
                l = Line::new(t, kind, n(*node));
                l.kv("cause", cause).kv("until", until);
            }
            Entry::Sleep { node, cause } => {
                l = Line::new(t, kind, n(*node));
                l.kv("cause", cause.as_str());
            }
            Entry::Fire { attacker, target, pkt } => {
                l = Line::new(t, kind, n(*attacker));
                l.kv("target", n(*target)).kv("pkt", pkt);
            }
            Entry::Arrive { node } => {
                l = Line::new(t, kind, n(*node));
            }
            Entry::Sample { node, residual } => {
                l = Line::new(t, kind, n(*node));
                l.kv("residual", residual);
            }
            Entry::Note { node, what } => {
                l = Line::new(t, kind, n(*node));
                l.kv("what", what.replace('\t', " "));
            }
            Entry::End { reason, events } => {
                l = Line::new(t, kind, "-");
                l.kv("reason", reason.as_str()).kv("events", events);
            }
        }
        l.out
    }

    /// Canonical text serialization.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 80);
        for r in &self.records {
            s.push_str(&self.format_record(r));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<RunTrace, TraceParseError> {
        let mut trace = RunTrace::new();
        let mut index: HashMap<String, NodeId> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let err = |m: String| TraceParseError { line: i + 1, message: m };
            let rec = parse_line(raw, &index).map_err(err)?;
            if let Entry::Node(h) = &rec.entry {
                let id = NodeId(trace.names.len() as u32);
                if index.insert(h.name.clone(), id).is_some() {
                    return Err(err(format!("duplicate node `{}`", h.name)));
                }
            }
            trace.push(rec.tick, rec.entry);
        }
        Ok(trace)
    }
}

impl fmt::Display for RunTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.records {
            writeln!(f, "{}", self.format_record(r))?;
        }
        Ok(())
    }
}

fn hop_fields<'a>(l: &'a mut Line, h: &HopRecord, n: impl Fn(NodeId) -> &'a str) -> &'a mut Line {
    let src = n(h.src);
    l.kv("pkt", h.pkt)
        .kv("kind", h.kind.as_str())
        .kv("src", src)
        .kv("hop", h.hop)
        .kv("created", h.created)
        .kv("residual", h.residual)
        .kv("tag", h.tag)
}

struct Fields<'a> {
    map: HashMap<&'a str, &'a str>,
    index: &'a HashMap<String, NodeId>,
}

impl<'a> Fields<'a> {
    fn raw(&self, key: &str) -> Result<&'a str, String> {
        self.map.get(key).copied().ok_or_else(|| format!("missing field `{key}`"))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, String>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key)?;
        v.parse().map_err(|e| format!("field `{key}`=`{v}`: {e}"))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, String>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key)? {
            "-" => Ok(None),
            v => v.parse().map(Some).map_err(|e| format!("field `{key}`=`{v}`: {e}")),
        }
    }

    fn flag(&self, key: &str) -> Result<bool, String> {
        match self.raw(key)? {
            "0" => Ok(false),
            "1" => Ok(true),
            v => Err(format!("field `{key}`: expected 0/1, got `{v}`")),
        }
    }

    fn lookup(&self, name: &str) -> Result<NodeId, String> {
        self.index.get(name).copied().ok_or_else(|| format!("unknown node `{name}`"))
    }

    fn node(&self, key: &str) -> Result<NodeId, String> {
        self.lookup(self.raw(key)?)
    }

    fn opt_node(&self, key: &str) -> Result<Option<NodeId>, String> {
        match self.raw(key)? {
            "-" => Ok(None),
            v => self.lookup(v).map(Some),
        }
    }

    fn hop(&self, actor: NodeId, actor_is_sender: bool) -> Result<HopRecord, String> {
        let (from, to) = if actor_is_sender {
            (actor, self.node("to")?)
        } else {
            (self.node("from")?, actor)
        };
        Ok(HopRecord {
            pkt: self.get("pkt")?,
            kind: self.get("kind")?,
            src: self.node("src")?,
            from,
            to,
            hop: self.get("hop")?,
            created: self.get("created")?,
            residual: self.get("residual")?,
            tag: self.get("tag")?,
        })
    }
}

fn parse_line(raw: &str, index: &HashMap<String, NodeId>) -> Result<TraceRecord, String> {
    let mut cols = raw.split('\t');
    let tick: SimTime = cols
        .next()
        .ok_or("empty line")?
        .parse()
        .map_err(|e| format!("bad tick: {e}"))?;
    let kind = cols.next().ok_or("missing kind")?;
    let actor_name = cols.next().ok_or("missing actor")?;
    let mut map = HashMap::new();
    for c in cols {
        let (k, v) = c.split_once('=').ok_or_else(|| format!("field `{c}` is not key=value"))?;
        map.insert(k, v);
    }
    let f = Fields { map, index };
    let actor = || f.lookup(actor_name);

    let entry = match kind {
        "CONFIG" => Entry::Config(ConfigHeader {
            fingerprint: f.raw("fp")?.to_string(),
            seed: f.get("seed")?,
            horizon: f.get("horizon")?,
            detection: f.flag("detection")?,
            rate_threshold: f.get("rate_threshold")?,
            window: f.get("window")?,
            margin_ppm: f.get("margin_ppm")?,
            corroboration: f.get("corroboration")?,
        }),
        "NODE" => Entry::Node(NodeHeader {
            name: actor_name.to_string(),
            class: f.raw("class")?.to_string(),
            tier: f.opt("tier")?,
            x: f.get("x")?,
            y: f.get("y")?,
            initial: match f.raw("initial")? {
                "inf" => None,
                v => Some(v.parse().map_err(|e| format!("field `initial`: {e}"))?),
            },
            attacker: f.flag("attacker")?,
            arrive: f.opt("arrive")?,
        }),
        "ATTACK" => Entry::Attack(AttackHeader {
            attacker: actor()?,
            targets: f
                .raw("targets")?
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| f.lookup(s))
                .collect::<Result<_, _>>()?,
            mode: f.get("mode")?,
            start: f.get("start")?,
            stop: f.get("stop")?,
            period: f.get("period")?,
        }),
        "QUERY" => Entry::Query {
            sg: actor()?,
            participants: f.get("participants")?,
        },
        "RESPONSE" => Entry::Response {
            node: actor()?,
            residual: f.get("residual")?,
            degree: f.get("degree")?,
        },
        "ELECT" => {
            let mut candidates = Vec::new();
            for c in f.raw("cands")?.split(',').filter(|s| !s.is_empty()) {
                let parts: Vec<&str> = c.split(':').collect();
                let [name, energy, degree, dist] = parts.as_slice() else {
                    return Err(format!("bad candidate `{c}`"));
                };
                candidates.push(Candidate {
                    node: f.lookup(name)?,
                    energy: energy.parse().map_err(|e| format!("candidate energy: {e}"))?,
                    degree: degree.parse().map_err(|e| format!("candidate degree: {e}"))?,
                    distance: match *dist {
                        "-" => None,
                        d => Some(d.parse().map_err(|e| format!("candidate distance: {e}"))?),
                    },
                });
            }
            Entry::Elect(ElectionRecord {
                tick,
                role: f.get("role")?,
                cluster: f.get("cluster")?,
                sector: f.opt("sector")?,
                winner: actor()?,
                candidates,
            })
        }
        "HALT" => Entry::Halt {
            sg: actor()?,
            reason: f.raw("reason")?.to_string(),
        },
        "PROFILE" => Entry::Profile(ProfileRecord {
            node: actor()?,
            role: f.get("role")?,
            schedule: match f.raw("schedule")? {
                "on" => None,
                s => Some(s.parse()?),
            },
            class: f.raw("class")?.to_string(),
            parent: f.opt_node("parent")?,
            cluster: f.opt("cluster")?,
            sector: f.opt("sector")?,
        }),
        "SEND" => Entry::Send(f.hop(actor()?, true)?),
        "DELIVER" => Entry::Deliver(f.hop(actor()?, false)?),
        "DROP" => Entry::Drop {
            hop: f.hop(actor()?, false)?,
            reason: f.get("reason")?,
        },
        "TAG" => Entry::Tag {
            tagger: actor()?,
            pkt: f.get("pkt")?,
            src: f.node("src")?,
            created: f.get("created")?,
            verdict: Phase1Verdict {
                tag: f.get("tag")?,
                reason: f.get("reason")?,
                window_count: f.get("count")?,
                in_sleep: f.flag("in_sleep")?,
                unprofiled: f.flag("unprofiled")?,
                residual: f.get("residual")?,
                threshold: f.opt("threshold")?,
                suspected: f.flag("suspected")?,
            },
        },
        "DECIDE" => Entry::Decide {
            cic: actor()?,
            pkt: f.get("pkt")?,
            src: f.node("src")?,
            tag: f.get("tag")?,
            decision: f.get("decision")?,
            confirmed: f.flag("confirmed")?,
            invalid_count: f.get("invalid_count")?,
        },
        "ISOLATE" => Entry::Isolate {
            node: actor()?,
            verdict: f.get("verdict")?,
            by: f.node("by")?,
        },
        "ENERGY" => Entry::Energy {
            node: actor()?,
            action: f.get("action")?,
            amount: f.get("amount")?,
        },
        "DEATH" => Entry::Death {
            node: actor()?,
            at: f.get("at")?,
        },
        "WAKE" => Entry::Wake {
            node: actor()?,
            cause: f.get("cause")?,
            until: f.get("until")?,
        },
        "SLEEP" => Entry::Sleep {
            node: actor()?,
            cause: f.get("cause")?,
        },
        "FIRE" => Entry::Fire {
            attacker: actor()?,
            target: f.node("target")?,
            pkt: f.get("pkt")?,
        },
        "ARRIVE" => Entry::Arrive { node: actor()? },
        "SAMPLE" => Entry::Sample {
            node: actor()?,
            residual: f.get("residual")?,
        },
        "NOTE" => Entry::Note {
            node: actor()?,
            what: f.raw("what")?.to_string(),
        },
        "END" => Entry::End {
            reason: f.get("reason")?,
            events: f.get("events")?,
        },
        other => return Err(format!("unknown record kind `{other}`")),
    };
    Ok(TraceRecord { tick, entry })
}
