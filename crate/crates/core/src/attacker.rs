//! External sleep-deprivation intruder sending fake data requests.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::protocol::{Hop, PacketKind};
use crate::sim::{Event, World};
use crate::topology::NodeId;
use crate::trace::Entry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Fire only while the target is asleep.
    SleepTargeted,
    /// Fire every period regardless of the target's state.
    Blind,
}

impl AttackMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackMode::SleepTargeted => "sleep_targeted",
            AttackMode::Blind => "blind",
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sleep_targeted" => Ok(AttackMode::SleepTargeted),
            "blind" => Ok(AttackMode::Blind),
            _ => Err(format!("unknown attack mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackPlan {
    pub attacker: NodeId,
    pub targets: Vec<NodeId>,
    /// First tick the attacker may fire.
    pub start: SimTime,
    /// Exclusive end.
    pub stop: SimTime,
    pub period: u64,
    pub mode: AttackMode,
    pub range: f64,
}

impl AttackPlan {
    /// Fire ticks in `[start, stop)` that fall before `horizon`.
    pub fn fire_ticks(&self, horizon: SimTime) -> impl Iterator<Item = SimTime> {
        let end = self.stop.min(horizon);
        (self.start..end).step_by(self.period.max(1) as usize)
    }
}

impl World {
    /// One firing of plan `index`: a fake request to every eligible target.
    pub(crate) fn fire(&mut self, index: usize, t: SimTime) {
        let plan = self.attacks[index].clone();
        let k = plan.attacker;
        for &target in &plan.targets {
            if self.nodes[k.index()].energy.is_dead() {
                break;
            }
            if !self.settle_alive(target, t) {
                continue;
            }
            if !self.nodes[target.index()].arrived {
                continue;
            }
            let d = self.positions[k.index()].distance(&self.positions[target.index()]);
            if d > plan.range {
                continue;
            }
            if plan.mode == AttackMode::SleepTargeted && self.is_awake(target, t) {
                continue;
            }
            let packet = self.next_packet(PacketKind::FakeRequest, k, t);
            self.log(t, Entry::Fire { attacker: k, target, pkt: packet.id });
            self.transmit(Hop { packet, from: k, to: target, hop: 1, expect: None }, t);
        }
        let next = t + plan.period;
        if next < plan.stop && next < self.horizon {
            self.schedule(next, Event::Fire { plan: index });
        }
    }
}
