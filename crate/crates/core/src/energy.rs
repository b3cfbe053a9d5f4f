//! Energy accounting, duty cycles, and the expected-energy baseline.
//!
//! Energy is held as integer micro-units so the trace can be summed back to
//! the exact residual of every node.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;

pub const MICROS_PER_UNIT: i64 = 1_000_000;
pub const PPM: i64 = 1_000_000;

/// Energy in micro-units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Energy(i64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub const fn from_micros(micros: i64) -> Self {
        Energy(micros)
    }

    pub fn from_units(units: f64) -> Self {
        Energy((units * MICROS_PER_UNIT as f64).round() as i64)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn times(self, n: u64) -> Energy {
        Energy(self.0 * n as i64)
    }

    /// `self * ppm / 1e6`, rounded toward zero.
    pub fn scale_ppm(self, ppm: u32) -> Energy {
        Energy(((self.0 as i128 * ppm as i128) / PPM as i128) as i64)
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        Energy(iter.map(|e| e.0).sum())
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Energy {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(Energy)
    }
}

/// What a unit of energy was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Transmit,
    Receive,
    Sense,
    Idle,
    Sleep,
    Detect,
    /// Idle listening forced by an out-of-schedule wake-up.
    Wake,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Transmit,
        Action::Receive,
        Action::Sense,
        Action::Idle,
        Action::Sleep,
        Action::Detect,
        Action::Wake,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Transmit => "tx",
            Action::Receive => "rx",
            Action::Sense => "sense",
            Action::Idle => "idle",
            Action::Sleep => "sleep",
            Action::Detect => "detect",
            Action::Wake => "wake",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown energy action `{s}`"))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnergyError {
    #[error("sleep schedule needs 0 < wake_len <= period and wake_offset + wake_len <= period (got period={period}, offset={offset}, len={len})")]
    BadSchedule { period: u64, offset: u64, len: u64 },
    #[error("cost `{0}` is negative")]
    NegativeCost(&'static str),
    #[error("sleep cost must be strictly below idle-listen cost")]
    SleepNotCheaper,
    #[error("no energy baseline registered for class `{0}`")]
    UnknownClass(String),
}

/// Per-action energy costs. Idle and sleep are per tick, detection per packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostTable {
    pub transmit: Energy,
    pub receive: Energy,
    pub sense: Energy,
    pub idle_listen: Energy,
    pub sleep: Energy,
    pub detection: Energy,
}

impl CostTable {
    pub fn validate(&self) -> Result<(), EnergyError> {
        for (name, e) in [
            ("transmit", self.transmit),
            ("receive", self.receive),
            ("sense", self.sense),
            ("idle_listen", self.idle_listen),
            ("sleep", self.sleep),
            ("detection", self.detection),
        ] {
            if e < Energy::ZERO {
                return Err(EnergyError::NegativeCost(name));
            }
        }
        if self.sleep >= self.idle_listen {
            return Err(EnergyError::SleepNotCheaper);
        }
        Ok(())
    }

    pub fn cost(&self, action: Action) -> Energy {
        match action {
            Action::Transmit => self.transmit,
            Action::Receive => self.receive,
            Action::Sense => self.sense,
            Action::Idle | Action::Wake => self.idle_listen,
            Action::Sleep => self.sleep,
            Action::Detect => self.detection,
        }
    }
}

/// Periodic duty cycle: awake iff `t mod period` lies in `[wake_offset, wake_offset + wake_len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SleepSchedule {
    period: u64,
    wake_offset: u64,
    wake_len: u64,
}

impl SleepSchedule {
    pub fn new(period: u64, wake_offset: u64, wake_len: u64) -> Result<Self, EnergyError> {
        if wake_len == 0 || wake_len > period || wake_offset + wake_len > period {
            return Err(EnergyError::BadSchedule {
                period,
                offset: wake_offset,
                len: wake_len,
            });
        }
        Ok(SleepSchedule {
            period,
            wake_offset,
            wake_len,
        })
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn wake_offset(&self) -> u64 {
        self.wake_offset
    }

    pub fn wake_len(&self) -> u64 {
        self.wake_len
    }

    pub fn is_awake(&self, t: SimTime) -> bool {
        let phase = t % self.period;
        phase >= self.wake_offset && phase < self.wake_offset + self.wake_len
    }

    /// Awake ticks in `[0, n)`.
    fn awake_prefix(&self, n: SimTime) -> u64 {
        let full = n / self.period;
        let rem = n % self.period;
        full * self.wake_len + rem.saturating_sub(self.wake_offset).min(self.wake_len)
    }

    /// Awake ticks in `[from, to)`.
    pub fn awake_ticks(&self, from: SimTime, to: SimTime) -> u64 {
        if to <= from {
            return 0;
        }
        self.awake_prefix(to) - self.awake_prefix(from)
    }
}

impl fmt::Display for SleepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.period, self.wake_offset, self.wake_len)
    }
}

impl FromStr for SleepSchedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        let [p, o, l] = parts.as_slice() else {
            return Err(format!("bad schedule `{s}`"));
        };
        let num = |x: &str| x.parse::<u64>().map_err(|e| format!("bad schedule `{s}`: {e}"));
        SleepSchedule::new(num(p)?, num(o)?, num(l)?).map_err(|e| e.to_string())
    }
}

/// How a node's background (idle / sleep) energy accrues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// Not in the network yet, or dead.
    Off,
    AlwaysOn,
    /// Told to sleep by the gateway until it is profiled.
    Asleep,
    Duty(SleepSchedule),
}

impl PowerMode {
    pub fn is_awake(&self, t: SimTime) -> bool {
        match self {
            PowerMode::Off | PowerMode::Asleep => false,
            PowerMode::AlwaysOn => true,
            PowerMode::Duty(s) => s.is_awake(t),
        }
    }

    /// `(awake_ticks, asleep_ticks)` in `[from, to)`.
    pub fn split(&self, from: SimTime, to: SimTime) -> (u64, u64) {
        let span = to.saturating_sub(from);
        match self {
            PowerMode::Off => (0, 0),
            PowerMode::AlwaysOn => (span, 0),
            PowerMode::Asleep => (0, span),
            PowerMode::Duty(s) => {
                let awake = s.awake_ticks(from, to);
                (awake, span - awake)
            }
        }
    }

    /// Background cost `(idle, sleep)` over `[from, to)`.
    pub fn background(&self, costs: &CostTable, from: SimTime, to: SimTime) -> (Energy, Energy) {
        let (awake, asleep) = self.split(from, to);
        (costs.idle_listen.times(awake), costs.sleep.times(asleep))
    }
}

/// Outcome of a debit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Debit {
    /// Full amount charged.
    Charged(Energy),
    /// Residual ran out; only the remaining residual was charged and the node is now dead.
    Died(Energy),
    /// Node was already dead; nothing charged.
    Ignored,
}

impl Debit {
    pub fn charged(self) -> Energy {
        match self {
            Debit::Charged(e) | Debit::Died(e) => e,
            Debit::Ignored => Energy::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnergyState {
    initial: Energy,
    residual: Energy,
    consumed: [Energy; Action::ALL.len()],
    dead: bool,
    unlimited: bool,
}

impl EnergyState {
    pub fn new(initial: Energy) -> Self {
        EnergyState {
            initial,
            residual: initial,
            consumed: [Energy::ZERO; Action::ALL.len()],
            dead: initial <= Energy::ZERO,
            unlimited: false,
        }
    }

    /// Never depletes and records nothing.
    pub fn unlimited() -> Self {
        EnergyState {
            unlimited: true,
            ..EnergyState::new(Energy::from_micros(i64::MAX))
        }
    }

    pub fn initial(&self) -> Energy {
        self.initial
    }

    pub fn residual(&self) -> Energy {
        self.residual
    }

    pub fn is_dead(&self) -> bool {
        self.dead
    }

    pub fn is_unlimited(&self) -> bool {
        self.unlimited
    }

    pub fn consumed(&self, action: Action) -> Energy {
        self.consumed[action as usize]
    }

    pub fn total_consumed(&self) -> Energy {
        self.consumed.iter().copied().sum()
    }

    /// Debits `amount`; a residual that reaches zero kills the node.
    pub fn consume(&mut self, action: Action, amount: Energy) -> Debit {
        if self.dead {
            return Debit::Ignored;
        }
        if self.unlimited {
            return Debit::Charged(Energy::ZERO);
        }
        if amount >= self.residual {
            let charged = self.residual;
            self.consumed[action as usize] += charged;
            self.residual = Energy::ZERO;
            self.dead = true;
            Debit::Died(charged)
        } else {
            self.consumed[action as usize] += amount;
            self.residual = self.residual - amount;
            Debit::Charged(amount)
        }
    }

    /// Marks the node dead without further debit (used when a residual of exactly zero is reached).
    pub fn kill(&mut self) {
        self.dead = true;
    }
}

/// Linear "normal residual energy" curve for a node class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyBaseline {
    pub initial: Energy,
    pub schedule: SleepSchedule,
    pub awake_rate: Energy,
    pub sleep_rate: Energy,
    /// Margin factor in parts per million.
    pub margin_ppm: u32,
}

impl EnergyBaseline {
    /// `initial - t * (duty * awake_rate + (1 - duty) * sleep_rate)`, floored at zero.
    pub fn expected(&self, t: SimTime) -> Energy {
        let period = self.schedule.period() as i128;
        let len = self.schedule.wake_len() as i128;
        let per_period = len * self.awake_rate.micros() as i128 + (period - len) * self.sleep_rate.micros() as i128;
        let drain = (t as i128 * per_period) / period;
        let e = self.initial.micros() as i128 - drain;
        Energy::from_micros(e.max(0) as i64)
    }

    /// `Th_RE(t) = m * expected(t)`.
    pub fn threshold(&self, t: SimTime) -> Energy {
        self.expected(t).scale_ppm(self.margin_ppm)
    }
}

/// Background cost over `[from, to)` capped at `residual`: returns the first tick
/// at which cumulative consumption reaches the residual, if it does.
pub fn depletion_tick(mode: &PowerMode, costs: &CostTable, from: SimTime, to: SimTime, residual: Energy) -> Option<SimTime> {
    let total = |end: SimTime| {
        let (i, s) = mode.background(costs, from, end);
        i + s
    };
    if total(to) < residual {
        return None;
    }
    let (mut lo, mut hi) = (from, to);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if total(mid) >= residual {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}
