//! Discrete-event kernel: a clock plus an event queue ordered by `(time, sequence)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Simulation time in abstract integer ticks.
pub type SimTime = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("event scheduled at tick {at} but the clock already reads {now}")]
    InPast { at: SimTime, now: SimTime },
}

/// Returned by [`EventQueue::schedule`]; the insertion sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(pub u64);

#[derive(Debug)]
struct Scheduled<E> {
    at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Scheduled<E> {}

impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Scheduled<E> {
    // BinaryHeap is a max-heap: invert so the earliest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// An event popped from the queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dispatched<E> {
    pub at: SimTime,
    pub seq: u64,
    pub payload: E,
}

/// Priority queue of pending events with a monotone clock.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Scheduled<E>>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: 0,
            next_seq: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, payload: E) -> Result<EventHandle, ScheduleError> {
        if at < self.now {
            return Err(ScheduleError::InPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, payload });
        Ok(EventHandle(seq))
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|s| s.at)
    }

    /// Pops the next event if it is due strictly before `limit`, advancing the clock.
    pub fn pop_before(&mut self, limit: SimTime) -> Option<Dispatched<E>> {
        if self.peek_time()? >= limit {
            return None;
        }
        self.pop()
    }

    pub fn pop(&mut self) -> Option<Dispatched<E>> {
        let s = self.heap.pop()?;
        debug_assert!(s.at >= self.now);
        self.now = s.at;
        Some(Dispatched {
            at: s.at,
            seq: s.seq,
            payload: s.payload,
        })
    }

    /// Moves the clock forward without dispatching anything.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Independent random streams derived from the single scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RngStream {
    Topology = 1,
    Attacker = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn stream(self, stream: RngStream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream as u64);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn later_event_dispatched_after_earlier_ones() {
        let mut q = EventQueue::new();
        q.schedule(3, "a").unwrap();
        q.pop().unwrap();
        q.schedule(5, "e").unwrap();
        q.schedule(4, "b").unwrap();
        assert_eq!(q.pop().unwrap().payload, "b");
        assert_eq!(q.pop().unwrap().payload, "e");
    }

    #[test]
    fn ties_break_by_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(5, 'A').unwrap();
        q.schedule(5, 'B').unwrap();
        q.schedule(2, 'C').unwrap();
        let order: Vec<char> = std::iter::from_fn(|| q.pop().map(|d| d.payload)).collect();
        assert_eq!(order, vec!['C', 'A', 'B']);
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut q = EventQueue::new();
        q.schedule(3, ()).unwrap();
        q.pop();
        assert_eq!(q.schedule(2, ()), Err(ScheduleError::InPast { at: 2, now: 3 }));
        assert!(q.schedule(3, ()).is_ok());
    }

    #[test]
    fn pop_before_respects_limit() {
        let mut q = EventQueue::new();
        q.schedule(10, ()).unwrap();
        assert!(q.pop_before(10).is_none());
        assert!(q.pop_before(11).is_some());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = RngSeed(7).stream(RngStream::Topology).random();
        let b: u64 = RngSeed(7).stream(RngStream::Topology).random();
        let c: u64 = RngSeed(7).stream(RngStream::Attacker).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
