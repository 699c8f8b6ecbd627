//! Deterministic discrete-event core: integer-nanosecond clock, ordered event
//! queue with stable tie-breaks, and labeled pseudo-random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Virtual time in nanoseconds since simulation start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }
    pub fn from_us(us: u64) -> Self {
        SimTime(us * 1_000)
    }
    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e9).round() as u64)
    }
    pub fn as_ns(self) -> u64 {
        self.0
    }
    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }
    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
    /// Scale by a non-negative factor, rounding to the nearest nanosecond.
    pub fn scale(self, f: f64) -> SimTime {
        SimTime((self.0 as f64 * f).round() as u64)
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl std::fmt::Display for SimTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

/// Time to serialize `bytes` onto a link of `bps` bits/s, rounded up to 1 ns.
pub fn serialization_time(bytes: u64, bps: u64) -> SimTime {
    debug_assert!(bps > 0);
    let bits = bytes as u128 * 8 * 1_000_000_000;
    SimTime(((bits + bps as u128 - 1) / bps as u128) as u64)
}

/// Handle returned by [`EventQueue::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Scheduled<T> {
    at: SimTime,
    seq: u64,
    payload: T,
}

// Min-heap ordering on (at, seq); payload never compared.
impl<T> PartialEq for Scheduled<T> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl<T> Eq for Scheduled<T> {}
impl<T> PartialOrd for Scheduled<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Scheduled<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Ordered event queue. Events with equal fire time execute in schedule order.
pub struct EventQueue<T> {
    heap: BinaryHeap<Scheduled<T>>,
    now: SimTime,
    next_seq: u64,
    cancelled: HashSet<u64>,
    executed: u64,
}

impl<T> Default for EventQueue<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> EventQueue<T> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            cancelled: HashSet::new(),
            executed: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn is_empty(&self) -> bool {
        self.heap.len() == self.cancelled.len()
    }

    pub fn len(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    /// Total events executed so far.
    pub fn executed(&self) -> u64 {
        self.executed
    }

    /// Schedule `payload` at `at`. Scheduling in the past is a logic error and
    /// aborts the run.
    pub fn schedule(&mut self, at: SimTime, payload: T) -> EventHandle {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={} now={}",
            at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Scheduled { at, seq, payload });
        EventHandle(seq)
    }

    /// Cancel a scheduled event. A cancelled event never executes. No-op if it
    /// already fired.
    pub fn cancel(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    /// Pop the next event with fire time <= t_end, advancing the clock to it.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<(SimTime, T)> {
        loop {
            match self.heap.peek() {
                Some(s) if s.at <= t_end => {
                    let s = self.heap.pop().unwrap();
                    if !self.cancelled.is_empty() && self.cancelled.remove(&s.seq) {
                        continue;
                    }
                    debug_assert!(s.at >= self.now, "clock would move backwards");
                    self.now = s.at;
                    self.executed += 1;
                    return Some((s.at, s.payload));
                }
                _ => return None,
            }
        }
    }

    /// Run all events with fire time <= t_end through `handler`, then advance
    /// the clock to t_end. Returns the number of events executed.
    pub fn run_until<F: FnMut(&mut Self, SimTime, T)>(
        &mut self,
        t_end: SimTime,
        mut handler: F,
    ) -> u64 {
        assert!(t_end >= self.now, "run_until into the past");
        let before = self.executed;
        while let Some((at, ev)) = self.pop_due(t_end) {
            handler(self, at, ev);
        }
        self.now = t_end;
        self.executed - before
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stable 64-bit hash used for ECMP-style path selection.
pub fn stable_hash(parts: &[u64]) -> u64 {
    let mut buf = Vec::with_capacity(parts.len() * 8);
    for p in parts {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fnv1a64(&buf)
}

/// A labeled pseudo-random stream: same (label, seed) yields the same draw
/// sequence on every platform, and distinct labels never perturb each other.
pub struct RngStream {
    label: String,
    seed: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(label: &str, seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&fnv1a64(label.as_bytes()).to_le_bytes());
        let mix = fnv1a64(&key[..16]);
        key[16..24].copy_from_slice(&mix.to_le_bytes());
        RngStream {
            label: label.to_string(),
            seed,
            rng: ChaCha12Rng::from_seed(key),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Rejection sampling keeps the draw unbiased.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Exponential inter-arrival with the given rate (events per second),
    /// returned in nanoseconds (>= 1).
    pub fn exp_ns(&mut self, rate_per_sec: f64) -> u64 {
        debug_assert!(rate_per_sec > 0.0);
        let u = self.uniform();
        let dt = -(1.0 - u).ln() / rate_per_sec;
        (dt * 1e9).ceil().max(1.0) as u64
    }

    /// Sample `k` distinct values from [0, n).
    pub fn distinct_below(&mut self, k: usize, n: u64) -> Vec<u64> {
        debug_assert!(k as u64 <= n);
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let v = self.below(n);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }
}
