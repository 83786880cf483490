//! Deterministic discrete-event core: an event queue with stable tie-breaking
//! and seeded, splittable random streams.
//!
//! Events scheduled at equal times fire in scheduling order, so a run is a
//! pure function of its configuration and seed. Random streams are ChaCha12
//! instances keyed by `(seed, stream_id)`: equal keys replay identically and
//! distinct stream ids are independent by construction of the generator, so
//! adding stations to a scenario does not perturb the draws of existing ones.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::time::{Dur, SimTime};

/// Token returned by [`EventQueue::schedule`]; allows cancellation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    at: SimTime,
    seq: u64,
    ev: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Time-ordered event queue; ties break by scheduling sequence.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    cancelled: HashSet<u64>,
    now: SimTime,
    next_seq: u64,
    last_fired: SimTime,
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
            cancelled: HashSet::new(),
            now: SimTime::ZERO,
            next_seq: 0,
            last_fired: SimTime::ZERO,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Schedule `ev` to fire at `at`. Scheduling in the past is a fatal
    /// configuration error.
    pub fn schedule(&mut self, at: SimTime, ev: E) -> EventHandle {
        assert!(
            at >= self.now,
            "event scheduled in the past: {at} < now {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { at, seq, ev }));
        EventHandle(seq)
    }

    pub fn schedule_in(&mut self, delay: Dur, ev: E) -> EventHandle {
        self.schedule(self.now + delay, ev)
    }

    /// Cancel a pending event. Returns false if the handle was already
    /// cancelled (firing consumes the handle silently).
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.cancelled.insert(handle.0)
    }

    /// Pop the next live event with `fire_time <= t_end`, advancing the clock
    /// to its fire time. Returns `None` once no such event remains.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<(SimTime, E)> {
        while let Some(Reverse(head)) = self.heap.peek() {
            if head.at > t_end {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked entry");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.at >= self.last_fired, "event fired out of order");
            self.now = entry.at;
            self.last_fired = entry.at;
            return Some((entry.at, entry.ev));
        }
        None
    }

    /// Process every event with `fire_time <= t_end`, in order. The handler
    /// may schedule further events; those inside the horizon are processed
    /// too. Returns the number of events processed; afterwards the clock
    /// equals `t_end`.
    pub fn run_until(
        &mut self,
        t_end: SimTime,
        mut handler: impl FnMut(&mut Self, SimTime, E),
    ) -> usize {
        assert!(t_end >= self.now, "horizon behind current time");
        let mut processed = 0;
        while let Some((t, ev)) = self.pop_until(t_end) {
            handler(self, t, ev);
            processed += 1;
        }
        self.now = t_end;
        processed
    }

    pub fn is_empty(&self) -> bool {
        self.heap.len() <= self.cancelled.len()
    }
}

/// A seeded random stream. Streams with equal `(seed, stream_id)` produce
/// identical draw sequences.
pub struct RngStream {
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> RngStream {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream { rng }
    }

    /// Uniform integer in `[0, upper]`, the backoff-counter draw.
    pub fn uniform_slots(&mut self, upper: u32) -> u32 {
        self.rng.gen_range(0..=upper)
    }

    /// `mean + sigma * Z` with `Z` standard normal, rounded to the nearest
    /// nanosecond. `sigma == 0` returns `mean` exactly, with no
    /// floating-point noise.
    pub fn sample_normal_ns(&mut self, mean_ns: i64, sigma_ns: f64) -> i64 {
        debug_assert!(sigma_ns >= 0.0, "negative sigma");
        if sigma_ns == 0.0 {
            return mean_ns;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        mean_ns + (z * sigma_ns).round() as i64
    }
}

/// One round of the splitmix64 output function; used to derive per-run seeds
/// from the master seed so that adding sweep points never reshuffles the
/// seeds of existing runs.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
