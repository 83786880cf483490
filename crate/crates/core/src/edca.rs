//! EDCA contention: truncated binary exponential backoff state and a
//! slot-exact contention resolver.
//!
//! The resolver is centralized: instead of simulating every idle slot as an
//! event, it computes each waiting station's attempt instant as
//! `base + AIFS + counter * slot`, where `base` is the latest of the medium
//! going physically idle, the station's own NAV expiry, and the instant the
//! station became ready. When the medium turns busy, each waiter is credited
//! the idle slots it observed after completing AIFS (counters freeze,
//! never reset). Stations whose attempt instants coincide transmit
//! simultaneously, which is how collisions arise.

use std::collections::BTreeMap;

use crate::channel::StationId;
use crate::time::{Dur, SimTime};

/// Access-category parameters; the model uses one best-effort category.
#[derive(Debug, Clone, Copy)]
pub struct EdcaParams {
    pub slot: Dur,
    pub sifs: Dur,
    pub aifsn: u32,
    pub cw_min: u32,
    pub cw_max: u32,
}

impl EdcaParams {
    pub fn aifs(&self) -> Dur {
        self.sifs + self.slot * self.aifsn as u64
    }
}

impl Default for EdcaParams {
    fn default() -> Self {
        EdcaParams {
            slot: Dur::from_micros(9),
            sifs: Dur::from_micros(16),
            aifsn: 3,
            cw_min: 15,
            cw_max: 1023,
        }
    }
}

/// Fixed durations of the frame exchanges, all configurable.
#[derive(Debug, Clone, Copy)]
pub struct ExchangeTiming {
    pub sifs: Dur,
    pub slot: Dur,
    pub data: Dur,
    pub ack: Dur,
    pub cts: Dur,
    pub tf: Dur,
    pub ps_poll: Dur,
}

impl ExchangeTiming {
    /// Duration of a successful DATA + SIFS + ACK exchange.
    pub fn exchange_span(&self) -> Dur {
        self.data + self.sifs + self.ack
    }
}

impl Default for ExchangeTiming {
    fn default() -> Self {
        ExchangeTiming {
            sifs: Dur::from_micros(16),
            slot: Dur::from_micros(9),
            data: Dur::from_micros(1480),
            ack: Dur::from_micros(44),
            cts: Dur::from_micros(44),
            tf: Dur::from_micros(100),
            ps_poll: Dur::from_micros(44),
        }
    }
}

/// Frame classes with distinct backoff feedback rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    Data,
    Control,
    /// WUR frames are unacknowledged; their outcome never touches the
    /// contention window or retry counter.
    Wur,
}

/// Per-station backoff state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdcaEntity {
    pub cw: u32,
    pub retry_count: u32,
    pub cw_min: u32,
    pub cw_max: u32,
}

impl EdcaEntity {
    pub fn new(params: &EdcaParams) -> EdcaEntity {
        EdcaEntity {
            cw: params.cw_min,
            retry_count: 0,
            cw_min: params.cw_min,
            cw_max: params.cw_max,
        }
    }
}

/// Apply the outcome of a transmission attempt to the backoff state.
/// Data/control: success resets, failure doubles the window (truncated).
/// WUR frames leave the state untouched either way.
pub fn on_outcome(entity: &mut EdcaEntity, class: FrameClass, success: bool) {
    if class == FrameClass::Wur {
        return;
    }
    if success {
        entity.cw = entity.cw_min;
        entity.retry_count = 0;
    } else {
        entity.cw = (2 * entity.cw + 1).min(entity.cw_max);
        entity.retry_count += 1;
    }
}

#[derive(Debug, Clone, Copy)]
struct Waiter {
    counter: u32,
    ready: SimTime,
    nav: SimTime,
    blocked: bool,
}

/// Centralized slot-exact contention resolver.
pub struct Contention {
    slot: Dur,
    aifs: Dur,
    idle_since: Option<SimTime>,
    waiters: BTreeMap<StationId, Waiter>,
}

impl Contention {
    pub fn new(params: &EdcaParams, t0: SimTime) -> Contention {
        Contention {
            slot: params.slot,
            aifs: params.aifs(),
            idle_since: Some(t0),
            waiters: BTreeMap::new(),
        }
    }

    /// A station with a pending frame enters contention with a drawn backoff
    /// counter. `nav` is its current virtual-carrier-sense expiry.
    pub fn join(&mut self, station: StationId, now: SimTime, counter: u32, nav: SimTime) {
        let prev = self
            .waiters
            .insert(station, Waiter { counter, ready: now, nav, blocked: false });
        assert!(prev.is_none(), "station {station} joined contention twice");
    }

    pub fn remove(&mut self, station: StationId) -> bool {
        self.waiters.remove(&station).is_some()
    }

    pub fn is_waiting(&self, station: StationId) -> bool {
        self.waiters.contains_key(&station)
    }

    /// Reservation-style blocking: a blocked waiter neither counts down nor
    /// attempts. Unblocking restarts its AIFS observation at `now`.
    pub fn set_blocked(&mut self, station: StationId, blocked: bool, now: SimTime) {
        if let Some(w) = self.waiters.get_mut(&station) {
            if w.blocked && !blocked {
                w.ready = now;
            }
            w.blocked = blocked;
        }
    }

    /// Propagate a NAV update to a waiting station.
    pub fn note_nav(&mut self, station: StationId, until: SimTime) {
        if let Some(w) = self.waiters.get_mut(&station) {
            if until > w.nav {
                w.nav = until;
            }
        }
    }

    fn base(&self, w: &Waiter) -> Option<SimTime> {
        let idle = self.idle_since?;
        Some(idle.max(w.ready).max(w.nav))
    }

    /// The medium turned physically busy: credit observed idle slots and
    /// freeze all countdowns. A slot boundary coinciding with the busy start
    /// still counts as observed.
    pub fn medium_busy(&mut self, now: SimTime) {
        let (slot, aifs) = (self.slot, self.aifs);
        if let Some(idle) = self.idle_since {
            for w in self.waiters.values_mut() {
                if w.blocked {
                    continue;
                }
                let base = idle.max(w.ready).max(w.nav);
                let observed_ns = now.saturating_sub(base + aifs).nanos();
                let slots = (observed_ns / slot.nanos()) as u32;
                w.counter -= slots.min(w.counter);
            }
        }
        self.idle_since = None;
    }

    /// The medium turned physically idle: AIFS observation restarts for
    /// everyone.
    pub fn medium_idle(&mut self, now: SimTime) {
        self.idle_since = Some(now);
    }

    /// The next instant at which one or more stations' counters reach zero,
    /// with those stations in ascending id order. `None` while the medium is
    /// physically busy or nobody waits.
    pub fn next_attempt(&self) -> Option<(SimTime, Vec<StationId>)> {
        let mut best: Option<(SimTime, Vec<StationId>)> = None;
        for (&id, w) in &self.waiters {
            if w.blocked {
                continue;
            }
            let Some(base) = self.base(w) else { return None };
            let at = base + self.aifs + self.slot * w.counter as u64;
            match &mut best {
                Some((t, ids)) => {
                    if at < *t {
                        best = Some((at, vec![id]));
                    } else if at == *t {
                        ids.push(id);
                    }
                }
                None => best = Some((at, vec![id])),
            }
        }
        best
    }

    /// Remove and return the stations granted access at `at`.
    pub fn take_winners(&mut self, at: SimTime) -> Vec<StationId> {
        let (t, winners) = self.next_attempt().expect("no pending attempt");
        assert_eq!(t, at, "stale contention attempt");
        for id in &winners {
            self.waiters.remove(id);
        }
        winners
    }
}
