//! Shared broadcast medium for a single collision domain.
//!
//! Every station is in range of every other, propagation delay is zero, and
//! there is no capture effect: any two transmissions whose half-open
//! `[start, end)` intervals intersect corrupt each other. Virtual carrier
//! sense (NAV) is tracked per station and only advances for stations that
//! actually decoded the frame carrying the duration; dozing stations miss it.

use crate::codec::WurFrame;
use crate::time::{Dur, SimTime};

pub type StationId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlKind {
    Ack,
    CtsToSelf,
    TriggerFrame,
    PsPoll,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PpduKind {
    /// A legacy data frame (MCS0, fixed duration in this model).
    Data,
    /// A fixed-duration legacy control frame.
    Control(ControlKind),
    /// A WUR PPDU; receivable only by wake-up radios, busy air for everyone
    /// else for its whole duration.
    Wur(WurFrame),
}

/// One on-air transmission.
#[derive(Debug, Clone)]
pub struct Ppdu {
    pub source: StationId,
    pub dest: Option<StationId>,
    pub kind: PpduKind,
    pub duration: Dur,
    /// Virtual-busy time the header advertises beyond the frame end.
    pub nav_duration: Dur,
    /// Included in the sensor/AP channel-time accounting.
    pub tracked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TxId(u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cca {
    Idle,
    Busy,
}

impl Cca {
    pub fn is_busy(self) -> bool {
        self == Cca::Busy
    }
}

struct ActiveTx {
    id: TxId,
    ppdu: Ppdu,
    start: SimTime,
    end: SimTime,
    corrupted: bool,
}

/// A transmission that has left the air.
#[derive(Debug)]
pub struct FinishedTx {
    pub ppdu: Ppdu,
    pub start: SimTime,
    pub end: SimTime,
    pub corrupted: bool,
}

/// Whether a receiver whose relevant radio has been on since `on_since`
/// receives a finished transmission. Reception requires the radio on at the
/// PPDU start (sync acquisition) through its end, and an uncorrupted frame.
pub fn receives(fin: &FinishedTx, radio_on_since: Option<SimTime>) -> bool {
    !fin.corrupted && radio_on_since.is_some_and(|t| t <= fin.start)
}

pub struct Medium {
    active: Vec<ActiveTx>,
    nav: Vec<SimTime>,
    next_id: u64,
}

impl Medium {
    pub fn new(stations: usize) -> Medium {
        Medium { active: Vec::new(), nav: vec![SimTime::ZERO; stations], next_id: 0 }
    }

    /// Put a PPDU on the air. Overlapping transmissions are all marked
    /// corrupted, and the tracked flag spreads across a collision so the
    /// whole union interval can be charged to the sensor/AP ledger.
    pub fn begin_tx(&mut self, now: SimTime, ppdu: Ppdu) -> TxId {
        assert!(
            !self.active.iter().any(|tx| tx.ppdu.source == ppdu.source),
            "station {} began a second transmission mid-air",
            ppdu.source
        );
        let id = TxId(self.next_id);
        self.next_id += 1;
        let end = now + ppdu.duration;
        let mut entry = ActiveTx { id, ppdu, start: now, end, corrupted: false };
        if !self.active.is_empty() {
            let tracked = entry.ppdu.tracked || self.active.iter().any(|tx| tx.ppdu.tracked);
            entry.corrupted = true;
            entry.ppdu.tracked = tracked;
            for tx in &mut self.active {
                tx.corrupted = true;
                tx.ppdu.tracked = tracked;
            }
        }
        self.active.push(entry);
        id
    }

    /// Take a transmission off the air at its scheduled end.
    pub fn end_tx(&mut self, now: SimTime, id: TxId) -> FinishedTx {
        let idx = self
            .active
            .iter()
            .position(|tx| tx.id == id)
            .expect("end_tx for unknown transmission");
        let tx = self.active.swap_remove(idx);
        assert_eq!(tx.end, now, "transmission ended off schedule");
        FinishedTx { ppdu: tx.ppdu, start: tx.start, end: tx.end, corrupted: tx.corrupted }
    }

    pub fn phys_busy(&self) -> bool {
        !self.active.is_empty()
    }

    /// Clear-channel assessment for one station: busy if anything is on the
    /// air or the station's own NAV has not expired.
    pub fn cca(&self, station: StationId, t: SimTime) -> Cca {
        if self.phys_busy() || self.nav[station as usize] > t {
            Cca::Busy
        } else {
            Cca::Idle
        }
    }

    /// Advance a station's NAV; updates never shorten it.
    pub fn set_nav(&mut self, station: StationId, until: SimTime) {
        let slot = &mut self.nav[station as usize];
        if until > *slot {
            *slot = until;
        }
    }

    pub fn nav_until(&self, station: StationId) -> SimTime {
        self.nav[station as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_ppdu(source: StationId, us: u64) -> Ppdu {
        Ppdu {
            source,
            dest: Some(0),
            kind: PpduKind::Data,
            duration: Dur::from_micros(us),
            nav_duration: Dur::ZERO,
            tracked: false,
        }
    }

    #[test]
    fn lone_transmission_is_clean() {
        let mut m = Medium::new(4);
        let id = m.begin_tx(SimTime::ZERO, data_ppdu(1, 100));
        let fin = m.end_tx(SimTime::ZERO + Dur::from_micros(100), id);
        assert!(!fin.corrupted);
        assert!(receives(&fin, Some(SimTime::ZERO)));
    }

    #[test]
    fn one_nanosecond_overlap_corrupts_both() {
        let mut m = Medium::new(4);
        let a = m.begin_tx(SimTime::ZERO, data_ppdu(1, 100));
        let b_start = SimTime::from_nanos(100_000 - 1);
        let b = m.begin_tx(b_start, data_ppdu(2, 100));
        let fin_a = m.end_tx(SimTime::from_nanos(100_000), a);
        let fin_b = m.end_tx(b_start + Dur::from_micros(100), b);
        assert!(fin_a.corrupted && fin_b.corrupted);
    }

    #[test]
    fn back_to_back_is_clean() {
        // Half-open intervals: end of A equals start of B.
        let mut m = Medium::new(4);
        let a = m.begin_tx(SimTime::ZERO, data_ppdu(1, 100));
        let t = SimTime::from_nanos(100_000);
        let fin_a = m.end_tx(t, a);
        let b = m.begin_tx(t, data_ppdu(2, 100));
        let fin_b = m.end_tx(t + Dur::from_micros(100), b);
        assert!(!fin_a.corrupted && !fin_b.corrupted);
    }

    #[test]
    #[should_panic(expected = "second transmission")]
    fn double_transmit_is_a_model_error() {
        let mut m = Medium::new(4);
        m.begin_tx(SimTime::ZERO, data_ppdu(1, 100));
        m.begin_tx(SimTime::from_nanos(10), data_ppdu(1, 100));
    }

    #[test]
    fn cca_reports_idle_on_empty_medium_with_expired_nav() {
        let m = Medium::new(2);
        assert_eq!(m.cca(1, SimTime::from_nanos(5)), Cca::Idle);
    }

    #[test]
    fn cca_busy_during_wur_ppdu() {
        use crate::codec::{WurFrame, WurFrameType};
        let mut m = Medium::new(3);
        let frame = WurFrame::bodiless(WurFrameType::WakeUp, 1, 0).unwrap();
        m.begin_tx(
            SimTime::ZERO,
            Ppdu {
                source: 0,
                dest: None,
                kind: PpduKind::Wur(frame),
                duration: Dur::from_micros(920),
                nav_duration: Dur::ZERO,
                tracked: true,
            },
        );
        // Every awake legacy station senses busy air for the whole frame.
        assert_eq!(m.cca(1, SimTime::from_nanos(1)), Cca::Busy);
        assert_eq!(m.cca(2, SimTime::from_nanos(919_999)), Cca::Busy);
    }

    #[test]
    fn nav_keeps_channel_virtually_busy() {
        let mut m = Medium::new(2);
        m.set_nav(1, SimTime::from_nanos(2_000_000));
        assert_eq!(m.cca(1, SimTime::from_nanos(1_999_999)), Cca::Busy);
        assert_eq!(m.cca(1, SimTime::from_nanos(2_000_000)), Cca::Idle);
        assert_eq!(m.cca(0, SimTime::from_nanos(1)), Cca::Idle);
    }

    #[test]
    fn nav_never_decreases() {
        let mut m = Medium::new(1);
        m.set_nav(0, SimTime::from_nanos(100));
        m.set_nav(0, SimTime::from_nanos(50));
        assert_eq!(m.nav_until(0), SimTime::from_nanos(100));
    }

    #[test]
    fn corrupted_frames_are_not_received() {
        let mut m = Medium::new(3);
        let a = m.begin_tx(SimTime::ZERO, data_ppdu(1, 100));
        m.begin_tx(SimTime::from_nanos(10), data_ppdu(2, 10));
        let fin = m.end_tx(SimTime::from_nanos(100_000), a);
        assert!(!receives(&fin, Some(SimTime::ZERO)));
    }

    #[test]
    fn late_radio_misses_the_sync() {
        let mut m = Medium::new(2);
        let a = m.begin_tx(SimTime::from_nanos(1_000), data_ppdu(1, 100));
        let fin = m.end_tx(SimTime::from_nanos(101_000), a);
        // Radio turned on mid-frame: no reception.
        assert!(!receives(&fin, Some(SimTime::from_nanos(2_000))));
        assert!(receives(&fin, Some(SimTime::from_nanos(1_000))));
        assert!(!receives(&fin, None));
    }

    #[test]
    fn tracked_flag_spreads_across_collision() {
        let mut m = Medium::new(4);
        let mut tracked = data_ppdu(1, 100);
        tracked.tracked = true;
        let a = m.begin_tx(SimTime::ZERO, tracked);
        let b = m.begin_tx(SimTime::from_nanos(5), data_ppdu(2, 100));
        assert!(m.end_tx(SimTime::from_nanos(100_000), a).ppdu.tracked);
        assert!(m.end_tx(SimTime::from_nanos(100_005), b).ppdu.tracked);
    }
}
