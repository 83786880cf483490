//! Station-side building blocks: power profiles, drifted clocks, the per-
//! sensor energy ledger, WUR duty-cycle windows, and the wake-up frame
//! decision logic.
//!
//! Power is tracked in integer microwatts and time in integer nanoseconds, so
//! interval energies are exact integer femtojoules (1 ns * 1 uW = 1 fJ).

use crate::codec::{WurFrame, WurFrameType, BROADCAST_ADDR};
use crate::engine::RngStream;
use crate::time::{Dur, SimTime};

/// Station power draw per radio state, in microwatts.
#[derive(Debug, Clone, Copy)]
pub struct PowerProfile {
    pub pcr_tx_uw: u64,
    /// Receive and idle-listen.
    pub pcr_listen_uw: u64,
    pub pcr_doze_uw: u64,
    pub wur_on_uw: u64,
    pub wur_off_uw: u64,
    pub pcr_switch_on: Dur,
}

impl Default for PowerProfile {
    fn default() -> PowerProfile {
        PowerProfile {
            pcr_tx_uw: 280_000,
            pcr_listen_uw: 100_000,
            pcr_doze_uw: 50,
            wur_on_uw: 500,
            wur_off_uw: 0,
            pcr_switch_on: Dur::from_micros(2_000),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcrState {
    Doze,
    SwitchingOn,
    Listening,
    Transmitting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WurState {
    Off,
    On,
}

impl PowerProfile {
    pub fn pcr_power_uw(&self, state: PcrState) -> u64 {
        match state {
            PcrState::Doze => self.pcr_doze_uw,
            // Switch-on energy is charged at listen power.
            PcrState::SwitchingOn | PcrState::Listening => self.pcr_listen_uw,
            PcrState::Transmitting => self.pcr_tx_uw,
        }
    }

    pub fn wur_power_uw(&self, state: WurState) -> u64 {
        match state {
            WurState::Off => self.wur_off_uw,
            WurState::On => self.wur_on_uw,
        }
    }
}

/// A sensor clock whose wake-ups deviate from their targets by a Gaussian
/// shift. With a drift window configured, the effective sigma scales with the
/// time elapsed since the last resynchronization (drift proportional to
/// elapsed time); without one, every wake-up draws the full sigma.
#[derive(Debug, Clone, Copy)]
pub struct DriftedClock {
    sigma_ns: f64,
    window: Option<Dur>,
    last_sync: SimTime,
}

impl DriftedClock {
    pub fn new(sigma_s: f64) -> DriftedClock {
        assert!(sigma_s >= 0.0, "negative sigma");
        DriftedClock { sigma_ns: sigma_s * 1e9, window: None, last_sync: SimTime::ZERO }
    }

    pub fn with_window(sigma_s: f64, window: Dur) -> DriftedClock {
        let mut clock = DriftedClock::new(sigma_s);
        clock.window = Some(window);
        clock
    }

    pub fn effective_sigma_ns(&self, target: SimTime) -> f64 {
        match self.window {
            None => self.sigma_ns,
            Some(w) if w > Dur::ZERO => {
                let elapsed = target.saturating_sub(self.last_sync).nanos() as f64;
                self.sigma_ns * (elapsed / w.nanos() as f64).min(1.0)
            }
            Some(_) => self.sigma_ns,
        }
    }

    /// The instant the station actually wakes for a target time: the target
    /// plus a drawn shift, clamped so it never lands before `now`.
    pub fn actual_wake_time(&self, rng: &mut RngStream, target: SimTime, now: SimTime) -> SimTime {
        let shift = rng.sample_normal_ns(0, self.effective_sigma_ns(target));
        target.offset(shift).max(now)
    }

    /// Beacon resynchronization: accumulated drift clears and subsequent
    /// shifts are drawn relative to the beacon instant.
    pub fn resync(&mut self, at: SimTime) {
        self.last_sync = at;
    }

    pub fn last_sync(&self) -> SimTime {
        self.last_sync
    }
}

/// Worst-case clock drift accumulated over `interval` at `ppm` parts per
/// million: e.g. 100 ppm over one hour bounds the shift by 0.36 s.
pub fn drift_bound(ppm: f64, interval: Dur) -> Dur {
    Dur::from_secs_f64(ppm * 1e-6 * interval.as_secs_f64())
}

/// A sigma (seconds) whose 4-sigma guard covers the worst-case drift over
/// `interval`; a convenience for deriving sweep configurations from ppm
/// specs.
pub fn bounding_sigma(ppm: f64, interval: Dur) -> f64 {
    drift_bound(ppm, interval).as_secs_f64() / 4.0
}

/// Strictly periodic WUR on-windows.
#[derive(Debug, Clone, Copy)]
pub struct DutyCycleSchedule {
    pub period: Dur,
    pub on_offset: Dur,
    pub on_duration: Dur,
}

/// Whether the WUR is on at instant `t` under `sched`, evaluated against the
/// queried clock's notion of time.
pub fn wur_window(sched: &DutyCycleSchedule, t: SimTime) -> bool {
    assert!(sched.on_duration > Dur::ZERO && sched.on_duration <= sched.period);
    let phase = t.nanos() % sched.period.nanos();
    let start = sched.on_offset.nanos() % sched.period.nanos();
    let end = start + sched.on_duration.nanos();
    if end <= sched.period.nanos() {
        phase >= start && phase < end
    } else {
        phase >= start || phase < end - sched.period.nanos()
    }
}

/// What a sensor does with a wake-up radio frame it received.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WurAction {
    /// Matching wake-up frame: switch the PCR on.
    WakePcr,
    /// WUR beacon: resynchronize the clock.
    Resync { partial_timestamp: u16 },
    Ignore,
}

/// Decide the action for a received WUR frame. Frames with an invalid FCS
/// are silently ignored, as are wake-ups addressed elsewhere.
pub fn process_wur_frame(frame: &WurFrame, own_addr: u16) -> WurAction {
    if !frame.fcs_valid() {
        return WurAction::Ignore;
    }
    match frame.frame_type {
        WurFrameType::WakeUp if frame.address == own_addr || frame.address == BROADCAST_ADDR => {
            WurAction::WakePcr
        }
        WurFrameType::WurBeacon => WurAction::Resync { partial_timestamp: frame.td_control },
        _ => WurAction::Ignore,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Segment {
    start: SimTime,
    end: SimTime,
    pcr: PcrState,
    wur: WurState,
}

/// Per-station power-state timeline. Segments partition the station's
/// recorded lifetime: every instant carries exactly one PCR state and one WUR
/// state, with no gaps or overlaps.
pub struct EnergyLedger {
    profile: PowerProfile,
    closed: Vec<Segment>,
    cur_pcr: PcrState,
    cur_wur: WurState,
    cur_since: SimTime,
    run_total_fj: u128,
}

impl EnergyLedger {
    pub fn new(profile: PowerProfile, t0: SimTime, pcr: PcrState, wur: WurState) -> EnergyLedger {
        assert_states_coherent(pcr, wur);
        EnergyLedger {
            profile,
            closed: Vec::new(),
            cur_pcr: pcr,
            cur_wur: wur,
            cur_since: t0,
            run_total_fj: 0,
        }
    }

    pub fn pcr_state(&self) -> PcrState {
        self.cur_pcr
    }

    pub fn wur_state(&self) -> WurState {
        self.cur_wur
    }

    fn segment_power_uw(&self, pcr: PcrState, wur: WurState) -> u64 {
        self.profile.pcr_power_uw(pcr) + self.profile.wur_power_uw(wur)
    }

    /// Enter a new (PCR, WUR) state pair at `now`, closing the current
    /// segment.
    pub fn transition(&mut self, now: SimTime, pcr: PcrState, wur: WurState) {
        assert_states_coherent(pcr, wur);
        assert!(now >= self.cur_since, "ledger transition out of order");
        if now > self.cur_since {
            let seg = Segment { start: self.cur_since, end: now, pcr: self.cur_pcr, wur: self.cur_wur };
            self.run_total_fj += (seg.end - seg.start).nanos() as u128
                * self.segment_power_uw(seg.pcr, seg.wur) as u128;
            self.closed.push(seg);
        }
        self.cur_pcr = pcr;
        self.cur_wur = wur;
        self.cur_since = now;
    }

    /// Integrated energy over `[from, to]`, in femtojoules. `to` must not
    /// exceed the current transition point.
    pub fn energy_fj(&self, from: SimTime, to: SimTime) -> u128 {
        assert!(to <= self.cur_since, "window extends past the recorded timeline");
        let mut total: u128 = 0;
        for seg in &self.closed {
            let lo = seg.start.max(from);
            let hi = seg.end.min(to);
            if hi > lo {
                total += (hi - lo).nanos() as u128
                    * self.segment_power_uw(seg.pcr, seg.wur) as u128;
            }
        }
        total
    }

    /// Drop closed segments that end at or before `t`; bounds memory across
    /// long runs once their windows have been integrated.
    pub fn drop_before(&mut self, t: SimTime) {
        self.closed.retain(|seg| seg.end > t);
    }

    /// Whole-timeline energy of all closed segments, in femtojoules.
    pub fn run_total_fj(&self) -> u128 {
        self.run_total_fj
    }

    #[cfg(test)]
    fn segments_contiguous(&self) -> bool {
        self.closed.windows(2).all(|w| w[0].end == w[1].start)
    }
}

fn assert_states_coherent(pcr: PcrState, wur: WurState) {
    // The wake-up radio is only used while the PCR is off.
    assert!(
        !(wur == WurState::On && matches!(pcr, PcrState::Listening | PcrState::Transmitting)),
        "WUR on while PCR active"
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_zero_wakes_exactly_on_target() {
        let clock = DriftedClock::new(0.0);
        let mut rng = RngStream::new(1, 0);
        let target = SimTime::from_nanos(123_456_789);
        assert_eq!(clock.actual_wake_time(&mut rng, target, SimTime::ZERO), target);
    }

    #[test]
    fn late_wake_beyond_four_sigma_is_rare() {
        let clock = DriftedClock::new(0.010);
        let mut rng = RngStream::new(2, 0);
        let target = SimTime::from_nanos(1_000_000_000_000);
        let n = 1_000_000u64;
        let mut late = 0u64;
        for _ in 0..n {
            let wake = clock.actual_wake_time(&mut rng, target, SimTime::ZERO);
            if wake > target + Dur::from_millis(40) {
                late += 1;
            }
        }
        assert!((late as f64 / n as f64) < 1e-4, "late fraction {}", late as f64 / n as f64);
    }

    #[test]
    fn hundred_ppm_over_an_hour_bounds_at_360_ms() {
        assert_eq!(drift_bound(100.0, Dur::from_secs(3600)), Dur::from_millis(360));
        let sigma = bounding_sigma(100.0, Dur::from_secs(3600));
        assert!((sigma - 0.09).abs() < 1e-12);
    }

    #[test]
    fn resync_scales_effective_sigma_with_elapsed_time() {
        let mut clock = DriftedClock::with_window(0.010, Dur::from_secs(10));
        clock.resync(SimTime::from_nanos(0));
        // Target halfway through the window: sigma effectively halved.
        let halfway = SimTime::from_nanos(5_000_000_000);
        assert!((clock.effective_sigma_ns(halfway) - 5e6).abs() < 1e-6);
        // Immediately after a resync the shift is ~0.
        clock.resync(halfway);
        assert_eq!(clock.effective_sigma_ns(halfway), 0.0);
        // A full window out, the configured sigma applies.
        let far = SimTime::from_nanos(25_000_000_000);
        assert!((clock.effective_sigma_ns(far) - 10e6).abs() < 1e-6);
    }

    #[test]
    fn flat_model_ignores_elapsed_time() {
        let clock = DriftedClock::new(0.010);
        assert_eq!(clock.effective_sigma_ns(SimTime::from_nanos(1)), 10e6);
        assert_eq!(clock.effective_sigma_ns(SimTime::from_nanos(u64::MAX)), 10e6);
    }

    #[test]
    fn degenerate_duty_cycle_is_always_on() {
        let sched = DutyCycleSchedule {
            period: Dur::from_secs(1),
            on_offset: Dur::ZERO,
            on_duration: Dur::from_secs(1),
        };
        for ns in [0u64, 1, 999_999_999, 1_000_000_000, 7_777_777_777] {
            assert!(wur_window(&sched, SimTime::from_nanos(ns)));
        }
    }

    #[test]
    fn duty_windows_are_periodic() {
        let sched = DutyCycleSchedule {
            period: Dur::from_secs(1),
            on_offset: Dur::from_millis(100),
            on_duration: Dur::from_millis(50),
        };
        assert!(!wur_window(&sched, SimTime::from_nanos(99_999_999)));
        assert!(wur_window(&sched, SimTime::from_nanos(100_000_000)));
        assert!(wur_window(&sched, SimTime::from_nanos(149_999_999)));
        assert!(!wur_window(&sched, SimTime::from_nanos(150_000_000)));
        assert!(wur_window(&sched, SimTime::from_nanos(3_120_000_000)));
    }

    #[test]
    fn disjoint_windows_never_listen_simultaneously() {
        let a = DutyCycleSchedule {
            period: Dur::from_secs(1),
            on_offset: Dur::ZERO,
            on_duration: Dur::from_millis(200),
        };
        let b = DutyCycleSchedule {
            period: Dur::from_secs(1),
            on_offset: Dur::from_millis(500),
            on_duration: Dur::from_millis(200),
        };
        for ms in 0..2000 {
            let t = SimTime::from_nanos(ms * 1_000_000);
            assert!(!(wur_window(&a, t) && wur_window(&b, t)), "overlap at {ms} ms");
        }
    }

    #[test]
    fn duty_ratio_scales_wur_energy() {
        // 5% duty cycle costs 5% of always-on WUR energy over whole periods.
        let profile = PowerProfile::default();
        let sched = DutyCycleSchedule {
            period: Dur::from_secs(1),
            on_offset: Dur::ZERO,
            on_duration: Dur::from_millis(50),
        };
        let mut duty = EnergyLedger::new(profile, SimTime::ZERO, PcrState::Doze, WurState::On);
        let mut always = EnergyLedger::new(profile, SimTime::ZERO, PcrState::Doze, WurState::On);
        let horizon = 10u64;
        for s in 0..horizon {
            let base = s * 1_000_000_000;
            let off_at = SimTime::from_nanos(base + sched.on_duration.nanos());
            duty.transition(off_at, PcrState::Doze, WurState::Off);
            let next_on = SimTime::from_nanos(base + 1_000_000_000);
            duty.transition(next_on, PcrState::Doze, WurState::On);
            always.transition(next_on, PcrState::Doze, WurState::On);
        }
        let end = SimTime::from_nanos(horizon * 1_000_000_000);
        let doze = profile.pcr_doze_uw as u128 * end.nanos() as u128;
        let duty_wur = duty.energy_fj(SimTime::ZERO, end) - doze;
        let always_wur = always.energy_fj(SimTime::ZERO, end) - doze;
        assert_eq!(duty_wur * 20, always_wur);
    }

    #[test]
    fn matching_wake_up_switches_pcr_on() {
        let frame = WurFrame::bodiless(WurFrameType::WakeUp, 0x0AB, 0).unwrap();
        assert_eq!(process_wur_frame(&frame, 0x0AB), WurAction::WakePcr);
        assert_eq!(process_wur_frame(&frame, 0x0AC), WurAction::Ignore);
    }

    #[test]
    fn broadcast_wake_up_matches_everyone() {
        let frame = WurFrame::bodiless(WurFrameType::WakeUp, BROADCAST_ADDR, 0).unwrap();
        assert_eq!(process_wur_frame(&frame, 0x001), WurAction::WakePcr);
    }

    #[test]
    fn beacon_resynchronizes_without_pcr_action() {
        let frame = WurFrame::bodiless(WurFrameType::WurBeacon, BROADCAST_ADDR, 0x7F3).unwrap();
        assert_eq!(
            process_wur_frame(&frame, 0x001),
            WurAction::Resync { partial_timestamp: 0x7F3 }
        );
    }

    #[test]
    fn bad_fcs_is_silently_ignored() {
        let mut frame = WurFrame::bodiless(WurFrameType::WakeUp, 0x0AB, 0).unwrap();
        frame.fcs ^= 0x8000;
        assert_eq!(process_wur_frame(&frame, 0x0AB), WurAction::Ignore);
    }

    #[test]
    fn ledger_segments_are_contiguous() {
        let mut l = EnergyLedger::new(
            PowerProfile::default(),
            SimTime::ZERO,
            PcrState::Doze,
            WurState::Off,
        );
        l.transition(SimTime::from_nanos(10), PcrState::SwitchingOn, WurState::Off);
        l.transition(SimTime::from_nanos(30), PcrState::Listening, WurState::Off);
        l.transition(SimTime::from_nanos(70), PcrState::Transmitting, WurState::Off);
        l.transition(SimTime::from_nanos(90), PcrState::Doze, WurState::Off);
        assert!(l.segments_contiguous());
    }

    #[test]
    fn ledger_energy_matches_hand_arithmetic() {
        // 10 ms listening at 100 mW + 1.48 ms transmitting at 280 mW
        // = 1.0 mJ + 0.4144 mJ = 1.4144 mJ.
        let mut l = EnergyLedger::new(
            PowerProfile::default(),
            SimTime::ZERO,
            PcrState::Listening,
            WurState::Off,
        );
        let t1 = SimTime::from_nanos(10_000_000);
        l.transition(t1, PcrState::Transmitting, WurState::Off);
        let t2 = t1 + Dur::from_micros(1480);
        l.transition(t2, PcrState::Doze, WurState::Off);
        let fj = l.energy_fj(SimTime::ZERO, t2);
        assert_eq!(fj, 1_414_400_000_000);
        assert!((fj as f64 * 1e-15 - 1.4144e-3).abs() < 1e-18);
    }

    #[test]
    #[should_panic(expected = "WUR on while PCR active")]
    fn wur_on_with_pcr_listening_is_incoherent() {
        EnergyLedger::new(PowerProfile::default(), SimTime::ZERO, PcrState::Listening, WurState::On);
    }
}
