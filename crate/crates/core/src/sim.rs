//! The simulation world: one run of one method at one sigma.
//!
//! Station ids: 0 is the AP, 1..=M the saturated stations, M+1..=M+N the
//! sensors. Saturated stations always hold a queued data frame and contend
//! continuously. Sensors doze between scheduled rounds; each round delivers
//! exactly one uplink data frame per sensor, with retries until the ACK
//! arrives.
//!
//! Per-method choreography:
//! * `twt`: the sensor starts switching its PCR on at the drifted target,
//!   then contends with EDCA and sends DATA/ACK.
//! * `twt-tf`: the sensor is listening at the drifted target; the AP starts
//!   contending 4-sigma after the target and sends a trigger frame; the
//!   sensor answers one SIFS later without contention.
//! * `twt-guard`: saturated stations are blocked from 4-sigma before the
//!   round's first slot until the round's last delivery; each sensor
//!   transmits at its drifted slot if the channel is clear, otherwise backs
//!   off among the sensors.
//! * `wur-cts`: the sensor's wake-up radio opens at the drifted target; the
//!   AP contends from 4-sigma after the target, sends CTS-to-self (setting
//!   every awake third party's NAV over the whole wake-up + data exchange),
//!   then the 920 us wake-up frame; the sensor switches its PCR on and
//!   transmits under NAV protection.
//!
//! Miss recovery (twt-tf, wur-cts): if the sensor's data frame is not
//! delivered within a timeout of the trigger/wake-up frame end, the AP
//! re-contends and retransmits. Trigger-frame timeouts count as control-frame
//! failures for the AP's backoff; wake-up frames never touch it.

use std::collections::VecDeque;
use std::io::Write;

use crate::channel::{receives, ControlKind, FinishedTx, Medium, Ppdu, PpduKind, StationId, TxId};
use crate::codec::{ppdu_airtime, DataRate, WurFrame, WurFrameType};
use crate::edca::{on_outcome, Contention, EdcaEntity, EdcaParams, ExchangeTiming, FrameClass};
use crate::engine::{EventHandle, EventQueue, RngStream};
use crate::methods::{MethodKind, TwtSchedule};
use crate::metrics::{ChannelLedger, ComponentKind, MetricsError, RunMetrics};
use crate::station::{
    process_wur_frame, DriftedClock, EnergyLedger, PcrState, PowerProfile, WurAction, WurState,
};
use crate::time::{Dur, SimTime};

const AP: StationId = 0;

/// Everything one run needs, prebuilt from the scenario configuration.
#[derive(Clone)]
pub struct RunSpec {
    pub method: MethodKind,
    pub sigma_s: f64,
    pub n_saturated: u32,
    pub n_sensors: u32,
    pub rounds: u32,
    pub edca: EdcaParams,
    pub timing: ExchangeTiming,
    pub profile: PowerProfile,
    pub wur_rate: DataRate,
    pub miss_timeout: Dur,
    pub beacon_period: Option<Dur>,
    pub drift_window: Option<Dur>,
    pub schedule: TwtSchedule,
    pub seed: u64,
}

/// Optional run instrumentation.
#[derive(Default)]
pub struct RunOptions<'a> {
    pub trace: Option<&'a mut dyn Write>,
    pub collect_tx_log: bool,
}

/// One completed transmission, for tests and the event trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub source: StationId,
    pub kind: &'static str,
    pub start_ns: u64,
    pub end_ns: u64,
    pub corrupted: bool,
}

pub struct RunOutput {
    pub metrics: RunMetrics,
    pub tx_log: Option<Vec<TxRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    WakeSensor { s: u32 },
    PcrReady { s: u32 },
    Attempt,
    TxEnd { tx: TxId },
    AckStart { to: StationId },
    TfResponse { s: u32 },
    TxFailed { sta: StationId },
    ApDuty { duty: DutyKind },
    ApFollowUpWur { s: u32 },
    MissTimeout { nonce: u64 },
    ReservationStart { round: u32 },
    BeaconTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DutyKind {
    Trigger { s: u32 },
    CtsWur { s: u32 },
    Beacon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Doze,
    Switching,
    WaitTf,
    WurListen,
    Responding,
    Contending,
    Transmitting,
    AwaitOutcome,
}

struct Sensor {
    id: StationId,
    addr: u16,
    drift_rng: RngStream,
    backoff_rng: RngStream,
    clock: DriftedClock,
    edca: EdcaEntity,
    ledger: EnergyLedger,
    phase: Phase,
    listen_since: Option<SimTime>,
    wur_on_since: Option<SimTime>,
    round: u32,
    window_start: SimTime,
    data_start: SimTime,
}

struct Sat {
    id: StationId,
    backoff_rng: RngStream,
    edca: EdcaEntity,
    listen_since: Option<SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DutyStage {
    Contending,
    InFlight,
    AwaitFollowUp,
    Triggered,
}

struct CurrentDuty {
    kind: DutyKind,
    stage: DutyStage,
    nonce: u64,
    trigger_start: SimTime,
    timeout: Option<EventHandle>,
}

struct Ap {
    backoff_rng: RngStream,
    edca: EdcaEntity,
    listen_since: Option<SimTime>,
    queue: VecDeque<DutyKind>,
    cur: Option<CurrentDuty>,
    next_nonce: u64,
}

struct Reservation {
    start: SimTime,
    round_hi: u32,
}

struct World<'a> {
    spec: RunSpec,
    q: EventQueue<Ev>,
    medium: Medium,
    cont: Contention,
    attempt: Option<(SimTime, EventHandle)>,
    ap: Ap,
    sats: Vec<Sat>,
    sensors: Vec<Sensor>,
    chan: ChannelLedger,
    wur_frame_dur: Dur,
    cts_nav: Dur,
    delivered_total: u64,
    target_total: u64,
    misses: u64,
    energy_fj_sum: u128,
    delay_ns_sum: u128,
    res: Option<Reservation>,
    m3_delivered: u64,
    busy_since: Option<SimTime>,
    busy_total: Dur,
    done: bool,
    trace: Option<&'a mut dyn Write>,
    tx_log: Option<Vec<TxRecord>>,
}

/// Execute one scenario run to completion (or to the schedule horizon, if
/// stragglers remain) and report its metrics.
pub fn run_scenario(spec: &RunSpec, opts: RunOptions<'_>) -> Result<RunOutput, MetricsError> {
    World::new(spec.clone(), opts).run()
}

impl<'a> World<'a> {
    fn new(spec: RunSpec, opts: RunOptions<'a>) -> World<'a> {
        let stations = 1 + spec.n_saturated as usize + spec.n_sensors as usize;
        let wake_frame = WurFrame::bodiless(WurFrameType::WakeUp, 1, 0).expect("wake frame");
        let wur_frame_dur = ppdu_airtime(&wake_frame, spec.wur_rate).expect("airtime").airtime();
        let t = spec.timing;
        let cts_nav =
            t.sifs + wur_frame_dur + spec.profile.pcr_switch_on + t.data + t.sifs + t.ack;
        let sats = (0..spec.n_saturated)
            .map(|i| {
                let id = 1 + i;
                Sat {
                    id,
                    backoff_rng: RngStream::new(spec.seed, id as u64 * 4),
                    edca: EdcaEntity::new(&spec.edca),
                    listen_since: Some(SimTime::ZERO),
                }
            })
            .collect();
        let sensors = (0..spec.n_sensors)
            .map(|i| {
                let id = 1 + spec.n_saturated + i;
                let clock = match spec.drift_window {
                    Some(w) => DriftedClock::with_window(spec.sigma_s, w),
                    None => DriftedClock::new(spec.sigma_s),
                };
                Sensor {
                    id,
                    addr: (i + 1) as u16,
                    drift_rng: RngStream::new(spec.seed, id as u64 * 4 + 1),
                    backoff_rng: RngStream::new(spec.seed, id as u64 * 4),
                    clock,
                    edca: EdcaEntity::new(&spec.edca),
                    ledger: EnergyLedger::new(
                        spec.profile,
                        SimTime::ZERO,
                        PcrState::Doze,
                        WurState::Off,
                    ),
                    phase: Phase::Doze,
                    listen_since: None,
                    wur_on_since: None,
                    round: 0,
                    window_start: SimTime::ZERO,
                    data_start: SimTime::ZERO,
                }
            })
            .collect();
        let ap = Ap {
            backoff_rng: RngStream::new(spec.seed, 0),
            edca: EdcaEntity::new(&spec.edca),
            listen_since: Some(SimTime::ZERO),
            queue: VecDeque::new(),
            cur: None,
            next_nonce: 0,
        };
        let target_total = spec.n_sensors as u64 * spec.rounds as u64;
        let cont = Contention::new(&spec.edca, SimTime::ZERO);
        let mut w = World {
            q: EventQueue::new(),
            medium: Medium::new(stations),
            cont,
            attempt: None,
            ap,
            sats,
            sensors,
            chan: ChannelLedger::new(),
            wur_frame_dur,
            cts_nav,
            delivered_total: 0,
            target_total,
            misses: 0,
            energy_fj_sum: 0,
            delay_ns_sum: 0,
            res: None,
            m3_delivered: 0,
            busy_since: None,
            busy_total: Dur::ZERO,
            done: false,
            trace: opts.trace,
            tx_log: opts.collect_tx_log.then(Vec::new),
            spec,
        };
        for i in 0..w.sats.len() {
            w.sat_join(i);
        }
        for s in 0..w.sensors.len() {
            w.schedule_round(s);
        }
        if w.spec.method == MethodKind::TwtGuard && w.spec.rounds > 0 && w.spec.n_sensors > 0 {
            let at = w.spec.schedule.reservation_start(0);
            w.q.schedule(at, Ev::ReservationStart { round: 0 });
        }
        if let Some(period) = w.spec.beacon_period {
            w.q.schedule(SimTime::ZERO + period, Ev::BeaconTick);
        }
        w.reschedule_attempt();
        w
    }

    fn run(mut self) -> Result<RunOutput, MetricsError> {
        let horizon = self.spec.schedule.horizon();
        while !self.done {
            let Some((t, ev)) = self.q.pop_until(horizon) else { break };
            self.dispatch(t, ev);
        }
        let end = self.q.now();
        if let Some(b) = self.busy_since.take() {
            self.busy_total += end.saturating_sub(b);
        }
        if let Some(res) = self.res.take() {
            self.chan.record(res.start.nanos(), end.nanos(), ComponentKind::Reservation);
        }
        let mut run_energy_fj: u128 = 0;
        for s in &mut self.sensors {
            let (pcr, wur) = (s.ledger.pcr_state(), s.ledger.wur_state());
            s.ledger.transition(end, pcr, wur);
            run_energy_fj += s.ledger.run_total_fj();
        }
        let delivered = self.delivered_total;
        if delivered == 0 && self.target_total > 0 {
            return Err(MetricsError::NoFramesDelivered);
        }
        let channel = self.chan.finalize();
        let per_frame = |num: f64| if delivered > 0 { num / delivered as f64 } else { f64::NAN };
        let energy_per_frame_j = per_frame(self.energy_fj_sum as f64 * 1e-15);
        if delivered > 0 {
            // Per-frame energy can never undercut the bare transmit cost.
            let tx_floor = self.spec.timing.data.nanos() as u128
                * self.spec.profile.pcr_tx_uw as u128
                * delivered as u128;
            debug_assert!(self.energy_fj_sum >= tx_floor, "energy below the TX-only bound");
        }
        let metrics = RunMetrics {
            frames_delivered: delivered,
            energy_per_frame_j,
            channel_time_per_frame_s: per_frame(channel.total.as_secs_f64()),
            delay_per_frame_s: per_frame(self.delay_ns_sum as f64 * 1e-9),
            misses: self.misses,
            undelivered: self.target_total - delivered,
            run_energy_j: run_energy_fj as f64 * 1e-15,
            channel,
            busy_fraction: if end > SimTime::ZERO {
                self.busy_total.nanos() as f64 / end.nanos() as f64
            } else {
                0.0
            },
        };
        Ok(RunOutput { metrics, tx_log: self.tx_log })
    }

    // ------------------------------------------------------------------
    // Event dispatch
    // ------------------------------------------------------------------

    fn dispatch(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::WakeSensor { s } => self.on_wake(now, s as usize),
            Ev::PcrReady { s } => self.on_pcr_ready(now, s as usize),
            Ev::Attempt => self.on_attempt(now),
            Ev::TxEnd { tx } => self.on_tx_end(now, tx),
            Ev::AckStart { to } => self.on_ack_start(now, to),
            Ev::TfResponse { s } => self.on_tf_response(now, s as usize),
            Ev::TxFailed { sta } => self.on_tx_failed(now, sta),
            Ev::ApDuty { duty } => {
                self.ap.queue.push_back(duty);
                self.ap_try_next(now);
            }
            Ev::ApFollowUpWur { s } => self.on_ap_follow_up(now, s as usize),
            Ev::MissTimeout { nonce } => self.on_miss_timeout(now, nonce),
            Ev::ReservationStart { round } => self.on_reservation_start(now, round),
            Ev::BeaconTick => {
                self.ap.queue.push_back(DutyKind::Beacon);
                self.ap_try_next(now);
                let period = self.spec.beacon_period.expect("beacon tick without period");
                self.q.schedule(now + period, Ev::BeaconTick);
            }
        }
    }

    fn on_wake(&mut self, now: SimTime, s: usize) {
        let id = self.sensors[s].id;
        self.trace(now, format_args!("wake sensor={id}"));
        let sensor = &mut self.sensors[s];
        debug_assert_eq!(sensor.phase, Phase::Doze);
        sensor.window_start = now;
        if self.spec.method == MethodKind::WurCts {
            sensor.ledger.transition(now, PcrState::Doze, WurState::On);
            sensor.wur_on_since = Some(now);
            sensor.phase = Phase::WurListen;
        } else {
            sensor.ledger.transition(now, PcrState::SwitchingOn, WurState::Off);
            sensor.phase = Phase::Switching;
            let ready = now + self.spec.profile.pcr_switch_on;
            self.q.schedule(ready, Ev::PcrReady { s: s as u32 });
        }
    }

    fn on_pcr_ready(&mut self, now: SimTime, s: usize) {
        {
            let sensor = &mut self.sensors[s];
            debug_assert_eq!(sensor.phase, Phase::Switching);
            sensor.ledger.transition(now, PcrState::Listening, WurState::Off);
            sensor.listen_since = Some(now);
        }
        match self.spec.method {
            MethodKind::TwtPlain => self.sensor_join(now, s),
            MethodKind::TwtWithTf => self.sensors[s].phase = Phase::WaitTf,
            MethodKind::TwtGuard | MethodKind::WurCts => {
                // Transmit as soon as the channel is clear; defer via backoff
                // otherwise.
                if self.medium.cca(self.sensors[s].id, now).is_busy() {
                    self.sensor_join(now, s);
                } else {
                    self.begin_sensor_data(now, s);
                }
            }
        }
    }

    fn on_attempt(&mut self, now: SimTime) {
        self.attempt = None;
        let winners = self.cont.take_winners(now);
        debug_assert!(!winners.is_empty());
        for id in winners {
            match self.classify(id) {
                Kind::Ap => self.ap_grant(now),
                Kind::Sat(i) => self.begin_sat_data(now, i),
                Kind::Sensor(s) => self.begin_sensor_data(now, s),
            }
        }
        self.reschedule_attempt();
    }

    fn on_tx_end(&mut self, now: SimTime, tx: TxId) {
        let fin = self.medium.end_tx(now, tx);
        if !self.medium.phys_busy() {
            if let Some(b) = self.busy_since.take() {
                self.busy_total += now - b;
            }
            self.cont.medium_idle(now);
        }
        // Source radio returns to listening.
        match self.classify(fin.ppdu.source) {
            Kind::Ap => self.ap.listen_since = Some(now),
            Kind::Sat(i) => self.sats[i].listen_since = Some(now),
            Kind::Sensor(s) => {
                let sensor = &mut self.sensors[s];
                debug_assert_eq!(sensor.phase, Phase::Transmitting);
                sensor.ledger.transition(now, PcrState::Listening, WurState::Off);
                sensor.listen_since = Some(now);
                sensor.phase = Phase::AwaitOutcome;
            }
        }
        if fin.ppdu.tracked {
            let kind =
                if fin.corrupted { ComponentKind::Collision } else { ComponentKind::Transaction };
            self.chan.record(fin.start.nanos(), fin.end.nanos(), kind);
        }
        self.log_tx(&fin);
        match fin.ppdu.kind.clone() {
            PpduKind::Data => self.on_data_end(now, &fin),
            PpduKind::Control(ControlKind::Ack) => self.on_ack_end(now, &fin),
            PpduKind::Control(ControlKind::CtsToSelf) => self.on_cts_end(now, &fin),
            PpduKind::Control(ControlKind::TriggerFrame) => self.on_tf_end(now, &fin),
            PpduKind::Control(ControlKind::PsPoll) => {}
            PpduKind::Wur(frame) => self.on_wur_end(now, &fin, &frame),
        }
        self.reschedule_attempt();
    }

    fn on_data_end(&mut self, now: SimTime, fin: &FinishedTx) {
        let t = self.spec.timing;
        if receives(fin, self.ap.listen_since) {
            self.q.schedule(now + t.sifs, Ev::AckStart { to: fin.ppdu.source });
        } else {
            // The sender learns of the loss at the ACK timeout.
            self.q.schedule(now + t.sifs + t.ack, Ev::TxFailed { sta: fin.ppdu.source });
        }
    }

    fn on_ack_start(&mut self, now: SimTime, to: StationId) {
        debug_assert!(self.ap.listen_since.is_some(), "AP cannot ACK while transmitting");
        self.ap.listen_since = None;
        let tracked = matches!(self.classify(to), Kind::Sensor(_));
        self.start_tx(
            now,
            Ppdu {
                source: AP,
                dest: Some(to),
                kind: PpduKind::Control(ControlKind::Ack),
                duration: self.spec.timing.ack,
                nav_duration: Dur::ZERO,
                tracked,
            },
        );
    }

    fn on_ack_end(&mut self, now: SimTime, fin: &FinishedTx) {
        let to = fin.ppdu.dest.expect("ACK without destination");
        if fin.corrupted {
            self.q.schedule(now, Ev::TxFailed { sta: to });
            return;
        }
        match self.classify(to) {
            Kind::Sat(i) => {
                on_outcome(&mut self.sats[i].edca, FrameClass::Data, true);
                self.sat_join(i);
            }
            Kind::Sensor(s) => self.finalize_delivery(now, s),
            Kind::Ap => unreachable!("AP never receives an ACK"),
        }
    }

    fn on_tx_failed(&mut self, now: SimTime, sta: StationId) {
        match self.classify(sta) {
            Kind::Sat(i) => {
                on_outcome(&mut self.sats[i].edca, FrameClass::Data, false);
                self.sat_join(i);
            }
            Kind::Sensor(s) => {
                on_outcome(&mut self.sensors[s].edca, FrameClass::Data, false);
                if self.spec.method == MethodKind::TwtWithTf {
                    // Await the AP's retransmitted trigger.
                    self.sensors[s].phase = Phase::WaitTf;
                } else {
                    self.sensor_join(now, s);
                }
            }
            Kind::Ap => unreachable!("AP data failures are not modeled"),
        }
    }

    fn on_tf_end(&mut self, now: SimTime, fin: &FinishedTx) {
        let dest = fin.ppdu.dest.expect("TF without destination");
        let Kind::Sensor(s) = self.classify(dest) else { panic!("TF to non-sensor") };
        // The AP arms its miss timeout regardless of reception.
        if let Some(cur) = &mut self.ap.cur {
            if cur.kind == (DutyKind::Trigger { s: s as u32 }) && cur.stage == DutyStage::InFlight
            {
                cur.stage = DutyStage::Triggered;
                let h = self
                    .q
                    .schedule(now + self.spec.miss_timeout, Ev::MissTimeout { nonce: cur.nonce });
                cur.timeout = Some(h);
            }
        }
        if receives(fin, self.sensors[s].listen_since) && self.sensors[s].phase == Phase::WaitTf {
            self.sensors[s].phase = Phase::Responding;
            self.q.schedule(now + self.spec.timing.sifs, Ev::TfResponse { s: s as u32 });
        }
    }

    fn on_tf_response(&mut self, now: SimTime, s: usize) {
        debug_assert_eq!(self.sensors[s].phase, Phase::Responding);
        if self.medium.phys_busy() {
            // SIFS precedence normally rules this out; fall back to backoff.
            self.sensor_join(now, s);
        } else {
            self.begin_sensor_data(now, s);
        }
    }

    fn on_cts_end(&mut self, now: SimTime, fin: &FinishedTx) {
        if !fin.corrupted {
            let until = now + fin.ppdu.nav_duration;
            for id in 0..self.medium_station_count() {
                let id = id as StationId;
                if id == fin.ppdu.source {
                    continue;
                }
                let listening = match self.classify(id) {
                    Kind::Ap => self.ap.listen_since,
                    Kind::Sat(i) => self.sats[i].listen_since,
                    Kind::Sensor(s) => self.sensors[s].listen_since,
                };
                if listening.is_some_and(|t| t <= fin.start) {
                    self.medium.set_nav(id, until);
                    self.cont.note_nav(id, until);
                    self.trace(now, format_args!("nav sta={id} until={until}"));
                }
            }
        }
        // The AP follows up with the wake-up frame either way; it has no
        // feedback about the CTS.
        if let Some(cur) = &mut self.ap.cur {
            if let DutyKind::CtsWur { s } = cur.kind {
                if cur.stage == DutyStage::InFlight {
                    cur.stage = DutyStage::AwaitFollowUp;
                    self.q.schedule(now + self.spec.timing.sifs, Ev::ApFollowUpWur { s });
                }
            }
        }
    }

    fn on_ap_follow_up(&mut self, now: SimTime, s: usize) {
        debug_assert!(self.ap.listen_since.is_some());
        self.ap.listen_since = None;
        let frame = WurFrame::bodiless(WurFrameType::WakeUp, self.sensors[s].addr, 0)
            .expect("wake frame");
        self.start_tx(
            now,
            Ppdu {
                source: AP,
                dest: None,
                kind: PpduKind::Wur(frame),
                duration: self.wur_frame_dur,
                nav_duration: Dur::ZERO,
                tracked: true,
            },
        );
    }

    fn on_wur_end(&mut self, now: SimTime, fin: &FinishedTx, frame: &WurFrame) {
        // AP-side duty bookkeeping.
        if let Some(cur) = &mut self.ap.cur {
            match cur.kind {
                DutyKind::CtsWur { .. } if cur.stage == DutyStage::AwaitFollowUp => {
                    cur.stage = DutyStage::Triggered;
                    let h = self.q.schedule(
                        now + self.spec.miss_timeout,
                        Ev::MissTimeout { nonce: cur.nonce },
                    );
                    cur.timeout = Some(h);
                    // The CTS-to-self and wake-up frame occupy the channel as
                    // one protected stretch, SIFS gap included.
                    self.chan.record(
                        cur.trigger_start.nanos(),
                        now.nanos(),
                        ComponentKind::Transaction,
                    );
                }
                DutyKind::Beacon if cur.stage == DutyStage::InFlight => {
                    self.ap.cur = None;
                    self.ap_try_next(now);
                }
                _ => {}
            }
        }
        // Sensor-side reception: the wake-up radio must have been on since
        // before the PPDU started.
        for s in 0..self.sensors.len() {
            if !receives(fin, self.sensors[s].wur_on_since) {
                continue;
            }
            match process_wur_frame(frame, self.sensors[s].addr) {
                WurAction::WakePcr => {
                    let sensor = &mut self.sensors[s];
                    debug_assert_eq!(sensor.phase, Phase::WurListen);
                    sensor.wur_on_since = None;
                    sensor.ledger.transition(now, PcrState::SwitchingOn, WurState::Off);
                    sensor.phase = Phase::Switching;
                    let id = sensor.id;
                    let ready = now + self.spec.profile.pcr_switch_on;
                    self.q.schedule(ready, Ev::PcrReady { s: s as u32 });
                    self.trace(now, format_args!("wur-wake sensor={id}"));
                }
                WurAction::Resync { .. } => {
                    self.sensors[s].clock.resync(now);
                    let id = self.sensors[s].id;
                    self.trace(now, format_args!("resync sensor={id}"));
                }
                WurAction::Ignore => {}
            }
        }
    }

    fn on_miss_timeout(&mut self, now: SimTime, nonce: u64) {
        let Some(cur) = &mut self.ap.cur else { return };
        if cur.nonce != nonce || cur.stage != DutyStage::Triggered {
            return;
        }
        cur.timeout = None;
        self.misses += 1;
        match cur.kind {
            // An unanswered trigger frame is a control-frame failure.
            DutyKind::Trigger { .. } => on_outcome(&mut self.ap.edca, FrameClass::Control, false),
            // Wake-up frames never touch the backoff state.
            DutyKind::CtsWur { .. } => {}
            DutyKind::Beacon => unreachable!("beacons have no timeout"),
        }
        cur.stage = DutyStage::Contending;
        self.trace(now, format_args!("miss nonce={nonce}"));
        self.ap_join(now);
    }

    fn on_reservation_start(&mut self, now: SimTime, round: u32) {
        match &mut self.res {
            None => {
                self.res = Some(Reservation { start: now, round_hi: round });
                for i in 0..self.sats.len() {
                    let id = self.sats[i].id;
                    self.cont.set_blocked(id, true, now);
                }
                self.trace(now, format_args!("reservation-start round={round}"));
                self.reschedule_attempt();
            }
            // The previous round is still draining; keep blocking and extend.
            Some(res) => res.round_hi = round,
        }
        self.maybe_release_reservation(now);
        let next = round + 1;
        if next < self.spec.rounds {
            let at = self.spec.schedule.reservation_start(next);
            self.q.schedule(at, Ev::ReservationStart { round: next });
        }
    }

    fn maybe_release_reservation(&mut self, now: SimTime) {
        let Some(res) = &self.res else { return };
        let expected = self.spec.n_sensors as u64 * (res.round_hi as u64 + 1);
        if self.m3_delivered >= expected {
            let res = self.res.take().expect("reservation present");
            self.chan.record(res.start.nanos(), now.nanos(), ComponentKind::Reservation);
            for i in 0..self.sats.len() {
                let id = self.sats[i].id;
                self.cont.set_blocked(id, false, now);
            }
            self.trace(now, format_args!("reservation-end"));
            self.reschedule_attempt();
        }
    }

    // ------------------------------------------------------------------
    // Contention plumbing
    // ------------------------------------------------------------------

    fn reschedule_attempt(&mut self) {
        let next = self.cont.next_attempt().map(|(t, _)| t);
        if next == self.attempt.map(|(t, _)| t) {
            return;
        }
        if let Some((_, h)) = self.attempt.take() {
            self.q.cancel(h);
        }
        if let Some(t) = next {
            let h = self.q.schedule(t, Ev::Attempt);
            self.attempt = Some((t, h));
        }
    }

    fn sat_join(&mut self, i: usize) {
        let now = self.q.now();
        let sat = &mut self.sats[i];
        let counter = sat.backoff_rng.uniform_slots(sat.edca.cw);
        let nav = self.medium.nav_until(sat.id);
        self.cont.join(sat.id, now, counter, nav);
        if self.res.is_some() {
            self.cont.set_blocked(sat.id, true, now);
        }
        self.reschedule_attempt();
    }

    fn sensor_join(&mut self, now: SimTime, s: usize) {
        let sensor = &mut self.sensors[s];
        let counter = sensor.backoff_rng.uniform_slots(sensor.edca.cw);
        let nav = self.medium.nav_until(sensor.id);
        self.cont.join(sensor.id, now, counter, nav);
        sensor.phase = Phase::Contending;
        self.reschedule_attempt();
    }

    fn ap_join(&mut self, now: SimTime) {
        let counter = self.ap.backoff_rng.uniform_slots(self.ap.edca.cw);
        let nav = self.medium.nav_until(AP);
        self.cont.join(AP, now, counter, nav);
        self.reschedule_attempt();
    }

    fn ap_try_next(&mut self, now: SimTime) {
        if self.ap.cur.is_some() {
            return;
        }
        let Some(kind) = self.ap.queue.pop_front() else { return };
        let nonce = self.ap.next_nonce;
        self.ap.next_nonce += 1;
        self.ap.cur = Some(CurrentDuty {
            kind,
            stage: DutyStage::Contending,
            nonce,
            trigger_start: SimTime::ZERO,
            timeout: None,
        });
        self.ap_join(now);
    }

    fn ap_grant(&mut self, now: SimTime) {
        let cur = self.ap.cur.as_mut().expect("AP granted without a duty");
        debug_assert_eq!(cur.stage, DutyStage::Contending);
        cur.stage = DutyStage::InFlight;
        cur.trigger_start = now;
        let (kind, dest, duration, nav) = match cur.kind {
            DutyKind::Trigger { s } => (
                PpduKind::Control(ControlKind::TriggerFrame),
                Some(self.sensors[s as usize].id),
                self.spec.timing.tf,
                Dur::ZERO,
            ),
            DutyKind::CtsWur { .. } => (
                PpduKind::Control(ControlKind::CtsToSelf),
                Some(AP),
                self.spec.timing.cts,
                self.cts_nav,
            ),
            DutyKind::Beacon => {
                let frame = WurFrame::bodiless(
                    WurFrameType::WurBeacon,
                    crate::codec::BROADCAST_ADDR,
                    ((now.nanos() >> 10) & 0xFFF) as u16,
                )
                .expect("beacon frame");
                (PpduKind::Wur(frame), None, self.wur_frame_dur, Dur::ZERO)
            }
        };
        self.ap.listen_since = None;
        self.start_tx(
            now,
            Ppdu { source: AP, dest, kind, duration, nav_duration: nav, tracked: true },
        );
    }

    // ------------------------------------------------------------------
    // Transmissions
    // ------------------------------------------------------------------

    fn begin_sat_data(&mut self, now: SimTime, i: usize) {
        self.sats[i].listen_since = None;
        let id = self.sats[i].id;
        self.start_tx(
            now,
            Ppdu {
                source: id,
                dest: Some(AP),
                kind: PpduKind::Data,
                duration: self.spec.timing.data,
                nav_duration: Dur::ZERO,
                tracked: false,
            },
        );
    }

    fn begin_sensor_data(&mut self, now: SimTime, s: usize) {
        let sensor = &mut self.sensors[s];
        sensor.ledger.transition(now, PcrState::Transmitting, WurState::Off);
        sensor.listen_since = None;
        sensor.phase = Phase::Transmitting;
        sensor.data_start = now;
        let id = sensor.id;
        self.start_tx(
            now,
            Ppdu {
                source: id,
                dest: Some(AP),
                kind: PpduKind::Data,
                duration: self.spec.timing.data,
                nav_duration: Dur::ZERO,
                tracked: true,
            },
        );
    }

    fn start_tx(&mut self, now: SimTime, ppdu: Ppdu) -> TxId {
        let was_busy = self.medium.phys_busy();
        let duration = ppdu.duration;
        self.trace(
            now,
            format_args!("begin src={} kind={} dur={}", ppdu.source, kind_name(&ppdu.kind), duration),
        );
        let id = self.medium.begin_tx(now, ppdu);
        if !was_busy {
            self.busy_since = Some(now);
            self.cont.medium_busy(now);
            self.reschedule_attempt();
        }
        self.q.schedule(now + duration, Ev::TxEnd { tx: id });
        id
    }

    // ------------------------------------------------------------------
    // Round lifecycle
    // ------------------------------------------------------------------

    fn schedule_round(&mut self, s: usize) {
        let now = self.q.now();
        let round = self.sensors[s].round;
        if round >= self.spec.rounds {
            return;
        }
        let target = self.spec.schedule.target(round, s as u32);
        // The alarm rings early enough that the PCR is listening at the
        // target for the methods that need it; wur-cts opens the wake-up
        // radio at the target itself, twt contends from the target.
        let alarm = match self.spec.method {
            MethodKind::TwtPlain | MethodKind::WurCts => target,
            MethodKind::TwtWithTf | MethodKind::TwtGuard => {
                target.offset(-(self.spec.profile.pcr_switch_on.nanos() as i64))
            }
        };
        let sensor = &mut self.sensors[s];
        let wake = sensor.clock.actual_wake_time(&mut sensor.drift_rng, alarm, now);
        self.q.schedule(wake, Ev::WakeSensor { s: s as u32 });
        match self.spec.method {
            MethodKind::TwtWithTf => {
                let at = (target + self.spec.schedule.guard).max(now);
                self.q.schedule(at, Ev::ApDuty { duty: DutyKind::Trigger { s: s as u32 } });
            }
            MethodKind::WurCts => {
                let at = (target + self.spec.schedule.guard).max(now);
                self.q.schedule(at, Ev::ApDuty { duty: DutyKind::CtsWur { s: s as u32 } });
            }
            _ => {}
        }
    }

    fn finalize_delivery(&mut self, now: SimTime, s: usize) {
        let method = self.spec.method;
        // Transaction span: trigger start through ACK end for twt-tf, DATA
        // start through ACK end otherwise (the CTS..wake-up stretch of
        // wur-cts is recorded when the wake-up frame ends).
        let mut span_start = self.sensors[s].data_start;
        if method == MethodKind::TwtWithTf {
            if let Some(cur) = &self.ap.cur {
                if cur.kind == (DutyKind::Trigger { s: s as u32 }) {
                    span_start = cur.trigger_start;
                }
            }
        }
        self.chan.record(span_start.nanos(), now.nanos(), ComponentKind::Transaction);

        {
            let sensor = &mut self.sensors[s];
            debug_assert_eq!(sensor.phase, Phase::AwaitOutcome);
            sensor.ledger.transition(now, PcrState::Doze, WurState::Off);
            sensor.listen_since = None;
            sensor.phase = Phase::Doze;
            self.energy_fj_sum += sensor.ledger.energy_fj(sensor.window_start, now);
            self.delay_ns_sum += (now - sensor.window_start).nanos() as u128;
            sensor.ledger.drop_before(now);
            sensor.round += 1;
            on_outcome(&mut sensor.edca, FrameClass::Data, true);
        }
        self.delivered_total += 1;
        let (id, round) = (self.sensors[s].id, self.sensors[s].round);
        self.trace(now, format_args!("delivered sensor={id} round={round}"));

        // Complete the AP duty serving this sensor (twt-tf / wur-cts).
        let serves = |kind: DutyKind| {
            kind == DutyKind::Trigger { s: s as u32 } || kind == DutyKind::CtsWur { s: s as u32 }
        };
        if self.ap.cur.as_ref().is_some_and(|cur| serves(cur.kind)) {
            let cur = self.ap.cur.take().expect("current duty");
            if let Some(h) = cur.timeout {
                self.q.cancel(h);
            }
            if cur.stage == DutyStage::Contending {
                self.cont.remove(AP);
                self.reschedule_attempt();
            }
            self.ap_try_next(now);
        }

        if method == MethodKind::TwtGuard {
            self.m3_delivered += 1;
            self.maybe_release_reservation(now);
        }
        self.schedule_round(s);
        if self.delivered_total == self.target_total {
            self.done = true;
        }
    }

    // ------------------------------------------------------------------
    // Helpers
    // ------------------------------------------------------------------

    fn medium_station_count(&self) -> usize {
        1 + self.sats.len() + self.sensors.len()
    }

    fn classify(&self, id: StationId) -> Kind {
        if id == AP {
            Kind::Ap
        } else if (id as usize) <= self.sats.len() {
            Kind::Sat(id as usize - 1)
        } else {
            Kind::Sensor(id as usize - 1 - self.sats.len())
        }
    }

    fn log_tx(&mut self, fin: &FinishedTx) {
        self.trace(
            fin.end,
            format_args!(
                "end src={} kind={} corrupted={}",
                fin.ppdu.source,
                kind_name(&fin.ppdu.kind),
                fin.corrupted
            ),
        );
        if let Some(log) = &mut self.tx_log {
            log.push(TxRecord {
                source: fin.ppdu.source,
                kind: kind_name(&fin.ppdu.kind),
                start_ns: fin.start.nanos(),
                end_ns: fin.end.nanos(),
                corrupted: fin.corrupted,
            });
        }
    }

    fn trace(&mut self, now: SimTime, args: std::fmt::Arguments<'_>) {
        if let Some(w) = &mut self.trace {
            let _ = writeln!(w, "{} {}", now.nanos(), args);
        }
    }
}

enum Kind {
    Ap,
    Sat(usize),
    Sensor(usize),
}

fn kind_name(kind: &PpduKind) -> &'static str {
    match kind {
        PpduKind::Data => "data",
        PpduKind::Control(ControlKind::Ack) => "ack",
        PpduKind::Control(ControlKind::CtsToSelf) => "cts",
        PpduKind::Control(ControlKind::TriggerFrame) => "tf",
        PpduKind::Control(ControlKind::PsPoll) => "pspoll",
        PpduKind::Wur(frame) => match frame.frame_type {
            WurFrameType::WurBeacon => "wur-beacon",
            _ => "wur",
        },
    }
}
