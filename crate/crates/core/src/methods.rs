//! The four uplink delivery methods and their wake-time schedules.
//!
//! Methods 1, 2 and 4 space consecutive sensor targets far enough apart that
//! distinct sensors' 4-sigma drift windows cannot overlap even with a miss
//! recovery in between. Method 3 groups sensors back to back inside one
//! reserved interval, with neighboring targets spaced twice the data-frame
//! duration apart and the reservation opening 4-sigma before the first
//! target.

use thiserror::Error;

use crate::edca::ExchangeTiming;
use crate::time::{Dur, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    /// TWT without trigger frames: wake and contend with EDCA.
    TwtPlain,
    /// TWT with trigger frames: listen until the AP's TF, respond without
    /// contention.
    TwtWithTf,
    /// TWT with a guard interval reserved around grouped wake-ups.
    TwtGuard,
    /// Wake-up radio with CTS-to-self protection.
    WurCts,
}

pub const ALL_METHODS: [MethodKind; 4] =
    [MethodKind::TwtPlain, MethodKind::TwtWithTf, MethodKind::TwtGuard, MethodKind::WurCts];

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::TwtPlain => "twt",
            MethodKind::TwtWithTf => "twt-tf",
            MethodKind::TwtGuard => "twt-guard",
            MethodKind::WurCts => "wur-cts",
        }
    }

    pub fn parse(s: &str) -> Option<MethodKind> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "twt" => Some(MethodKind::TwtPlain),
            "twt-tf" => Some(MethodKind::TwtWithTf),
            "twt-guard" => Some(MethodKind::TwtGuard),
            "wur-cts" => Some(MethodKind::WurCts),
            _ => None,
        }
    }

    /// Stable id used in seed derivation.
    pub fn seed_id(self) -> u64 {
        match self {
            MethodKind::TwtPlain => 1,
            MethodKind::TwtWithTf => 2,
            MethodKind::TwtGuard => 3,
            MethodKind::WurCts => 4,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("round period {given_ns} ns too short for {n} sensors; need at least {required_ns} ns")]
    InfeasiblePeriod { given_ns: u64, required_ns: u64, n: u32 },
}

/// Per-run wake-time schedule. Targets are laid out on a fixed grid:
/// `target(round, sensor)` for methods 1/2/4 advances by `sensor_spacing` per
/// sensor, while method 3 packs sensors `slot_spacing` apart after a 4-sigma
/// guard from the reservation start.
#[derive(Debug, Clone)]
pub struct TwtSchedule {
    pub method: MethodKind,
    pub n_sensors: u32,
    pub rounds: u32,
    /// 4-sigma drift guard.
    pub guard: Dur,
    /// Target-to-target distance between sensors, methods 1/2/4.
    pub sensor_spacing: Dur,
    /// Intra-group slot distance, method 3: twice the data-frame duration.
    pub slot_spacing: Dur,
    pub round_period: Dur,
    pub start_offset: Dur,
}

/// Lay out the wake-time grid for one run.
pub fn build_schedule(
    method: MethodKind,
    n_sensors: u32,
    rounds: u32,
    sigma_s: f64,
    timing: &ExchangeTiming,
    switch_on: Dur,
    round_period_override: Option<Dur>,
) -> Result<TwtSchedule, ScheduleError> {
    let guard = Dur::from_secs_f64(4.0 * sigma_s);
    let exchange = timing.exchange_span();
    let miss_timeout = switch_on * 2 + exchange;
    // Headroom per sensor beyond the pure guard: switch-on, the access
    // attempt, a miss recovery, and a couple of exchanges of slack.
    let margin = switch_on * 2 + miss_timeout + exchange * 4;
    let slot_spacing = timing.data * 2;
    let (sensor_spacing, required) = match method {
        MethodKind::TwtGuard => {
            (slot_spacing, guard * 3 + slot_spacing * n_sensors as u64 + margin)
        }
        _ => {
            let spacing = guard * 2 + margin;
            (spacing, spacing * n_sensors as u64)
        }
    };
    let round_period = match round_period_override {
        None => required,
        Some(p) if p >= required => p,
        Some(p) => {
            return Err(ScheduleError::InfeasiblePeriod {
                given_ns: p.nanos(),
                required_ns: required.nanos(),
                n: n_sensors,
            })
        }
    };
    Ok(TwtSchedule {
        method,
        n_sensors,
        rounds,
        guard,
        sensor_spacing,
        slot_spacing,
        round_period,
        start_offset: switch_on + guard + exchange,
    })
}

impl TwtSchedule {
    fn round_base(&self, round: u32) -> SimTime {
        SimTime::ZERO + self.start_offset + self.round_period * round as u64
    }

    /// Scheduled (undrifted) wake target of `sensor` in `round`.
    pub fn target(&self, round: u32, sensor: u32) -> SimTime {
        debug_assert!(round < self.rounds && sensor < self.n_sensors);
        match self.method {
            MethodKind::TwtGuard => {
                self.round_base(round) + self.guard + self.slot_spacing * sensor as u64
            }
            _ => self.round_base(round) + self.sensor_spacing * sensor as u64,
        }
    }

    /// Reservation opening (method 3): 4 sigma before the round's first
    /// target.
    pub fn reservation_start(&self, round: u32) -> SimTime {
        self.round_base(round)
    }

    pub fn end(&self) -> SimTime {
        self.round_base(self.rounds)
    }

    /// Event horizon: schedule end plus one period of slack for stragglers.
    pub fn horizon(&self) -> SimTime {
        self.end() + self.round_period + Dur::from_secs(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timing() -> ExchangeTiming {
        ExchangeTiming::default()
    }

    #[test]
    fn targets_keep_four_sigma_windows_apart() {
        // Consecutive targets at least 8 sigma + exchange apart.
        let sigma = 0.010;
        for method in [MethodKind::TwtPlain, MethodKind::TwtWithTf, MethodKind::WurCts] {
            let s = build_schedule(method, 10, 2, sigma, &timing(), Dur::from_millis(2), None)
                .unwrap();
            let min_gap = Dur::from_secs_f64(8.0 * sigma) + timing().exchange_span();
            for r in 0..2 {
                for i in 1..10 {
                    let gap = s.target(r, i) - s.target(r, i - 1);
                    assert!(gap >= min_gap, "gap {gap} below {min_gap}");
                }
            }
            let wrap = s.target(1, 0) - s.target(0, 9);
            assert!(wrap >= min_gap);
        }
    }

    #[test]
    fn guard_method_spaces_slots_at_twice_the_data_duration() {
        let s = build_schedule(
            MethodKind::TwtGuard,
            10,
            1,
            0.010,
            &timing(),
            Dur::from_millis(2),
            None,
        )
        .unwrap();
        assert_eq!(s.slot_spacing, Dur::from_micros(2960));
        assert_eq!(s.target(0, 1) - s.target(0, 0), Dur::from_micros(2960));
        // Slots span guard + N * spacing past the reservation start.
        assert_eq!(s.reservation_start(0) + s.guard, s.target(0, 0));
        let span = s.target(0, 9) - s.reservation_start(0);
        assert_eq!(span, Dur::from_secs_f64(4.0 * 0.010) + Dur::from_micros(2960) * 9);
    }

    #[test]
    fn single_sensor_reduces_to_isolated_transactions() {
        for method in ALL_METHODS {
            let s = build_schedule(method, 1, 3, 0.0, &timing(), Dur::from_millis(2), None)
                .unwrap();
            assert_eq!(s.target(1, 0) - s.target(0, 0), s.round_period);
        }
    }

    #[test]
    fn too_short_period_is_a_configuration_error() {
        let err = build_schedule(
            MethodKind::TwtPlain,
            10,
            1,
            0.010,
            &timing(),
            Dur::from_millis(2),
            Some(Dur::from_millis(1)),
        )
        .unwrap_err();
        assert!(matches!(err, ScheduleError::InfeasiblePeriod { n: 10, .. }));
    }

    #[test]
    fn method_names_round_trip() {
        for m in ALL_METHODS {
            assert_eq!(MethodKind::parse(m.name()), Some(m));
        }
        assert_eq!(MethodKind::parse("twt_guard"), Some(MethodKind::TwtGuard));
        assert_eq!(MethodKind::parse("nonsense"), None);
    }
}
