//! Hand-computable oracle scenarios and codec golden vectors.
//!
//! The four single-sensor scenarios (one sensor, no saturated stations,
//! sigma = 0) have closed-form energy, channel-time and delay expressions
//! that were derived independently of the simulator, parameterized only by
//! the one backoff counter the relevant station draws. The draw is replayed
//! here through the public stream API (same seed, same stream id), the
//! closed forms are evaluated, and the simulator output must match to within
//! 1 nJ / 1 ns.
//!
//! Closed forms at the default constants (slot 9 us, SIFS 16 us, AIFS 43 us,
//! DATA 1480 us, ACK 44 us, CTS 44 us, TF 100 us, wake-up frame 920 us,
//! switch-on 2000 us; listen 100 mW, TX 280 mW, doze 0.05 mW, WUR on
//! 0.5 mW), with k the replayed backoff draw:
//!
//! * twt:       E = (2103 + 9k) us * 100 mW + 1480 us * 280 mW,
//!              channel = 1540 us, delay = (3583 + 9k) us
//! * twt-tf:    E = (2219 + 9k) us * 100 mW + 1480 us * 280 mW,
//!              channel = 1656 us, delay = (3699 + 9k) us
//! * twt-guard: E = 2060 us * 100 mW + 1480 us * 280 mW,
//!              channel = 1540 us, delay = 3540 us
//! * wur-cts:   E = (1023 + 9k) us * 0.55 mW + 2060 us * 100 mW
//!                  + 1480 us * 280 mW,
//!              channel = 2520 us, delay = (4563 + 9k) us

use crate::codec::{
    build_sync, compute_fcs, encode_manchester, ppdu_airtime, DataRate, WurFrame, WurFrameType,
    SYNC_PATTERN_DEFAULT,
};
use crate::config::ScenarioConfig;
use crate::engine::RngStream;
use crate::methods::MethodKind;
use crate::sim::{run_scenario, RunOptions};

const SELF_CHECK_SEED: u64 = 0xC0DE;

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn report(name: &str, pass: bool, detail: String) -> OracleReport {
    OracleReport { name: name.to_string(), pass, detail }
}

/// Closed-form expectations of one single-sensor scenario, in exact integer
/// units.
struct ClosedForm {
    energy_fj: u128,
    channel_ns: u64,
    delay_ns: u64,
}

fn us_x_uw(us: u64, uw: u64) -> u128 {
    us as u128 * 1_000 * uw as u128
}

fn closed_form(method: MethodKind, k: u64) -> ClosedForm {
    let data_tx = us_x_uw(1480, 280_000);
    match method {
        MethodKind::TwtPlain => ClosedForm {
            energy_fj: us_x_uw(2103 + 9 * k, 100_000) + data_tx,
            channel_ns: 1540 * 1_000,
            delay_ns: (3583 + 9 * k) * 1_000,
        },
        MethodKind::TwtWithTf => ClosedForm {
            energy_fj: us_x_uw(2219 + 9 * k, 100_000) + data_tx,
            channel_ns: 1656 * 1_000,
            delay_ns: (3699 + 9 * k) * 1_000,
        },
        MethodKind::TwtGuard => ClosedForm {
            energy_fj: us_x_uw(2060, 100_000) + data_tx,
            channel_ns: 1540 * 1_000,
            delay_ns: 3540 * 1_000,
        },
        MethodKind::WurCts => ClosedForm {
            // WUR on + PCR doze while listening for the wake-up frame.
            energy_fj: us_x_uw(1023 + 9 * k, 550) + us_x_uw(2060, 100_000) + data_tx,
            channel_ns: 2520 * 1_000,
            delay_ns: (4563 + 9 * k) * 1_000,
        },
    }
}

/// Replay the single backoff draw the scenario consumes: the sensor's for
/// plain TWT, the AP's for the trigger-frame and wake-up methods, none for
/// the guard method.
fn replay_backoff(method: MethodKind, cw_min: u32) -> u64 {
    let stream_id = match method {
        MethodKind::TwtPlain => 4, // sensor station id 1, backoff stream
        MethodKind::TwtWithTf | MethodKind::WurCts => 0, // AP backoff stream
        MethodKind::TwtGuard => return 0,
    };
    RngStream::new(SELF_CHECK_SEED, stream_id).uniform_slots(cw_min) as u64
}

fn check_method_oracle(method: MethodKind) -> OracleReport {
    let name = format!("closed-form {}", method.name());
    let mut cfg = ScenarioConfig::default();
    cfg.m_saturated = 0;
    cfg.n_sensors = 1;
    cfg.frames_per_run = 1;
    cfg.sigma_list = vec![0.0];
    let spec = match cfg.run_spec(method, 0.0, SELF_CHECK_SEED) {
        Ok(s) => s,
        Err(e) => return report(&name, false, format!("spec error: {e}")),
    };
    let out = match run_scenario(&spec, RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return report(&name, false, format!("run error: {e}")),
    };
    let m = out.metrics;
    let k = replay_backoff(method, cfg.cw_min);
    let want = closed_form(method, k);
    let got_energy_fj = m.energy_per_frame_j * 1e15;
    let energy_err_fj = (got_energy_fj - want.energy_fj as f64).abs();
    let channel_ns = m.channel.total.nanos();
    let delay_err_s = (m.delay_per_frame_s - want.delay_ns as f64 * 1e-9).abs();
    let pass = m.frames_delivered == 1
        && energy_err_fj <= 1e6 // 1 nJ
        && channel_ns == want.channel_ns
        && delay_err_s <= 1e-9;
    report(
        &name,
        pass,
        format!(
            "k={k} energy {:.6e} J (err {:.0} fJ), channel {} ns (want {}), delay {:.9} s",
            m.energy_per_frame_j, energy_err_fj, channel_ns, want.channel_ns, delay_err_s
        ),
    )
}

fn check_codec_goldens() -> Vec<OracleReport> {
    let mut out = Vec::new();
    let frame = WurFrame::bodiless(WurFrameType::WakeUp, 0x001, 0).expect("frame");

    let ldr = ppdu_airtime(&frame, DataRate::Ldr).expect("airtime");
    out.push(report(
        "ldr bodiless airtime",
        ldr.total_us() == 920,
        format!("{} us (want 920)", ldr.total_us()),
    ));
    let hdr = ppdu_airtime(&frame, DataRate::Hdr).expect("airtime");
    out.push(report(
        "hdr bodiless airtime",
        hdr.total_us() == 280,
        format!("{} us (want 280)", hdr.total_us()),
    ));

    // Payload throughput from the airtime decomposition: bits / data_us,
    // checked exactly in tenths of kbps (48 bits / 768 us = 62.5 kbps).
    let ldr_tenths = 48_000 * 10 / ldr.data_us;
    let hdr_tenths = 48_000 * 10 / hdr.data_us;
    out.push(report(
        "ldr payload rate",
        ldr_tenths == 625 && 48_000 * 10 % ldr.data_us == 0,
        format!("48000/{} us = {}.{} kbps (want 62.5)", ldr.data_us, ldr_tenths / 10, ldr_tenths % 10),
    ));
    out.push(report(
        "hdr payload rate",
        hdr_tenths == 2500 && 48_000 * 10 % hdr.data_us == 0,
        format!("48000/{} us = {}.{} kbps (want 250)", hdr.data_us, hdr_tenths / 10, hdr_tenths % 10),
    ));

    let bits: Vec<bool> = b"123456789"
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
        .collect();
    let fcs = compute_fcs(&bits);
    out.push(report("fcs check vector", fcs == 0x29B1, format!("{fcs:#06x} (want 0x29b1)")));

    let seq = encode_manchester(&[true], DataRate::Ldr);
    out.push(report(
        "manchester ldr one",
        seq.symbols == [true, false, true, false] && seq.symbol_us == 4,
        format!("{:?} @ {} us", seq.symbols, seq.symbol_us),
    ));

    let sync_hdr = build_sync(DataRate::Hdr, SYNC_PATTERN_DEFAULT);
    let sync_ldr = build_sync(DataRate::Ldr, SYNC_PATTERN_DEFAULT);
    out.push(report(
        "sync durations",
        sync_hdr.duration_us() == 64 && sync_ldr.duration_us() == 128,
        format!("hdr {} us, ldr {} us", sync_hdr.duration_us(), sync_ldr.duration_us()),
    ));
    out
}

/// Run every oracle; the harness exits nonzero if any fails.
pub fn run_self_check() -> Vec<OracleReport> {
    let mut reports = check_codec_goldens();
    for method in crate::methods::ALL_METHODS {
        reports.push(check_method_oracle(method));
    }
    reports
}

pub fn all_pass(reports: &[OracleReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_oracle_passes() {
        let reports = run_self_check();
        for r in &reports {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
        assert_eq!(reports.len(), 11);
    }
}
