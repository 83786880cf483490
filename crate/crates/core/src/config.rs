//! Scenario configuration: a flat `key = value` text format with defaults
//! matching the evaluated network (10 saturated stations, 10 sensors, MCS0
//! timing), validation, and a reproducibility echo that can itself be parsed
//! back as a config file.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::codec::DataRate;
use crate::edca::{EdcaParams, ExchangeTiming};
use crate::engine::splitmix64;
use crate::methods::{build_schedule, MethodKind, ScheduleError, ALL_METHODS};
use crate::sim::RunSpec;
use crate::station::PowerProfile;
use crate::time::Dur;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed line {line}: expected `key = value`")]
    Malformed { line: usize },
}

/// Full description of a sweep experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Saturated stations contending continuously.
    pub m_saturated: u32,
    /// Sensor stations delivering one frame per round.
    pub n_sensors: u32,
    /// Clock-drift standard deviations swept, in seconds.
    pub sigma_list: Vec<f64>,
    pub methods: Vec<MethodKind>,
    pub replications: u32,
    /// Total sensor frames delivered per run (split across sensors).
    pub frames_per_run: u32,
    pub seed: u64,
    // Timing, all in microseconds.
    pub data_us: u64,
    pub ack_us: u64,
    pub cts_us: u64,
    pub tf_us: u64,
    pub ps_poll_us: u64,
    pub sifs_us: u64,
    pub slot_us: u64,
    pub aifsn: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub switch_on_us: u64,
    pub wur_rate: DataRate,
    pub sync_pattern: u32,
    // Power, in milliwatts.
    pub p_pcr_tx_mw: f64,
    pub p_pcr_listen_mw: f64,
    pub p_pcr_doze_mw: f64,
    pub p_wur_on_mw: f64,
    pub p_wur_off_mw: f64,
    /// 0 = derive from switch-on delay and exchange duration.
    pub miss_timeout_us: u64,
    /// 0 = derive from the method geometry.
    pub round_period_s: f64,
    /// 0 = no WUR beacons.
    pub beacon_period_s: f64,
    /// 0 = flat per-event drift; otherwise sigma accrues over this window
    /// since the last resynchronization.
    pub drift_window_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> ScenarioConfig {
        ScenarioConfig {
            m_saturated: 10,
            n_sensors: 10,
            sigma_list: vec![0.001, 0.003, 0.010, 0.030, 0.100],
            methods: ALL_METHODS.to_vec(),
            replications: 10,
            frames_per_run: 100,
            seed: 1,
            data_us: 1480,
            ack_us: 44,
            cts_us: 44,
            tf_us: 100,
            ps_poll_us: 44,
            sifs_us: 16,
            slot_us: 9,
            aifsn: 3,
            cw_min: 15,
            cw_max: 1023,
            switch_on_us: 2000,
            wur_rate: DataRate::Ldr,
            sync_pattern: crate::codec::SYNC_PATTERN_DEFAULT,
            p_pcr_tx_mw: 280.0,
            p_pcr_listen_mw: 100.0,
            p_pcr_doze_mw: 0.05,
            p_wur_on_mw: 0.5,
            p_wur_off_mw: 0.0,
            miss_timeout_us: 0,
            round_period_s: 0.0,
            beacon_period_s: 0.0,
            drift_window_s: 0.0,
        }
    }
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse::<T>().map_err(|_| invalid(key, format!("cannot parse `{value}`")))
}

impl ScenarioConfig {
    /// Parse a flat `key = value` file; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_cfg(&text)
    }

    pub fn from_str_cfg(text: &str) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or(ConfigError::Malformed { line: idx + 1 })?;
            cfg.apply_kv(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one `key = value` override.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "m_saturated" => self.m_saturated = parse_num("m_saturated", value)?,
            "n_sensors" => self.n_sensors = parse_num("n_sensors", value)?,
            "sigma_list" => self.sigma_list = parse_sigma_list(value)?,
            "methods" => self.methods = parse_methods(value)?,
            "replications" => self.replications = parse_num("replications", value)?,
            "frames_per_run" => self.frames_per_run = parse_num("frames_per_run", value)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "data_us" => self.data_us = parse_num("data_us", value)?,
            "ack_us" => self.ack_us = parse_num("ack_us", value)?,
            "cts_us" => self.cts_us = parse_num("cts_us", value)?,
            "tf_us" => self.tf_us = parse_num("tf_us", value)?,
            "ps_poll_us" => self.ps_poll_us = parse_num("ps_poll_us", value)?,
            "sifs_us" => self.sifs_us = parse_num("sifs_us", value)?,
            "slot_us" => self.slot_us = parse_num("slot_us", value)?,
            "aifsn" => self.aifsn = parse_num("aifsn", value)?,
            "cw_min" => self.cw_min = parse_num("cw_min", value)?,
            "cw_max" => self.cw_max = parse_num("cw_max", value)?,
            "switch_on_us" => self.switch_on_us = parse_num("switch_on_us", value)?,
            "wur_rate" => {
                self.wur_rate = match value.to_ascii_lowercase().as_str() {
                    "ldr" => DataRate::Ldr,
                    "hdr" => DataRate::Hdr,
                    other => return Err(invalid("wur_rate", format!("`{other}` is not ldr|hdr"))),
                }
            }
            "sync_pattern" => {
                let digits = value.trim_start_matches("0x");
                self.sync_pattern = u32::from_str_radix(digits, 16)
                    .map_err(|_| invalid("sync_pattern", format!("cannot parse `{value}`")))?;
            }
            "p_pcr_tx_mw" => self.p_pcr_tx_mw = parse_num("p_pcr_tx_mw", value)?,
            "p_pcr_listen_mw" => self.p_pcr_listen_mw = parse_num("p_pcr_listen_mw", value)?,
            "p_pcr_doze_mw" => self.p_pcr_doze_mw = parse_num("p_pcr_doze_mw", value)?,
            "p_wur_on_mw" => self.p_wur_on_mw = parse_num("p_wur_on_mw", value)?,
            "p_wur_off_mw" => self.p_wur_off_mw = parse_num("p_wur_off_mw", value)?,
            "miss_timeout_us" => self.miss_timeout_us = parse_num("miss_timeout_us", value)?,
            "round_period_s" => self.round_period_s = parse_num("round_period_s", value)?,
            "beacon_period_s" => self.beacon_period_s = parse_num("beacon_period_s", value)?,
            "drift_window_s" => self.drift_window_s = parse_num("drift_window_s", value)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_sensors > 4094 {
            return Err(invalid("n_sensors", "at most 4094 sensors (12-bit addresses)"));
        }
        if self.sigma_list.is_empty() {
            return Err(invalid("sigma_list", "at least one sigma required"));
        }
        for &s in &self.sigma_list {
            if !(s >= 0.0) || !s.is_finite() {
                return Err(invalid("sigma_list", format!("sigma {s} must be >= 0")));
            }
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method required"));
        }
        if self.replications == 0 {
            return Err(invalid("replications", "must be >= 1"));
        }
        if self.frames_per_run == 0 {
            return Err(invalid("frames_per_run", "must be >= 1"));
        }
        for (key, v) in [
            ("data_us", self.data_us),
            ("ack_us", self.ack_us),
            ("cts_us", self.cts_us),
            ("tf_us", self.tf_us),
            ("ps_poll_us", self.ps_poll_us),
            ("sifs_us", self.sifs_us),
            ("slot_us", self.slot_us),
        ] {
            if v == 0 {
                return Err(invalid(key, "duration must be > 0"));
            }
        }
        if self.aifsn == 0 {
            return Err(invalid("aifsn", "must be >= 1 so AIFS exceeds SIFS"));
        }
        if !(self.cw_min + 1).is_power_of_two() || !(self.cw_max + 1).is_power_of_two() {
            return Err(invalid("cw_min", "cw_min + 1 and cw_max + 1 must be powers of two"));
        }
        if self.cw_min > self.cw_max {
            return Err(invalid("cw_min", "cw_min must not exceed cw_max"));
        }
        for (key, v) in [
            ("p_pcr_tx_mw", self.p_pcr_tx_mw),
            ("p_pcr_listen_mw", self.p_pcr_listen_mw),
            ("p_pcr_doze_mw", self.p_pcr_doze_mw),
            ("p_wur_on_mw", self.p_wur_on_mw),
            ("p_wur_off_mw", self.p_wur_off_mw),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(key, "power must be finite and >= 0"));
            }
        }
        if self.p_wur_on_mw > self.p_pcr_listen_mw {
            return Err(invalid("p_wur_on_mw", "WUR power must not exceed PCR listen power"));
        }
        for (key, v) in [
            ("round_period_s", self.round_period_s),
            ("beacon_period_s", self.beacon_period_s),
            ("drift_window_s", self.drift_window_s),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(key, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn timing(&self) -> ExchangeTiming {
        ExchangeTiming {
            sifs: Dur::from_micros(self.sifs_us),
            slot: Dur::from_micros(self.slot_us),
            data: Dur::from_micros(self.data_us),
            ack: Dur::from_micros(self.ack_us),
            cts: Dur::from_micros(self.cts_us),
            tf: Dur::from_micros(self.tf_us),
            ps_poll: Dur::from_micros(self.ps_poll_us),
        }
    }

    pub fn edca_params(&self) -> EdcaParams {
        EdcaParams {
            slot: Dur::from_micros(self.slot_us),
            sifs: Dur::from_micros(self.sifs_us),
            aifsn: self.aifsn,
            cw_min: self.cw_min,
            cw_max: self.cw_max,
        }
    }

    pub fn profile(&self) -> PowerProfile {
        let to_uw = |mw: f64| (mw * 1000.0).round() as u64;
        PowerProfile {
            pcr_tx_uw: to_uw(self.p_pcr_tx_mw),
            pcr_listen_uw: to_uw(self.p_pcr_listen_mw),
            pcr_doze_uw: to_uw(self.p_pcr_doze_mw),
            wur_on_uw: to_uw(self.p_wur_on_mw),
            wur_off_uw: to_uw(self.p_wur_off_mw),
            pcr_switch_on: Dur::from_micros(self.switch_on_us),
        }
    }

    /// Frames per sensor: frames_per_run split evenly, rounded up.
    pub fn rounds(&self) -> u32 {
        if self.n_sensors == 0 {
            0
        } else {
            self.frames_per_run.div_ceil(self.n_sensors)
        }
    }

    pub fn miss_timeout(&self) -> Dur {
        if self.miss_timeout_us > 0 {
            Dur::from_micros(self.miss_timeout_us)
        } else {
            Dur::from_micros(self.switch_on_us) * 2 + self.timing().exchange_span()
        }
    }

    /// Assemble the immutable spec for one run.
    pub fn run_spec(
        &self,
        method: MethodKind,
        sigma_s: f64,
        seed: u64,
    ) -> Result<RunSpec, ConfigError> {
        let timing = self.timing();
        let period = (self.round_period_s > 0.0).then(|| Dur::from_secs_f64(self.round_period_s));
        let schedule = build_schedule(
            method,
            self.n_sensors,
            self.rounds(),
            sigma_s,
            &timing,
            Dur::from_micros(self.switch_on_us),
            period,
        )
        .map_err(|e: ScheduleError| invalid("round_period_s", e.to_string()))?;
        Ok(RunSpec {
            method,
            sigma_s,
            n_saturated: self.m_saturated,
            n_sensors: self.n_sensors,
            rounds: self.rounds(),
            edca: self.edca_params(),
            timing,
            profile: self.profile(),
            wur_rate: self.wur_rate,
            miss_timeout: self.miss_timeout(),
            beacon_period: (self.beacon_period_s > 0.0)
                .then(|| Dur::from_secs_f64(self.beacon_period_s)),
            drift_window: (self.drift_window_s > 0.0)
                .then(|| Dur::from_secs_f64(self.drift_window_s)),
            schedule,
            seed,
        })
    }

    /// Every applied value as `key = value` lines, parseable back into the
    /// same configuration; the reproducibility header of all outputs.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let sigmas: Vec<String> = self.sigma_list.iter().map(|s| s.to_string()).collect();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let mut push = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        push("m_saturated", self.m_saturated.to_string());
        push("n_sensors", self.n_sensors.to_string());
        push("sigma_list", sigmas.join(","));
        push("methods", methods.join(","));
        push("replications", self.replications.to_string());
        push("frames_per_run", self.frames_per_run.to_string());
        push("seed", self.seed.to_string());
        push("data_us", self.data_us.to_string());
        push("ack_us", self.ack_us.to_string());
        push("cts_us", self.cts_us.to_string());
        push("tf_us", self.tf_us.to_string());
        push("ps_poll_us", self.ps_poll_us.to_string());
        push("sifs_us", self.sifs_us.to_string());
        push("slot_us", self.slot_us.to_string());
        push("aifsn", self.aifsn.to_string());
        push("cw_min", self.cw_min.to_string());
        push("cw_max", self.cw_max.to_string());
        push("switch_on_us", self.switch_on_us.to_string());
        push("wur_rate", self.wur_rate.name().to_string());
        push("sync_pattern", format!("0x{:08X}", self.sync_pattern));
        push("p_pcr_tx_mw", self.p_pcr_tx_mw.to_string());
        push("p_pcr_listen_mw", self.p_pcr_listen_mw.to_string());
        push("p_pcr_doze_mw", self.p_pcr_doze_mw.to_string());
        push("p_wur_on_mw", self.p_wur_on_mw.to_string());
        push("p_wur_off_mw", self.p_wur_off_mw.to_string());
        push("miss_timeout_us", self.miss_timeout_us.to_string());
        push("round_period_s", self.round_period_s.to_string());
        push("beacon_period_s", self.beacon_period_s.to_string());
        push("drift_window_s", self.drift_window_s.to_string());
        out
    }
}

fn parse_sigma_list(value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| invalid("sigma_list", format!("cannot parse `{s}`")))
        })
        .collect()
}

fn parse_methods(value: &str) -> Result<Vec<MethodKind>, ConfigError> {
    if value.trim() == "all" {
        return Ok(ALL_METHODS.to_vec());
    }
    value
        .split(',')
        .map(|s| {
            MethodKind::parse(s).ok_or_else(|| invalid("methods", format!("unknown method `{s}`")))
        })
        .collect()
}

/// Per-run seed: a splitmix64 chain over the master seed, the method id, the
/// sigma value bits, and the replication index. Adding methods or sigma
/// points never changes the seeds of existing runs.
pub fn run_seed(master: u64, method: MethodKind, sigma_s: f64, replication: u32) -> u64 {
    let mut x = splitmix64(master ^ 0x57_55_52_53_49_4D_00_01);
    x = splitmix64(x ^ method.seed_id());
    x = splitmix64(x ^ sigma_s.to_bits());
    splitmix64(x ^ replication as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_paper_defaults() {
        let cfg = ScenarioConfig::from_str_cfg("").unwrap();
        assert_eq!(cfg.m_saturated, 10);
        assert_eq!(cfg.n_sensors, 10);
        assert_eq!(cfg.data_us, 1480);
        assert_eq!(cfg.methods.len(), 4);
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn five_point_sigma_sweep_parses() {
        let cfg =
            ScenarioConfig::from_str_cfg("sigma_list = 0.001, 0.003, 0.01, 0.03, 0.1").unwrap();
        assert_eq!(cfg.sigma_list, vec![0.001, 0.003, 0.01, 0.03, 0.1]);
    }

    #[test]
    fn negative_sigma_is_rejected() {
        let err = ScenarioConfig::from_str_cfg("sigma_list = -0.01").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "sigma_list", .. }));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ScenarioConfig::from_str_cfg("bogus = 1").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "bogus"));
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = ScenarioConfig::from_str_cfg("# comment\n\nseed = 7 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_kv("sigma_list", "0.002,0.02").unwrap();
        cfg.apply_kv("methods", "twt,wur-cts").unwrap();
        cfg.apply_kv("seed", "99").unwrap();
        let echoed = ScenarioConfig::from_str_cfg(&cfg.echo()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn invalid_cw_is_rejected() {
        let err = ScenarioConfig::from_str_cfg("cw_min = 14").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "cw_min", .. }));
    }

    #[test]
    fn run_seeds_are_stable_per_point() {
        let a = run_seed(1, MethodKind::TwtPlain, 0.01, 0);
        let b = run_seed(1, MethodKind::TwtPlain, 0.01, 0);
        assert_eq!(a, b);
        assert_ne!(a, run_seed(1, MethodKind::TwtPlain, 0.01, 1));
        assert_ne!(a, run_seed(1, MethodKind::TwtWithTf, 0.01, 0));
        assert_ne!(a, run_seed(1, MethodKind::TwtPlain, 0.02, 0));
        assert_ne!(a, run_seed(2, MethodKind::TwtPlain, 0.01, 0));
    }

    #[test]
    fn rounds_split_frames_across_sensors() {
        let mut cfg = ScenarioConfig::default();
        cfg.frames_per_run = 100;
        cfg.n_sensors = 10;
        assert_eq!(cfg.rounds(), 10);
        cfg.n_sensors = 7;
        assert_eq!(cfg.rounds(), 15);
    }

    #[test]
    fn default_miss_timeout_covers_switch_and_exchange() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.miss_timeout(), Dur::from_micros(2 * 2000 + 1540));
    }
}
