//! Energy and channel-time accounting, plus replication statistics.
//!
//! Channel time is the measure of the union of recorded intervals, broken
//! down by component with a fixed priority (reserved > transaction >
//! collision) so that time covered by several components is counted exactly
//! once and the breakdown sums to the total.

use thiserror::Error;

use crate::time::Dur;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no frames delivered; per-frame metrics undefined")]
    NoFramesDelivered,
    #[error("at least 2 replications required for a confidence interval")]
    TooFewReplications,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentKind {
    /// PPDUs of sensor/AP transactions, including their SIFS gaps.
    Transaction,
    /// Union intervals of collisions involving the AP or a sensor.
    Collision,
    /// Reserved guard intervals (TWT with guard interval).
    Reservation,
}

/// Accumulates the channel-time intervals of one run, in nanoseconds.
#[derive(Default)]
pub struct ChannelLedger {
    intervals: Vec<(u64, u64, ComponentKind)>,
}

/// Union measure and per-component breakdown, nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelTotals {
    pub total: Dur,
    pub reserved: Dur,
    pub transactions: Dur,
    pub collisions: Dur,
}

impl ChannelLedger {
    pub fn new() -> ChannelLedger {
        ChannelLedger::default()
    }

    pub fn record(&mut self, start_ns: u64, end_ns: u64, kind: ComponentKind) {
        debug_assert!(end_ns >= start_ns);
        if end_ns > start_ns {
            self.intervals.push((start_ns, end_ns, kind));
        }
    }

    pub fn finalize(&self) -> ChannelTotals {
        let select = |kinds: &[ComponentKind]| -> Vec<(u64, u64)> {
            merge(
                self.intervals
                    .iter()
                    .filter(|(_, _, k)| kinds.contains(k))
                    .map(|&(s, e, _)| (s, e))
                    .collect(),
            )
        };
        let reserved = select(&[ComponentKind::Reservation]);
        let with_trans = select(&[ComponentKind::Reservation, ComponentKind::Transaction]);
        let all = select(&[
            ComponentKind::Reservation,
            ComponentKind::Transaction,
            ComponentKind::Collision,
        ]);
        let r = measure(&reserved);
        let t = measure(&with_trans) - r;
        let total = measure(&all);
        let c = total - r - t;
        ChannelTotals {
            total: Dur::from_nanos(total),
            reserved: Dur::from_nanos(r),
            transactions: Dur::from_nanos(t),
            collisions: Dur::from_nanos(c),
        }
    }
}

fn merge(mut intervals: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    intervals.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(intervals.len());
    for (s, e) in intervals {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn measure(merged: &[(u64, u64)]) -> u64 {
    merged.iter().map(|(s, e)| e - s).sum()
}

/// Channel time consumed per delivered frame.
pub fn channel_time_per_frame(totals: ChannelTotals, delivered: u64) -> Result<f64, MetricsError> {
    if delivered == 0 {
        return Err(MetricsError::NoFramesDelivered);
    }
    Ok(totals.total.as_secs_f64() / delivered as f64)
}

/// The headline per-run metrics, one CSV row.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    pub frames_delivered: u64,
    pub energy_per_frame_j: f64,
    pub channel_time_per_frame_s: f64,
    pub delay_per_frame_s: f64,
    pub misses: u64,
    // Diagnostics, not part of the CSV contract.
    pub undelivered: u64,
    pub run_energy_j: f64,
    pub channel: ChannelTotals,
    pub busy_fraction: f64,
}

/// Two-sided 97.5% Student-t quantile. Exact table through 30 degrees of
/// freedom; beyond that `1.96 + 2.4/df` tracks the true quantile to within
/// 0.3%.
pub fn t_975(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    assert!(df >= 1, "t quantile needs at least 1 degree of freedom");
    if df <= 30 {
        TABLE[df - 1]
    } else {
        1.96 + 2.4 / df as f64
    }
}

/// Mean and 95% confidence half-width over replication-level values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointStats {
    pub mean: f64,
    pub sd: f64,
    /// `None` with fewer than 2 replications.
    pub ci95: Option<f64>,
    pub n: usize,
}

pub fn aggregate(values: &[f64]) -> PointStats {
    let n = values.len();
    assert!(n >= 1, "aggregate over empty replication set");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return PointStats { mean, sd: 0.0, ci95: None, n };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let ci95 = t_975(n - 1) * sd / (n as f64).sqrt();
    PointStats { mean, sd, ci95: Some(ci95), n }
}

/// Ordinary least-squares slope of `ys` on `xs` with its 95% confidence
/// interval, from the residual variance. Returns `(slope, lo, hi)`.
pub fn slope_ci95(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len();
    assert_eq!(n, ys.len());
    assert!(n >= 3, "slope CI needs at least 3 points");
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    assert!(sxx > 0.0, "degenerate x values");
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let se = (sse / (n - 2) as f64 / sxx).sqrt();
    let t = t_975(n - 2);
    (slope, slope - t * se, slope + t * se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_counts_overlap_once() {
        let mut l = ChannelLedger::new();
        l.record(0, 100, ComponentKind::Transaction);
        l.record(50, 150, ComponentKind::Transaction);
        assert_eq!(l.finalize().total, Dur::from_nanos(150));
    }

    #[test]
    fn breakdown_sums_to_total_with_priority() {
        let mut l = ChannelLedger::new();
        l.record(0, 1000, ComponentKind::Reservation);
        l.record(100, 300, ComponentKind::Transaction); // inside the reservation
        l.record(900, 1200, ComponentKind::Collision); // straddles its end
        l.record(2000, 2500, ComponentKind::Transaction);
        let t = l.finalize();
        assert_eq!(t.reserved, Dur::from_nanos(1000));
        assert_eq!(t.transactions, Dur::from_nanos(500));
        assert_eq!(t.collisions, Dur::from_nanos(200));
        assert_eq!(t.total, t.reserved + t.transactions + t.collisions);
    }

    #[test]
    fn reservation_counted_once() {
        let mut l = ChannelLedger::new();
        l.record(0, 1000, ComponentKind::Reservation);
        l.record(0, 1000, ComponentKind::Reservation);
        assert_eq!(l.finalize().total, Dur::from_nanos(1000));
    }

    #[test]
    fn zero_delivered_is_an_error() {
        let totals = ChannelLedger::new().finalize();
        assert_eq!(channel_time_per_frame(totals, 0), Err(MetricsError::NoFramesDelivered));
    }

    #[test]
    fn identical_replications_have_zero_width() {
        let s = aggregate(&[2.0, 2.0, 2.0, 2.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.ci95, Some(0.0));
    }

    #[test]
    fn ten_replications_use_nine_dof() {
        // Half-width = t(9) * sd / sqrt(10) with t(9) = 2.262.
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = aggregate(&values);
        let sd = (values.iter().map(|v| (v - 4.5).powi(2)).sum::<f64>() / 9.0).sqrt();
        let expected = 2.262 * sd / 10f64.sqrt();
        assert!((s.ci95.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn single_replication_omits_ci() {
        assert_eq!(aggregate(&[1.5]).ci95, None);
    }

    #[test]
    fn doubling_replications_shrinks_ci() {
        // Statistical sanity: mean half-width over many draws scales about
        // 1/sqrt(2) when the replication count doubles.
        use crate::engine::RngStream;
        let mut rng = RngStream::new(123, 0);
        let (mut w10, mut w20) = (0.0, 0.0);
        let trials = 200;
        for _ in 0..trials {
            let a: Vec<f64> = (0..10).map(|_| rng.sample_normal_ns(0, 1e9) as f64).collect();
            let b: Vec<f64> = (0..20).map(|_| rng.sample_normal_ns(0, 1e9) as f64).collect();
            w10 += aggregate(&a).ci95.unwrap();
            w20 += aggregate(&b).ci95.unwrap();
        }
        let ratio = w20 / w10;
        assert!((0.55..0.85).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn t_quantiles_match_reference_values() {
        assert_eq!(t_975(9), 2.262);
        assert_eq!(t_975(1), 12.706);
        assert!((t_975(48) - 2.0106).abs() < 0.01);
        assert!((t_975(1000) - 1.962).abs() < 0.01);
    }

    #[test]
    fn slope_ci_on_noiseless_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        let (b, lo, hi) = slope_ci95(&xs, &ys);
        assert!((b - 2.0).abs() < 1e-12);
        assert!((hi - lo).abs() < 1e-9);
    }

    #[test]
    fn slope_ci_contains_zero_for_flat_noise() {
        let xs = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
        let ys = [5.0, 5.2, 5.1, 4.9, 5.05, 5.15, 4.95, 5.1];
        let (_, lo, hi) = slope_ci95(&xs, &ys);
        assert!(lo < 0.0 && hi > 0.0, "CI [{lo}, {hi}] should straddle zero");
    }
}
