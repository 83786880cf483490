//! Discrete-event model of 802.11ba wake-up-radio uplink delivery.
//!
//! The crate provides a bit-exact WUR frame codec, a single-collision-domain
//! medium with physical and virtual carrier sense, slot-exact EDCA
//! contention, per-station power accounting, and a sweep harness that
//! compares four energy-saving delivery methods (TWT, TWT with trigger
//! frames, TWT with a guard interval, and WUR with CTS-to-self) as the clock
//! drift sigma varies.

pub mod channel;
pub mod codec;
pub mod config;
pub mod edca;
pub mod engine;
pub mod methods;
pub mod metrics;
pub mod selfcheck;
pub mod sim;
pub mod station;
pub mod sweep;
pub mod time;

pub use channel::{Medium, Ppdu, StationId};
pub use codec::{DataRate, WurFrame, WurFrameType};
pub use config::{ConfigError, ScenarioConfig};
pub use engine::{EventQueue, RngStream};
pub use methods::MethodKind;
pub use metrics::RunMetrics;
pub use sim::{run_scenario, RunOptions, RunSpec};
pub use station::{DriftedClock, PowerProfile};
pub use time::{Dur, SimTime};
