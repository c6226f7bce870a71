//! Uplink carrier-aggregation simulator with a compound-action actor-critic
//! resource allocator.
//!
//! The crate is split along the data flow of one allocation cycle:
//! [`env`] scores a joint allocation, [`si`] and [`reward`] turn it into a
//! penalised reward, [`alloc`] enumerates and realises discrete CC/RB
//! decisions, [`agent`] learns powers and evaluates CC choices, and
//! [`harness`] runs whole experiments and writes their traces.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod alloc;
pub mod env;
pub mod error;
pub mod harness;
pub mod neural;
pub mod reward;
pub mod si;
pub mod units;

pub use agent::{AgentHyperparams, Ca2cAgent, CcEvaluator, Experience, ReplayBuffer};
pub use alloc::{CcVectorSet, RbPlan, RbRule};
pub use env::{AllocationState, CsiError, NetworkConfig, Point, QosState, StepOutcome, UeMetrics};
pub use error::{Error, Result};
pub use harness::{Baseline, EpisodeTrace, Event, Scenario, SiMode, TraceRow};
pub use neural::{Activation, AdamState, Direction, MlpParams};
pub use reward::{PenaltyParams, PenaltyScale, RewardRecord};
pub use si::{PaCoefficients, Tone, ToneSpectrum};
