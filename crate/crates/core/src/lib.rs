//! Handover planning for edge-hosted LLM token streaming.
//!
//! When mobile UEs hand over to a new base station, the target must rebuild
//! each UE's KV cache before token streaming can resume. It can re-prefill a
//! shared prefix of length `L` in one batch and receive the rest of the cache
//! over the inter-BS backhaul. This crate picks `L` and a backhaul schedule
//! that minimize the worst-user handover delay. It also simulates the
//! baselines (prefill only, transfer only, no handover) over randomized
//! mobility scenarios.

pub mod delay;
pub mod error;
pub mod harness;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod scheduler;

pub use delay::{
    cumulative_remaining, first_arrival_bound, min_transfer_delay, optimal_prefill_length,
    plan_for_strategy, prefill_start_time, value_function, worst_prefill_delay, DelayBreakdown,
    DelayOptions, HandoverProblem, HoPlan, Strategy,
};
pub use error::{Error, Result};
pub use model::{
    kv_bits_per_token, normalized_rate, token_split, BackhaulLink, Instance, KvCacheSpec,
    PrefillProfile, TokenSplit, UeContext,
};
pub use scheduler::{build_schedule, verify_schedule, RateSchedule, RateSegment};
