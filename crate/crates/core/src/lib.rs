//! Deterministic, seedable discrete-event simulator of the 5G NR
//! contention-based random access procedure over a TDD frame structure, with
//! an explicit model of the GPIO-switched PA/LNA frontend.
//!
//! The simulator reproduces the special-slot failure mode (msg2 scheduled in
//! a slot the power amplifier never covers), validates the full-DL/UL-slot
//! fix, and sweeps msg2/msg3 start-symbol/length choices against a parametric
//! channel model. A static lint mode flags scheduling/frontend mismatches in
//! configurations without running the simulation.

pub mod channel;
pub mod frame_timing;
pub mod frontend;
pub mod lint;
pub mod presets;
pub mod rach;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sliv;

pub use channel::{decode_probability, sample_decode, ChannelParams, DecodeVerdict, SiteProfile};
pub use frame_timing::{
    classify_msg3_slot, delta_for, expand_pattern, msg3_slot, slot_kind, Msg3LandingClass,
    Numerology, SlotIndex, SlotKind, TddConfig,
};
pub use frontend::{build_timeline, AmpState, FrontendTimeline, SwitchingKind, SwitchingPolicy};
pub use lint::{lint, LintOptions, LintReport};
pub use rach::{RaMessage, RaMessageKind, RachConfig, SchedulerPolicy};
pub use scenario::{load_scenario, load_scenario_str, write_scenario, ScenarioDoc, ScenarioError};
pub use sim::{
    contention_experiment, run_all, run_sweep, run_trial, RachScenario, SweepMessage, SweepResult,
    SweepSpec, TrialOutcome, TrialVerdict,
};
pub use sliv::{decode_sliv, encode_sliv, enumerate_valid, MappingType, Sliv};
