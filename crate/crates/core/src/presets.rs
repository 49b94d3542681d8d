//! Bundled configurations: the stock OAI-style setup that reproduces the
//! special-slot failure, the full-slot fix, the three field site profiles,
//! and the calibrated channel parameters with their calibration targets.

use crate::channel::{CalibrationTarget, ChannelParams, SiteProfile, TargetMessage};
use crate::frame_timing::{parse_pattern, Numerology, TddConfig};
use crate::frontend::SwitchingPolicy;
use crate::rach::{RachConfig, SchedulerPolicy};
use crate::sim::RachScenario;
use crate::sliv::{encode_sliv, Sliv};

/// 30 kHz subcarrier spacing.
pub fn default_numerology() -> Numerology {
    Numerology::new(1).expect("mu=1 is supported")
}

/// DDDDDDDSUU over 5 ms at 30 kHz, special slot split 6 DL / 4 UL.
pub fn default_tdd() -> TddConfig {
    TddConfig::new(parse_pattern("DDDDDDDSUU").expect("pattern"), 5_000, default_numerology(), 6, 4)
        .expect("default TDD configuration is valid")
}

fn sliv(start: u8, length: u8) -> Sliv {
    encode_sliv(start, length).expect("preset allocation is valid")
}

/// Stock random-access configuration: msg2 in the special slot with indicator
/// value 57 (start 1, length 5), msg3 on the special slot's UL symbols, k2=7.
pub fn default_oai_rach() -> RachConfig {
    RachConfig {
        total_preambles: 64,
        cbra_preambles: 60,
        ra_response_window_slots: 20,
        msg3_retx_window_frames: 3,
        k0: 0,
        k2: 7,
        msg2_sliv: sliv(1, 5),
        msg3_sliv: sliv(10, 4),
        msg1_slot: 19,
        scheduler_policy: SchedulerPolicy::SpecialSlot,
        max_attempts: 10,
    }
}

/// Full-slot fix: msg2 in the last full-DL slot with a wide allocation, k2=9
/// so msg3 lands on full-UL slot 18, msg3 over the whole slot.
pub fn full_slot_fix_rach() -> RachConfig {
    RachConfig {
        k2: 9,
        msg2_sliv: sliv(1, 13),
        msg3_sliv: sliv(0, 14),
        scheduler_policy: SchedulerPolicy::LastFullDownlinkSlot,
        ..default_oai_rach()
    }
}

/// The three field deployments: a grain bin 1600 m out, a farm field at
/// 650 m in line of sight (close enough to overload the gNB receive chain),
/// and an obstructed industrial site at 450 m.
pub fn field_sites() -> Vec<SiteProfile> {
    vec![
        SiteProfile {
            name: "grain_bin".into(),
            distance_m: 1600.0,
            los: true,
            obstruction_db: 0.0,
            saturation_factor: 0.0,
        },
        SiteProfile {
            name: "ag_farm".into(),
            distance_m: 650.0,
            los: true,
            obstruction_db: 0.0,
            saturation_factor: 1.0,
        },
        SiteProfile {
            name: "biorefinery".into(),
            distance_m: 450.0,
            los: false,
            obstruction_db: 9.3,
            saturation_factor: 0.5,
        },
    ]
}

/// Channel parameters fitted to the bundled calibration targets (the output
/// of `channel::calibrate` from the neutral initial guess).
pub fn calibrated_channel() -> ChannelParams {
    ChannelParams {
        base_snr_db: 85.8,
        reference_distance_m: 1.0,
        pathloss_exponent: 2.9,
        fading_sigma_db: 3.0,
        decode_threshold_db: 3.0,
        redundancy_gain_db: 2.7,
        saturation_penalty_db: 48.0,
        near_field_radius_m: 1000.0,
        saturation_length_knee: 8.0,
        saturation_length_width: 0.6,
        shadowing_sigma_db: 0.0,
    }
}

/// Neutral starting point for calibration: same propagation geometry as the
/// shipped parameters, uninformative link parameters.
pub fn initial_channel_guess() -> ChannelParams {
    ChannelParams {
        fading_sigma_db: 4.0,
        decode_threshold_db: 0.0,
        redundancy_gain_db: 1.0,
        saturation_penalty_db: 20.0,
        ..calibrated_channel()
    }
}

/// Per-transmission decode probabilities the channel is calibrated against,
/// one per (site, message, length) anchor.
pub fn calibration_targets() -> Vec<CalibrationTarget> {
    fn t(site: &str, message: TargetMessage, length: u8, probability: f64) -> CalibrationTarget {
        CalibrationTarget { site: site.into(), message, length, probability }
    }
    vec![
        t("ag_farm", TargetMessage::Msg2, 2, 0.905),
        t("ag_farm", TargetMessage::Msg2, 3, 0.967),
        t("ag_farm", TargetMessage::Msg2, 13, 1.000),
        t("biorefinery", TargetMessage::Msg2, 5, 0.827),
        t("biorefinery", TargetMessage::Msg2, 8, 0.940),
        t("biorefinery", TargetMessage::Msg2, 11, 0.975),
        t("grain_bin", TargetMessage::Msg2, 13, 0.483),
        t("ag_farm", TargetMessage::Msg3, 2, 0.000),
        t("ag_farm", TargetMessage::Msg3, 7, 0.038),
        t("ag_farm", TargetMessage::Msg3, 9, 0.991),
        t("biorefinery", TargetMessage::Msg3, 5, 0.000),
        t("biorefinery", TargetMessage::Msg3, 9, 0.843),
        t("grain_bin", TargetMessage::Msg3, 4, 0.058),
        t("grain_bin", TargetMessage::Msg3, 11, 0.398),
    ]
}

/// Stock setup: special-slot msg2 scheduling over a slot-granular frontend.
/// Reproduces the continuous RAR failure.
pub fn default_oai_scenario() -> RachScenario {
    RachScenario {
        tdd: default_tdd(),
        rach: default_oai_rach(),
        policy: SwitchingPolicy::slot_granular(),
        sites: field_sites(),
        channel: calibrated_channel(),
        ue_count_per_site: 1,
        trials: 1000,
        seed: 7,
        horizon_frames: 24,
    }
}

/// The full-slot fix over the same frontend.
pub fn full_slot_fix_scenario() -> RachScenario {
    RachScenario { rach: full_slot_fix_rach(), ..default_oai_scenario() }
}

/// The fix with the stock k2=7 still in place: msg3 lands on a DL slot. Each
/// failed attempt burns the whole msg3 window, so the horizon is stretched to
/// let all attempts complete.
pub fn full_slot_k2_7_scenario() -> RachScenario {
    let mut scenario = full_slot_fix_scenario();
    scenario.rach.k2 = 7;
    scenario.horizon_frames = 60;
    scenario
}

/// Sweep base: the fixed scenario restricted to one RA cycle per trial so a
/// cell's counts measure per-procedure reliability, as in the field protocol.
pub fn sweep_scenario() -> RachScenario {
    let mut scenario = full_slot_fix_scenario();
    scenario.rach.max_attempts = 1;
    scenario.trials = 1000;
    scenario.seed = 42;
    scenario
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        default_oai_scenario().validate().expect("default scenario");
        full_slot_fix_scenario().validate().expect("fixed scenario");
        full_slot_k2_7_scenario().validate().expect("k2=7 scenario");
        sweep_scenario().validate().expect("sweep scenario");
    }

    #[test]
    fn default_msg2_indicator_is_57() {
        assert_eq!(default_oai_rach().msg2_sliv.encoded(), 57);
    }

    #[test]
    fn targets_reference_known_sites() {
        let sites = field_sites();
        for target in calibration_targets() {
            assert!(sites.iter().any(|s| s.name == target.site), "unknown site {}", target.site);
        }
    }
}
