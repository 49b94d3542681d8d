//! Scenario file format: a sectioned key/value text document mapping onto
//! `RachScenario`, plus optional lint floors.
//!
//! ```text
//! [tdd]
//! pattern = DDDDDDDSUU
//! periodicity = ms5
//! mu = 1
//! ...
//! [sites]
//! ag_farm = 650.0, los, 0.0, 1.0
//! ```
//!
//! Unknown sections and keys are rejected. Syntax problems fail fast with
//! line/column positions; semantic problems (bad values, missing keys,
//! violated invariants) are all collected before reporting.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::channel::{ChannelParams, SiteProfile};
use crate::frame_timing::{parse_pattern, Numerology, TddConfig, SYMBOLS_PER_SLOT};
use crate::frontend::{SwitchingKind, SwitchingPolicy};
use crate::lint::LintOptions;
use crate::presets;
use crate::rach::{RachConfig, SchedulerPolicy};
use crate::sim::RachScenario;
use crate::sliv::{decode_sliv, encode_sliv, Sliv};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("scenario is invalid:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
}

/// A parsed scenario plus the lint floors that rode along in the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDoc {
    pub scenario: RachScenario,
    pub lint: LintOptions,
}

struct RawEntry {
    value: String,
    line: usize,
    used: bool,
}

struct Section {
    entries: BTreeMap<String, RawEntry>,
    order: Vec<String>,
}

type Sections = BTreeMap<String, Section>;

const KNOWN_SECTIONS: [&str; 7] = ["tdd", "rach", "frontend", "sites", "channel", "sim", "lint"];

fn parse_sections(text: &str) -> Result<Sections, ScenarioError> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ScenarioError::Parse {
                    line: line_no,
                    column: raw.len(),
                    message: "section header is missing the closing ']'".into(),
                });
            };
            let name = name.trim().to_string();
            if name.is_empty() {
                return Err(ScenarioError::Parse {
                    line: line_no,
                    column: 1,
                    message: "empty section name".into(),
                });
            }
            sections
                .entry(name.clone())
                .or_insert_with(|| Section { entries: BTreeMap::new(), order: Vec::new() });
            current = Some(name);
            continue;
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(ScenarioError::Parse {
                line: line_no,
                column: raw.find(trimmed).unwrap_or(0) + 1,
                message: format!("expected 'key = value', got '{trimmed}'"),
            });
        };
        let key = trimmed[..eq].trim().to_string();
        let value = trimmed[eq + 1..].trim().to_string();
        if key.is_empty() {
            return Err(ScenarioError::Parse {
                line: line_no,
                column: 1,
                message: "empty key".into(),
            });
        }
        let Some(section_name) = &current else {
            return Err(ScenarioError::Parse {
                line: line_no,
                column: 1,
                message: format!("key '{key}' appears before any [section] header"),
            });
        };
        let section = sections.get_mut(section_name).expect("section exists once named");
        if section.entries.contains_key(&key) {
            return Err(ScenarioError::Parse {
                line: line_no,
                column: 1,
                message: format!("duplicate key '{key}' in [{section_name}]"),
            });
        }
        section.order.push(key.clone());
        section.entries.insert(key, RawEntry { value, line: line_no, used: false });
    }
    Ok(sections)
}

/// Collects every semantic problem found while building the scenario.
struct Builder {
    issues: Vec<String>,
}

impl Builder {
    fn take(
        &mut self,
        sections: &mut Sections,
        section: &str,
        key: &str,
    ) -> Option<(String, usize)> {
        let entry = sections.get_mut(section)?.entries.get_mut(key)?;
        entry.used = true;
        Some((entry.value.clone(), entry.line))
    }

    fn required<T: std::str::FromStr>(
        &mut self,
        sections: &mut Sections,
        section: &str,
        key: &str,
    ) -> Option<T> {
        match self.take(sections, section, key) {
            None => {
                self.issues.push(format!("[{section}] is missing required key '{key}'"));
                None
            }
            Some((value, line)) => match value.parse() {
                Ok(v) => Some(v),
                Err(_) => {
                    self.issues.push(format!(
                        "line {line}: [{section}] {key} = '{value}' is not a valid value"
                    ));
                    None
                }
            },
        }
    }

    fn optional<T: std::str::FromStr>(
        &mut self,
        sections: &mut Sections,
        section: &str,
        key: &str,
        default: T,
    ) -> T {
        match self.take(sections, section, key) {
            None => default,
            Some((value, line)) => match value.parse() {
                Ok(v) => v,
                Err(_) => {
                    self.issues.push(format!(
                        "line {line}: [{section}] {key} = '{value}' is not a valid value"
                    ));
                    default
                }
            },
        }
    }
}

fn parse_periodicity_ms(text: &str) -> Option<u64> {
    // "ms5" or "ms2.5" -> microseconds
    let rest = text.strip_prefix("ms")?;
    let ms: f64 = rest.parse().ok()?;
    if ms.is_nan() || ms <= 0.0 {
        return None;
    }
    let us = ms * 1000.0;
    if (us - us.round()).abs() > 1e-9 {
        return None;
    }
    Some(us.round() as u64)
}

fn parse_switching(text: &str) -> Option<SwitchingKind> {
    match text {
        "slot-granular" => Some(SwitchingKind::SlotGranular),
        "symbol-granular" => Some(SwitchingKind::SymbolGranular),
        _ => None,
    }
}

fn parse_policy(text: &str) -> Option<SchedulerPolicy> {
    match text {
        "special-slot" => Some(SchedulerPolicy::SpecialSlot),
        "last-full-dl" => Some(SchedulerPolicy::LastFullDownlinkSlot),
        _ => None,
    }
}

/// Parse an allocation given either as `<prefix>_start`/`<prefix>_length` or
/// as the single `<prefix>_sliv` indicator value.
fn parse_allocation(
    b: &mut Builder,
    sections: &mut Sections,
    prefix: &str,
    default: Sliv,
) -> Sliv {
    let start = b.take(sections, "rach", &format!("{prefix}_start"));
    let length = b.take(sections, "rach", &format!("{prefix}_length"));
    let indicator = b.take(sections, "rach", &format!("{prefix}_sliv"));
    fn parse_u8(
        b: &mut Builder,
        (value, line): (String, usize),
        what: &str,
    ) -> Option<u8> {
        match value.parse() {
            Ok(n) => Some(n),
            Err(_) => {
                b.issues.push(format!("line {line}: [rach] {what} = '{value}' is not a number"));
                None
            }
        }
    }
    match (start, length, indicator) {
        (Some(s), Some(l), None) => {
            let s_line = s.1;
            let s = parse_u8(b, s, &format!("{prefix}_start"));
            let l = parse_u8(b, l, &format!("{prefix}_length"));
            match (s, l) {
                (Some(s), Some(l)) => match encode_sliv(s, l) {
                    Ok(sliv) => sliv,
                    Err(e) => {
                        b.issues.push(format!("line {s_line}: [rach] {prefix} allocation: {e}"));
                        default
                    }
                },
                _ => default,
            }
        }
        (None, None, Some((v, line))) => match v.parse::<u16>().map_err(|_| ()).and_then(|code| {
            decode_sliv(code).map_err(|_| ())
        }) {
            Ok((s, l)) => encode_sliv(s, l).expect("decoded pair is valid"),
            Err(()) => {
                b.issues.push(format!(
                    "line {line}: [rach] {prefix}_sliv = '{v}' is not a valid indicator value"
                ));
                default
            }
        },
        (None, None, None) => default,
        (start, length, Some((_, line))) if start.is_some() || length.is_some() => {
            b.issues.push(format!(
                "line {line}: [rach] give either {prefix}_sliv or {prefix}_start/{prefix}_length, not both"
            ));
            default
        }
        (Some((_, line)), None, None) | (None, Some((_, line)), None) => {
            b.issues.push(format!(
                "line {line}: [rach] {prefix}_start and {prefix}_length must be given together"
            ));
            default
        }
        _ => default,
    }
}

fn parse_site_line(name: &str, value: &str, line: usize) -> Result<SiteProfile, String> {
    let fields: Vec<&str> = value.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(format!(
            "line {line}: [sites] {name}: expected 'distance_m, los|nlos, obstruction_db, saturation_factor'"
        ));
    }
    let distance: f64 = fields[0]
        .parse()
        .map_err(|_| format!("line {line}: [sites] {name}: bad distance '{}'", fields[0]))?;
    let los = match fields[1] {
        "los" => true,
        "nlos" => false,
        other => {
            return Err(format!("line {line}: [sites] {name}: expected los|nlos, got '{other}'"))
        }
    };
    let obstruction: f64 = fields[2]
        .parse()
        .map_err(|_| format!("line {line}: [sites] {name}: bad obstruction '{}'", fields[2]))?;
    let saturation: f64 = fields[3]
        .parse()
        .map_err(|_| format!("line {line}: [sites] {name}: bad saturation factor '{}'", fields[3]))?;
    Ok(SiteProfile {
        name: name.to_string(),
        distance_m: distance,
        los,
        obstruction_db: obstruction,
        saturation_factor: saturation,
    })
}

/// Parse and fully validate a scenario document.
pub fn load_scenario_str(text: &str) -> Result<ScenarioDoc, ScenarioError> {
    let mut sections = parse_sections(text)?;
    let mut b = Builder { issues: Vec::new() };

    for name in sections.keys() {
        if !KNOWN_SECTIONS.contains(&name.as_str()) {
            b.issues.push(format!("unknown section [{name}]"));
        }
    }

    // [tdd]
    let pattern_text: Option<String> = b.required(&mut sections, "tdd", "pattern");
    let mu: Option<u8> = b.required(&mut sections, "tdd", "mu");
    let special_dl: Option<u8> = b.required(&mut sections, "tdd", "special_dl_symbols");
    let special_ul: Option<u8> = b.required(&mut sections, "tdd", "special_ul_symbols");
    let periodicity_us: Option<u64> = match b.take(&mut sections, "tdd", "periodicity") {
        Some((value, line)) => match parse_periodicity_ms(&value) {
            Some(us) => Some(us),
            None => {
                b.issues.push(format!(
                    "line {line}: [tdd] periodicity = '{value}' (expected e.g. ms5 or ms2.5)"
                ));
                None
            }
        },
        None => match b.take(&mut sections, "tdd", "periodicity_us") {
            Some((value, line)) => match value.parse() {
                Ok(us) => Some(us),
                Err(_) => {
                    b.issues
                        .push(format!("line {line}: [tdd] periodicity_us = '{value}' is not a number"));
                    None
                }
            },
            None => {
                b.issues.push("[tdd] needs either 'periodicity' or 'periodicity_us'".into());
                None
            }
        },
    };
    // normal cyclic prefix only
    let symbols_per_slot: u8 =
        b.optional(&mut sections, "tdd", "symbols_per_slot", SYMBOLS_PER_SLOT);
    if symbols_per_slot != SYMBOLS_PER_SLOT {
        b.issues.push(format!(
            "[tdd] symbols_per_slot = {symbols_per_slot} is unsupported; only {SYMBOLS_PER_SLOT} (normal cyclic prefix) is modeled"
        ));
    }

    let tdd = match (pattern_text, periodicity_us, mu, special_dl, special_ul) {
        (Some(pattern_text), Some(periodicity_us), Some(mu), Some(dl), Some(ul)) => {
            let pattern = match parse_pattern(&pattern_text) {
                Ok(p) => Some(p),
                Err(e) => {
                    b.issues.push(format!("[tdd] pattern: {e}"));
                    None
                }
            };
            let numerology = match Numerology::new(mu) {
                Ok(n) => Some(n),
                Err(e) => {
                    b.issues.push(format!("[tdd] mu: {e}"));
                    None
                }
            };
            match (pattern, numerology) {
                (Some(pattern), Some(numerology)) => {
                    match TddConfig::new(pattern, periodicity_us, numerology, dl, ul) {
                        Ok(tdd) => Some(tdd),
                        Err(e) => {
                            b.issues.push(format!("[tdd] {e}"));
                            None
                        }
                    }
                }
                _ => None,
            }
        }
        _ => None,
    };

    // [rach]
    let policy = match b.take(&mut sections, "rach", "policy") {
        Some((value, line)) => match parse_policy(&value) {
            Some(p) => p,
            None => {
                b.issues.push(format!(
                    "line {line}: [rach] policy = '{value}' (expected special-slot or last-full-dl)"
                ));
                SchedulerPolicy::SpecialSlot
            }
        },
        None => {
            b.issues.push("[rach] is missing required key 'policy'".into());
            SchedulerPolicy::SpecialSlot
        }
    };
    let defaults = presets::default_oai_rach();
    let rach = RachConfig {
        total_preambles: b.optional(&mut sections, "rach", "total_preambles", defaults.total_preambles),
        cbra_preambles: b.optional(&mut sections, "rach", "cbra_preambles", defaults.cbra_preambles),
        ra_response_window_slots: b.optional(
            &mut sections,
            "rach",
            "ra_response_window_slots",
            defaults.ra_response_window_slots,
        ),
        msg3_retx_window_frames: b.optional(
            &mut sections,
            "rach",
            "msg3_retx_window_frames",
            defaults.msg3_retx_window_frames,
        ),
        k0: b.optional(&mut sections, "rach", "k0", defaults.k0),
        k2: b.required(&mut sections, "rach", "k2").unwrap_or(defaults.k2),
        msg2_sliv: parse_allocation(&mut b, &mut sections, "msg2", defaults.msg2_sliv),
        msg3_sliv: parse_allocation(&mut b, &mut sections, "msg3", defaults.msg3_sliv),
        msg1_slot: b.optional(&mut sections, "rach", "msg1_slot", defaults.msg1_slot),
        scheduler_policy: policy,
        max_attempts: b.optional(&mut sections, "rach", "max_attempts", defaults.max_attempts),
    };

    // [frontend]
    let switching = match b.take(&mut sections, "frontend", "switching") {
        Some((value, line)) => match parse_switching(&value) {
            Some(k) => k,
            None => {
                b.issues.push(format!(
                    "line {line}: [frontend] switching = '{value}' (expected slot-granular or symbol-granular)"
                ));
                SwitchingKind::SlotGranular
            }
        },
        None => {
            b.issues.push("[frontend] is missing required key 'switching'".into());
            SwitchingKind::SlotGranular
        }
    };
    let policy = SwitchingPolicy {
        kind: switching,
        settling_symbols: b.optional(&mut sections, "frontend", "settling_symbols", 0),
    };

    // [sites] — every key is a site definition
    let mut sites = Vec::new();
    if let Some(section) = sections.get_mut("sites") {
        for name in section.order.clone() {
            let entry = section.entries.get_mut(&name).expect("ordered key exists");
            entry.used = true;
            match parse_site_line(&name, &entry.value, entry.line) {
                Ok(site) => sites.push(site),
                Err(issue) => b.issues.push(issue),
            }
        }
    }
    if sites.is_empty() {
        b.issues.push("[sites] must define at least one site".into());
    }

    // [channel] — defaults to the calibrated parameters
    let cal = presets::calibrated_channel();
    let channel = ChannelParams {
        base_snr_db: b.optional(&mut sections, "channel", "base_snr_db", cal.base_snr_db),
        reference_distance_m: b.optional(
            &mut sections,
            "channel",
            "reference_distance_m",
            cal.reference_distance_m,
        ),
        pathloss_exponent: b.optional(
            &mut sections,
            "channel",
            "pathloss_exponent",
            cal.pathloss_exponent,
        ),
        fading_sigma_db: b.optional(&mut sections, "channel", "fading_sigma_db", cal.fading_sigma_db),
        decode_threshold_db: b.optional(
            &mut sections,
            "channel",
            "decode_threshold_db",
            cal.decode_threshold_db,
        ),
        redundancy_gain_db: b.optional(
            &mut sections,
            "channel",
            "redundancy_gain_db",
            cal.redundancy_gain_db,
        ),
        saturation_penalty_db: b.optional(
            &mut sections,
            "channel",
            "saturation_penalty_db",
            cal.saturation_penalty_db,
        ),
        near_field_radius_m: b.optional(
            &mut sections,
            "channel",
            "near_field_radius_m",
            cal.near_field_radius_m,
        ),
        saturation_length_knee: b.optional(
            &mut sections,
            "channel",
            "saturation_length_knee",
            cal.saturation_length_knee,
        ),
        saturation_length_width: b.optional(
            &mut sections,
            "channel",
            "saturation_length_width",
            cal.saturation_length_width,
        ),
        shadowing_sigma_db: b.optional(
            &mut sections,
            "channel",
            "shadowing_sigma_db",
            cal.shadowing_sigma_db,
        ),
    };

    // [sim]
    let trials: usize = b.required(&mut sections, "sim", "trials").unwrap_or(1);
    let seed: u64 = b.required(&mut sections, "sim", "seed").unwrap_or(0);
    let ue_count: usize = b.optional(&mut sections, "sim", "ue_count_per_site", 1);
    let horizon: u32 = b.optional(&mut sections, "sim", "horizon_frames", 24);

    // [lint]
    let lint_defaults = LintOptions::default();
    let lint = LintOptions {
        msg2_min_length: b.optional(
            &mut sections,
            "lint",
            "msg2_min_length",
            lint_defaults.msg2_min_length,
        ),
        msg3_min_length: b.optional(
            &mut sections,
            "lint",
            "msg3_min_length",
            lint_defaults.msg3_min_length,
        ),
    };

    // reject unknown keys in known sections
    for (section_name, section) in &sections {
        if !KNOWN_SECTIONS.contains(&section_name.as_str()) {
            continue;
        }
        if section_name == "sites" {
            continue;
        }
        for (key, entry) in &section.entries {
            if !entry.used {
                b.issues.push(format!(
                    "line {}: unknown key '{key}' in [{section_name}]",
                    entry.line
                ));
            }
        }
    }

    let Some(tdd) = tdd else {
        // the full cross-checks need a TDD config; still surface the simple ones
        if trials == 0 {
            b.issues.push("sim: trials must be at least 1".into());
        }
        if ue_count == 0 {
            b.issues.push("sim: ue_count_per_site must be at least 1".into());
        }
        for site in &sites {
            if let Err(e) = site.validate() {
                b.issues.push(format!("sites: {e}"));
            }
        }
        if let Err(e) = channel.validate() {
            b.issues.push(format!("channel: {e}"));
        }
        return Err(ScenarioError::Validation(b.issues));
    };
    let scenario = RachScenario {
        tdd,
        rach,
        policy,
        sites,
        channel,
        ue_count_per_site: ue_count,
        trials,
        seed,
        horizon_frames: horizon,
    };
    if let Err(more) = scenario.validate() {
        b.issues.extend(more);
    }
    if !b.issues.is_empty() {
        return Err(ScenarioError::Validation(b.issues));
    }
    Ok(ScenarioDoc { scenario, lint })
}

/// Load a scenario from a file path.
pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioDoc, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse {
        line: 0,
        column: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    load_scenario_str(&text)
}

/// Serialize a scenario document in the file format, with every key explicit.
/// Re-parsing the output reproduces the document.
pub fn write_scenario(doc: &ScenarioDoc) -> String {
    let sc = &doc.scenario;
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "[tdd]").unwrap();
    writeln!(w, "pattern = {}", sc.tdd.pattern_string()).unwrap();
    writeln!(w, "periodicity_us = {}", sc.tdd.periodicity_us()).unwrap();
    writeln!(w, "mu = {}", sc.tdd.numerology().mu()).unwrap();
    writeln!(w, "special_dl_symbols = {}", sc.tdd.special_dl_symbols()).unwrap();
    writeln!(w, "special_ul_symbols = {}", sc.tdd.special_ul_symbols()).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "[rach]").unwrap();
    writeln!(w, "policy = {}", sc.rach.scheduler_policy.label()).unwrap();
    writeln!(w, "total_preambles = {}", sc.rach.total_preambles).unwrap();
    writeln!(w, "cbra_preambles = {}", sc.rach.cbra_preambles).unwrap();
    writeln!(w, "ra_response_window_slots = {}", sc.rach.ra_response_window_slots).unwrap();
    writeln!(w, "msg3_retx_window_frames = {}", sc.rach.msg3_retx_window_frames).unwrap();
    writeln!(w, "k0 = {}", sc.rach.k0).unwrap();
    writeln!(w, "k2 = {}", sc.rach.k2).unwrap();
    writeln!(w, "msg2_start = {}", sc.rach.msg2_sliv.start()).unwrap();
    writeln!(w, "msg2_length = {}", sc.rach.msg2_sliv.length()).unwrap();
    writeln!(w, "msg3_start = {}", sc.rach.msg3_sliv.start()).unwrap();
    writeln!(w, "msg3_length = {}", sc.rach.msg3_sliv.length()).unwrap();
    writeln!(w, "msg1_slot = {}", sc.rach.msg1_slot).unwrap();
    writeln!(w, "max_attempts = {}", sc.rach.max_attempts).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "[frontend]").unwrap();
    writeln!(w, "switching = {}", sc.policy.kind.label()).unwrap();
    writeln!(w, "settling_symbols = {}", sc.policy.settling_symbols).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "[sites]").unwrap();
    for site in &sc.sites {
        writeln!(
            w,
            "{} = {}, {}, {}, {}",
            site.name,
            site.distance_m,
            if site.los { "los" } else { "nlos" },
            site.obstruction_db,
            site.saturation_factor
        )
        .unwrap();
    }
    writeln!(w).unwrap();
    writeln!(w, "[channel]").unwrap();
    writeln!(w, "base_snr_db = {}", sc.channel.base_snr_db).unwrap();
    writeln!(w, "reference_distance_m = {}", sc.channel.reference_distance_m).unwrap();
    writeln!(w, "pathloss_exponent = {}", sc.channel.pathloss_exponent).unwrap();
    writeln!(w, "fading_sigma_db = {}", sc.channel.fading_sigma_db).unwrap();
    writeln!(w, "decode_threshold_db = {}", sc.channel.decode_threshold_db).unwrap();
    writeln!(w, "redundancy_gain_db = {}", sc.channel.redundancy_gain_db).unwrap();
    writeln!(w, "saturation_penalty_db = {}", sc.channel.saturation_penalty_db).unwrap();
    writeln!(w, "near_field_radius_m = {}", sc.channel.near_field_radius_m).unwrap();
    writeln!(w, "saturation_length_knee = {}", sc.channel.saturation_length_knee).unwrap();
    writeln!(w, "saturation_length_width = {}", sc.channel.saturation_length_width).unwrap();
    writeln!(w, "shadowing_sigma_db = {}", sc.channel.shadowing_sigma_db).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "[sim]").unwrap();
    writeln!(w, "trials = {}", sc.trials).unwrap();
    writeln!(w, "seed = {}", sc.seed).unwrap();
    writeln!(w, "ue_count_per_site = {}", sc.ue_count_per_site).unwrap();
    writeln!(w, "horizon_frames = {}", sc.horizon_frames).unwrap();
    writeln!(w).unwrap();
    writeln!(w, "[lint]").unwrap();
    writeln!(w, "msg2_min_length = {}", doc.lint.msg2_min_length).unwrap();
    writeln!(w, "msg3_min_length = {}", doc.lint.msg3_min_length).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn round_trip_presets() {
        for scenario in [
            presets::default_oai_scenario(),
            presets::full_slot_fix_scenario(),
            presets::full_slot_k2_7_scenario(),
            presets::sweep_scenario(),
        ] {
            let doc = ScenarioDoc { scenario, lint: LintOptions::default() };
            let text = write_scenario(&doc);
            let parsed = load_scenario_str(&text).expect("serialized scenario parses");
            assert_eq!(parsed, doc);
        }
    }

    #[test]
    fn periodicity_forms() {
        assert_eq!(parse_periodicity_ms("ms5"), Some(5_000));
        assert_eq!(parse_periodicity_ms("ms2.5"), Some(2_500));
        assert_eq!(parse_periodicity_ms("ms0.5"), Some(500));
        assert_eq!(parse_periodicity_ms("5"), None);
        assert_eq!(parse_periodicity_ms("ms0"), None);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = load_scenario_str("[tdd\npattern = D").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 1, .. }));
        let err = load_scenario_str("pattern = D").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 1, .. }));
        let err = load_scenario_str("[tdd]\npattern\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }));
        let err = load_scenario_str("[tdd]\nmu = 1\nmu = 2\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 3, .. }));
    }

    #[test]
    fn validation_aggregates_all_issues() {
        // special symbols overflow, unknown key, bad policy, missing sites
        let text = "\
[tdd]
pattern = DDDDDDDSUU
periodicity = ms5
mu = 1
special_dl_symbols = 20
special_ul_symbols = 4
bogus_key = 1

[rach]
policy = sometimes
k2 = 7

[frontend]
switching = slot-granular

[sim]
trials = 0
seed = 1
";
        let err = load_scenario_str(text).unwrap_err();
        let ScenarioError::Validation(issues) = err else {
            panic!("expected validation error, got {err:?}");
        };
        assert!(issues.iter().any(|i| i.contains("overflow")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("bogus_key")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("policy")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("at least one site")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("trials")), "{issues:?}");
        assert!(issues.len() >= 5);
    }

    #[test]
    fn sliv_indicator_form_is_accepted() {
        let text = "\
[tdd]
pattern = DDDDDDDSUU
periodicity = ms5
mu = 1
special_dl_symbols = 6
special_ul_symbols = 4

[rach]
policy = special-slot
k2 = 7
msg2_sliv = 57
msg3_start = 10
msg3_length = 4

[frontend]
switching = slot-granular

[sites]
ag_farm = 650.0, los, 0.0, 1.0

[sim]
trials = 10
seed = 1
";
        let doc = load_scenario_str(text).unwrap();
        assert_eq!(doc.scenario.rach.msg2_sliv.start(), 1);
        assert_eq!(doc.scenario.rach.msg2_sliv.length(), 5);
        // both forms at once are rejected
        let conflicted = text.replace("msg2_sliv = 57", "msg2_sliv = 57\nmsg2_start = 1");
        assert!(load_scenario_str(&conflicted).is_err());
    }

    #[test]
    fn unknown_section_is_rejected() {
        let base = write_scenario(&ScenarioDoc {
            scenario: presets::default_oai_scenario(),
            lint: LintOptions::default(),
        });
        let text = format!("{base}\n[plumbing]\nkey = 1\n");
        let err = load_scenario_str(&text).unwrap_err();
        let ScenarioError::Validation(issues) = err else { panic!("expected validation") };
        assert!(issues.iter().any(|i| i.contains("[plumbing]")));
    }
}
