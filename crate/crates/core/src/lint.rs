//! Static checks for scheduling/frontend mismatches in a scenario, before any
//! simulation runs.
//!
//! RACH001 (error): the scheduler places msg2 in a slot whose symbols the
//! frontend never amplifies, so the power amplifier drops DCI and RAR.
//! RACH002 (error): the msg3 grant lands on a non-uplink slot; the suggested
//! fix is the smallest k2 at or above the configured one that lands on a
//! full-uplink slot.
//! RACH003 (warning): msg2/msg3 allocations below the reliability floors.

use std::fmt;

use crate::frame_timing::{classify_msg3_slot, msg3_slot, slot_kind, Msg3LandingClass, SlotIndex};
use crate::frontend::build_timeline;
use crate::rach::{schedule_msg2, RaMessage, SchedulerPolicy};
use crate::sim::RachScenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    pub fn label(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

/// Machine-readable remediation attached to a finding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Suggestion {
    SetK2(u16),
    UseLastFullDownlinkPolicy,
    IncreaseLength { message: &'static str, min_length: u8 },
}

impl fmt::Display for Suggestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Suggestion::SetK2(k2) => write!(f, "set k2 = {k2}"),
            Suggestion::UseLastFullDownlinkPolicy => {
                write!(f, "schedule msg2 in a full DL slot (policy = last-full-dl)")
            }
            Suggestion::IncreaseLength { message, min_length } => {
                write!(f, "schedule {message} with at least {min_length} symbols")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    pub code: &'static str,
    pub message: String,
    pub suggestion: Option<Suggestion>,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {}", self.severity.label(), self.code, self.message)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (suggested fix: {s})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LintReport {
    pub findings: Vec<Finding>,
}

impl LintReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

/// Reliability floors for RACH003.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LintOptions {
    pub msg2_min_length: u8,
    pub msg3_min_length: u8,
}

impl Default for LintOptions {
    fn default() -> Self {
        // lengths below these needed 90%+ field reliability under obstruction
        Self { msg2_min_length: 8, msg3_min_length: 9 }
    }
}

pub fn lint(scenario: &RachScenario, opts: &LintOptions) -> LintReport {
    let mut findings = Vec::new();
    let tdd = &scenario.tdd;
    let rach = &scenario.rach;
    let timeline = build_timeline(tdd, scenario.policy);
    let msg1 = SlotIndex::new(0, rach.msg1_slot);

    match schedule_msg2(rach, tdd, msg1, 0) {
        Ok(schedule) => {
            let mut blocked: Vec<&RaMessage> = Vec::new();
            for msg in [&schedule.dci, &schedule.rar] {
                let in_period = tdd.slot_in_period(msg.tx_slot);
                if msg.symbols().any(|sym| !timeline.is_transmittable(in_period, sym)) {
                    blocked.push(msg);
                }
            }
            if !blocked.is_empty() {
                let parts: Vec<String> = blocked
                    .iter()
                    .map(|m| {
                        format!(
                            "{} in slot {} symbols {}..{}",
                            m.kind.label(),
                            m.tx_slot.slot,
                            m.start_symbol,
                            m.start_symbol + m.length - 1
                        )
                    })
                    .collect();
                let suggestion =
                    if rach.scheduler_policy == SchedulerPolicy::SpecialSlot {
                        Some(Suggestion::UseLastFullDownlinkPolicy)
                    } else {
                        None
                    };
                findings.push(Finding {
                    severity: Severity::Error,
                    code: "RACH001",
                    message: format!(
                        "{} scheduled where the {} frontend never transmits; the amplifier drops msg2",
                        parts.join(" and "),
                        scenario.policy.kind.label()
                    ),
                    suggestion,
                });
            }

            // msg3 grant landing
            let grant_slot = msg3_slot(schedule.rar.tx_slot, u32::from(rach.k2), tdd.numerology());
            let landing = classify_msg3_slot(tdd, grant_slot);
            if landing != Msg3LandingClass::Ok {
                let kind = slot_kind(tdd, grant_slot);
                let suggestion = suggest_k2(scenario, schedule.rar.tx_slot).map(Suggestion::SetK2);
                findings.push(Finding {
                    severity: Severity::Error,
                    code: "RACH002",
                    message: format!(
                        "k2={} puts the msg3 grant in slot {}, a {:?} slot, not full uplink",
                        rach.k2, grant_slot.slot, kind
                    ),
                    suggestion,
                });
            }

            if schedule.rar.length < opts.msg2_min_length {
                findings.push(Finding {
                    severity: Severity::Warning,
                    code: "RACH003",
                    message: format!(
                        "msg2 RAR occupies {} symbols, below the reliability floor of {}",
                        schedule.rar.length, opts.msg2_min_length
                    ),
                    suggestion: Some(Suggestion::IncreaseLength {
                        message: "msg2",
                        min_length: opts.msg2_min_length,
                    }),
                });
            }
        }
        Err(err) => {
            findings.push(Finding {
                severity: Severity::Error,
                code: "RACH001",
                message: format!("msg2 cannot be scheduled at all: {err}"),
                suggestion: None,
            });
        }
    }

    if rach.msg3_sliv.length() < opts.msg3_min_length {
        findings.push(Finding {
            severity: Severity::Warning,
            code: "RACH003",
            message: format!(
                "msg3 occupies {} symbols, below the reliability floor of {}",
                rach.msg3_sliv.length(),
                opts.msg3_min_length
            ),
            suggestion: Some(Suggestion::IncreaseLength {
                message: "msg3",
                min_length: opts.msg3_min_length,
            }),
        });
    }

    findings.sort_by(|a, b| (a.severity, a.code).cmp(&(b.severity, b.code)));
    LintReport { findings }
}

/// Smallest k2 at or above the configured value whose msg3 slot is full
/// uplink, mirroring the remedy of bumping the time-domain allocation entry.
pub fn suggest_k2(scenario: &RachScenario, msg2_end_slot: SlotIndex) -> Option<u16> {
    let tdd = &scenario.tdd;
    let period = tdd.period_slots() as u16;
    let start = scenario.rach.k2;
    (start..=start + 2 * period).find(|&k2| {
        let slot = msg3_slot(msg2_end_slot, u32::from(k2), tdd.numerology());
        classify_msg3_slot(tdd, slot) == Msg3LandingClass::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn default_scenario_trips_rach001() {
        let report = lint(&presets::default_oai_scenario(), &LintOptions::default());
        assert!(report.has_errors());
        let codes: Vec<&str> = report.findings.iter().map(|f| f.code).collect();
        assert!(codes.contains(&"RACH001"), "findings: {codes:?}");
        // sorted by (severity, code): every error precedes every warning
        let severities: Vec<Severity> = report.findings.iter().map(|f| f.severity).collect();
        let mut sorted = severities.clone();
        sorted.sort();
        assert_eq!(severities, sorted);
    }

    #[test]
    fn k2_7_fix_trips_rach002_with_suggestion() {
        let report = lint(&presets::full_slot_k2_7_scenario(), &LintOptions::default());
        let finding = report
            .findings
            .iter()
            .find(|f| f.code == "RACH002")
            .expect("RACH002 expected");
        assert_eq!(finding.severity, Severity::Error);
        assert_eq!(finding.suggestion, Some(Suggestion::SetK2(9)));
        assert!(finding.message.contains("slot 16"));
        // the full-slot placement itself is clean
        assert!(!report.findings.iter().any(|f| f.code == "RACH001"));
    }

    #[test]
    fn fixed_scenario_is_clean() {
        let report = lint(&presets::full_slot_fix_scenario(), &LintOptions::default());
        assert!(report.findings.is_empty(), "unexpected findings: {:?}", report.findings);
    }

    #[test]
    fn short_allocations_warn() {
        let mut scenario = presets::full_slot_fix_scenario();
        scenario.rach.msg2_sliv = crate::sliv::encode_sliv(1, 5).unwrap();
        scenario.rach.msg3_sliv = crate::sliv::encode_sliv(0, 4).unwrap();
        let report = lint(&scenario, &LintOptions::default());
        let warnings: Vec<_> =
            report.findings.iter().filter(|f| f.code == "RACH003").collect();
        assert_eq!(warnings.len(), 2);
        assert!(!report.has_errors());
    }

    #[test]
    fn naive_symbol_granular_fix_clears_rach001_only() {
        // symbol-granular switching makes the special-slot msg2 transmittable,
        // but the stock k2 still parks msg3 on the special slot
        let mut scenario = presets::default_oai_scenario();
        scenario.policy = crate::frontend::SwitchingPolicy::symbol_granular();
        let report = lint(&scenario, &LintOptions::default());
        assert!(!report.findings.iter().any(|f| f.code == "RACH001"));
        assert!(report.findings.iter().any(|f| f.code == "RACH002"));
    }
}
