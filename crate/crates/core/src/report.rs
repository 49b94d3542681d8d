//! Byte-stable result emission: the canonical sweep CSV, the per-site
//! heatmap matrices for offline plotting, the conditional-statistics CSV, and
//! per-trial outcome tables. Fixed inputs always produce identical bytes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::sim::{SweepMessage, SweepResult, TrialOutcome, TrialVerdict};

/// Canonical sweep CSV: `site,msg,start,length,sliv,success_count,trials,probability`,
/// one row per cell in (start, length) order, success counts of the swept
/// message.
pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = String::from("site,msg,start,length,sliv,success_count,trials,probability\n");
    for result in results {
        for cell in &result.cells {
            let successes = match result.message {
                SweepMessage::Msg2 => cell.msg2_successes,
                SweepMessage::Msg3 => cell.msg3_successes,
            };
            let probability = f64::from(successes) / f64::from(cell.trials);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6}",
                result.site,
                result.message.number(),
                cell.start,
                cell.length,
                cell.sliv,
                successes,
                cell.trials,
                probability
            )
            .expect("string write cannot fail");
        }
    }
    out
}

/// Companion CSV carrying both message statistics per cell plus the msg3
/// probability conditional on msg2 success (empty when msg2 never succeeded).
pub fn sweep_conditional_csv(results: &[SweepResult]) -> String {
    let mut out = String::from(
        "site,msg,start,length,sliv,msg2_successes,msg3_successes,both_successes,trials,msg3_given_msg2\n",
    );
    for result in results {
        for cell in &result.cells {
            let conditional = if cell.msg2_successes > 0 {
                format!("{:.6}", f64::from(cell.both_successes) / f64::from(cell.msg2_successes))
            } else {
                String::new()
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                result.site,
                result.message.number(),
                cell.start,
                cell.length,
                cell.sliv,
                cell.msg2_successes,
                cell.msg3_successes,
                cell.both_successes,
                cell.trials,
                conditional
            )
            .expect("string write cannot fail");
        }
    }
    out
}

/// Probability matrix for one sweep: rows are lengths, columns are start
/// symbols, cells are the swept message's success probability. Grid cells
/// that do not exist for the mapping are left empty.
pub fn heatmap(result: &SweepResult) -> String {
    let starts: BTreeSet<u8> = result.cells.iter().map(|c| c.start).collect();
    let lengths: BTreeSet<u8> = result.cells.iter().map(|c| c.length).collect();
    let mut out = String::from("l\\s");
    for s in &starts {
        write!(out, ",{s}").expect("string write cannot fail");
    }
    out.push('\n');
    for l in &lengths {
        write!(out, "{l}").expect("string write cannot fail");
        for s in &starts {
            match result.cells.iter().find(|c| c.start == *s && c.length == *l) {
                Some(cell) => {
                    let successes = match result.message {
                        SweepMessage::Msg2 => cell.msg2_successes,
                        SweepMessage::Msg3 => cell.msg3_successes,
                    };
                    write!(out, ",{:.6}", f64::from(successes) / f64::from(cell.trials))
                        .expect("string write cannot fail");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Per-trial outcome table for `run`:
/// `trial,site,verdict,cycles,first_msg2,first_msg3`.
pub fn outcomes_csv(outcomes: &[TrialOutcome]) -> String {
    let mut out = String::from("trial,site,verdict,cycles,first_msg2,first_msg3\n");
    for (i, outcome) in outcomes.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i,
            outcome.site,
            outcome.final_verdict.label(),
            outcome.cycles_used,
            u8::from(outcome.first_cycle_msg2),
            u8::from(outcome.first_cycle_msg3)
        )
        .expect("string write cannot fail");
    }
    out
}

/// Connected-trial count, for quick summaries.
pub fn connected_count(outcomes: &[TrialOutcome]) -> usize {
    outcomes.iter().filter(|o| o.final_verdict == TrialVerdict::Connected).count()
}
