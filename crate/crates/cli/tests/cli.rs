//! End-to-end tests of the rachsim binary: subcommand behavior, exit codes,
//! output files, flag overrides, and byte-identical reruns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rachsim"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn targets_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/calibration_targets.txt")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// The single run-stamped directory created under `base`.
fn only_subdir(base: &Path) -> PathBuf {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(base)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 1, "expected one run directory in {}", base.display());
    dirs.pop().unwrap()
}

#[test]
fn lint_exit_codes_follow_findings() {
    let out = bin().args(["lint"]).arg(scenario("default_oai.scenario")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("RACH001"), "{text}");

    let out = bin().args(["lint"]).arg(scenario("full_slot_k2_7.scenario")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("RACH002"), "{text}");
    assert!(text.contains("set k2 = 9"), "{text}");

    let out = bin().args(["lint"]).arg(scenario("full_slot_fix.scenario")).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("no findings"));
}

#[test]
fn lint_dump_timeline_is_golden() {
    let out = bin()
        .args(["lint", "--dump-timeline"])
        .arg(scenario("full_slot_fix.scenario"))
        .output()
        .unwrap();
    let text = stdout(&out);
    let expected: String = (0..10)
        .map(|slot| if slot <= 6 { "TTTTTTTTTTTTTT\n" } else { "RRRRRRRRRRRRRR\n" })
        .collect();
    assert!(text.starts_with(&expected), "{text}");
}

#[test]
fn flag_overrides_beat_file_values() {
    // the k2=7 scenario lints clean once --k2 9 overrides the file
    let out = bin()
        .args(["lint", "--k2", "9"])
        .arg(scenario("full_slot_k2_7.scenario"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn run_writes_outcomes_trace_and_echoed_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--trials", "20", "--out-dir"])
        .arg(tmp.path())
        .arg(scenario("full_slot_fix.scenario"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_subdir(tmp.path());
    let outcomes = std::fs::read_to_string(dir.join("outcomes.csv")).unwrap();
    assert!(outcomes.starts_with("trial,site,verdict,cycles,first_msg2,first_msg3\n"));
    assert_eq!(outcomes.lines().count(), 1 + 3 * 20); // header + sites x trials
    assert!(dir.join("trace_000000.txt").exists());
    // the echoed scenario reflects the override
    let echoed = std::fs::read_to_string(dir.join("effective.scenario")).unwrap();
    assert!(echoed.contains("trials = 20"), "{echoed}");
}

#[test]
fn run_is_byte_identical_across_reruns() {
    let run_once = || {
        let tmp = tempfile::tempdir().unwrap();
        let out = bin()
            .args(["run", "--trials", "30", "--traces", "--out-dir"])
            .arg(tmp.path())
            .arg(scenario("full_slot_fix.scenario"))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        let dir = only_subdir(tmp.path());
        let outcomes = std::fs::read(dir.join("outcomes.csv")).unwrap();
        let mut traces = Vec::new();
        for i in 0..90 {
            traces.push(std::fs::read(dir.join(format!("trace_{i:06}.txt"))).unwrap());
        }
        (outcomes, traces)
    };
    let (outcomes_a, traces_a) = run_once();
    let (outcomes_b, traces_b) = run_once();
    assert_eq!(outcomes_a, outcomes_b);
    assert_eq!(traces_a, traces_b);
}

#[test]
fn sweep_emits_csv_conditional_and_heatmaps() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "--msg", "2", "--trials", "15", "--out-dir"])
        .arg(tmp.path())
        .arg(scenario("sweep_sites.scenario"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_subdir(tmp.path());
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("site,msg,start,length,sliv,success_count,trials,probability\n"));
    // 50 type-A cells per site, three sites
    assert_eq!(csv.lines().count(), 1 + 3 * 50);
    assert!(dir.join("sweep_conditional.csv").exists());
    for site in ["grain_bin", "ag_farm", "biorefinery"] {
        let matrix = std::fs::read_to_string(dir.join(format!("heatmap_{site}.csv"))).unwrap();
        assert!(matrix.starts_with("l\\s,0,1,2,3\n"), "{matrix}");
        // 14 length rows follow the header
        assert_eq!(matrix.lines().count(), 15);
    }
}

#[test]
fn sweep_rerun_is_byte_identical() {
    let run_once = || {
        let tmp = tempfile::tempdir().unwrap();
        let out = bin()
            .args(["sweep", "--msg", "3", "--trials", "25", "--out-dir"])
            .arg(tmp.path())
            .arg(scenario("sweep_sites.scenario"))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(only_subdir(tmp.path()).join("sweep.csv")).unwrap()
    };
    assert_eq!(run_once(), run_once());
}

#[test]
fn invalid_scenario_reports_all_issues_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.scenario");
    std::fs::write(
        &path,
        "[tdd]\npattern = DDDDDDDSUU\nperiodicity = ms5\nmu = 1\nspecial_dl_symbols = 20\nspecial_ul_symbols = 4\n\n[rach]\npolicy = special-slot\nk2 = 7\n\n[frontend]\nswitching = slot-granular\n\n[sim]\ntrials = 0\nseed = 1\n",
    )
    .unwrap();
    let out = bin().arg("lint").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("overflow"), "{err}");
    assert!(err.contains("trials"), "{err}");
    assert!(err.contains("at least one site"), "{err}");
}

#[test]
fn out_dir_env_var_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--trials", "5"])
        .arg(scenario("full_slot_fix.scenario"))
        .env("RACHSIM_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = only_subdir(tmp.path());
    assert!(dir.join("outcomes.csv").exists());
}

#[test]
fn calibrate_fits_and_writes_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("calibrate")
        .arg(targets_file())
        .arg(scenario("sweep_sites.scenario"))
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("worst |residual|"), "{text}");
    let dir = only_subdir(tmp.path());
    assert!(dir.join("effective.scenario").exists());
}
