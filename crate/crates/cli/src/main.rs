//! Command-line front end: scenario ingestion, `run`/`sweep`/`lint`/
//! `calibrate` subcommands, CSV and plot-data emission.
//!
//! Every override flag has a scenario-file equivalent; flags win over file
//! values, and the effective merged scenario is echoed into the run directory
//! for provenance. Exit codes: 0 on success (for `lint`, only when no
//! error-severity findings exist), 1 for lint errors, 2 for operational
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rachsim_core::channel::{calibrate, parse_targets, CalibrationOptions};
use rachsim_core::frontend::{build_timeline, SwitchingKind, SwitchingPolicy};
use rachsim_core::lint::lint;
use rachsim_core::rach::SchedulerPolicy;
use rachsim_core::report::{
    connected_count, heatmap, outcomes_csv, sweep_conditional_csv, sweep_csv,
};
use rachsim_core::scenario::{load_scenario, write_scenario, ScenarioDoc};
use rachsim_core::sim::{run_all, run_sweep, SweepMessage, SweepSpec};
use rachsim_core::sliv::{decode_sliv, encode_sliv, enumerate_valid, Sliv};

#[derive(Parser)]
#[command(
    name = "rachsim",
    about = "Discrete-event simulator of the 5G NR random access procedure over TDD,\n\
             with an explicit PA/LNA switching model and a configuration linter",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the scenario and write per-trial outcomes and event traces.
    Run(RunArgs),
    /// Sweep start-symbol/length allocations for msg2 or msg3.
    Sweep(SweepArgs),
    /// Check a scenario for scheduling/frontend mismatches without running it.
    Lint(LintArgs),
    /// Fit the channel parameters to a calibration target file.
    Calibrate(CalibrateArgs),
}

/// Flag overrides for scenario fields. Every flag has a file equivalent.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// Monte Carlo trials per site
    #[arg(long)]
    trials: Option<usize>,
    /// Random stream seed
    #[arg(long)]
    seed: Option<u64>,
    /// msg3 slot offset entry
    #[arg(long)]
    k2: Option<u16>,
    /// DCI-to-PDSCH slot offset
    #[arg(long)]
    k0: Option<u16>,
    /// msg2 placement policy
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    /// frontend switching granularity
    #[arg(long, value_enum)]
    switching: Option<SwitchingArg>,
    /// msg2 allocation, "start,length" or an indicator value
    #[arg(long)]
    msg2_sliv: Option<String>,
    /// msg3 allocation, "start,length" or an indicator value
    #[arg(long)]
    msg3_sliv: Option<String>,
    /// simulation horizon in frames
    #[arg(long)]
    horizon_frames: Option<u32>,
    /// UEs per site
    #[arg(long)]
    ue_count: Option<usize>,
    /// RA attempts per trial
    #[arg(long)]
    max_attempts: Option<u8>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    SpecialSlot,
    LastFullDl,
}

#[derive(Clone, Copy, ValueEnum)]
enum SwitchingArg {
    SlotGranular,
    SymbolGranular,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Base directory for the run-stamped output directory
    /// [env: RACHSIM_OUT, default: ./out]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write an event trace for every trial instead of only the first
    #[arg(long)]
    traces: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file (the sweep base)
    scenario: PathBuf,
    /// Which message's allocation grid to sweep
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    msg: u8,
    /// Base directory for the run-stamped output directory
    /// [env: RACHSIM_OUT, default: ./out]
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct LintArgs {
    /// Scenario file
    scenario: PathBuf,
    /// Also print the per-slot amplifier timeline (one line per slot, T/R/G)
    #[arg(long)]
    dump_timeline: bool,
    /// msg2 length floor for RACH003
    #[arg(long)]
    msg2_floor: Option<u8>,
    /// msg3 length floor for RACH003
    #[arg(long)]
    msg3_floor: Option<u8>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibration target file: `site, msg_kind, length, probability` lines
    targets: PathBuf,
    /// Scenario file providing the sites and the initial channel parameters
    scenario: PathBuf,
    /// Worst tolerated per-target absolute residual
    #[arg(long, default_value_t = 0.2)]
    max_residual: f64,
    /// Base directory for the run-stamped output directory
    /// [env: RACHSIM_OUT, default: ./out]
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_allocation(text: &str) -> Result<Sliv> {
    if let Some((s, l)) = text.split_once(',') {
        let start: u8 = s.trim().parse().context("allocation start")?;
        let length: u8 = l.trim().parse().context("allocation length")?;
        return encode_sliv(start, length).map_err(Into::into);
    }
    let indicator: u16 = text.trim().parse().context("allocation indicator value")?;
    let (start, length) = decode_sliv(indicator)?;
    Ok(encode_sliv(start, length).expect("decoded pair is valid"))
}

fn apply_overrides(doc: &mut ScenarioDoc, ov: &Overrides) -> Result<()> {
    let sc = &mut doc.scenario;
    if let Some(trials) = ov.trials {
        sc.trials = trials;
    }
    if let Some(seed) = ov.seed {
        sc.seed = seed;
    }
    if let Some(k2) = ov.k2 {
        sc.rach.k2 = k2;
    }
    if let Some(k0) = ov.k0 {
        sc.rach.k0 = k0;
    }
    if let Some(policy) = ov.policy {
        sc.rach.scheduler_policy = match policy {
            PolicyArg::SpecialSlot => SchedulerPolicy::SpecialSlot,
            PolicyArg::LastFullDl => SchedulerPolicy::LastFullDownlinkSlot,
        };
    }
    if let Some(switching) = ov.switching {
        sc.policy = SwitchingPolicy {
            kind: match switching {
                SwitchingArg::SlotGranular => SwitchingKind::SlotGranular,
                SwitchingArg::SymbolGranular => SwitchingKind::SymbolGranular,
            },
            ..sc.policy
        };
    }
    if let Some(text) = &ov.msg2_sliv {
        sc.rach.msg2_sliv = parse_allocation(text)?;
    }
    if let Some(text) = &ov.msg3_sliv {
        sc.rach.msg3_sliv = parse_allocation(text)?;
    }
    if let Some(h) = ov.horizon_frames {
        sc.horizon_frames = h;
    }
    if let Some(n) = ov.ue_count {
        sc.ue_count_per_site = n;
    }
    if let Some(n) = ov.max_attempts {
        sc.rach.max_attempts = n;
    }
    if let Err(issues) = sc.validate() {
        bail!("scenario is invalid after applying overrides:\n{}", issues.join("\n"));
    }
    Ok(())
}

fn load(path: &Path, ov: &Overrides) -> Result<ScenarioDoc> {
    let mut doc =
        load_scenario(path).with_context(|| format!("loading {}", path.display()))?;
    apply_overrides(&mut doc, ov)?;
    Ok(doc)
}

/// Create `<base>/<label>-<epoch-seconds>[-<n>]`, base from --out-dir, the
/// RACHSIM_OUT environment variable, or ./out.
fn run_directory(base: Option<&Path>, label: &str) -> Result<PathBuf> {
    let base = match base {
        Some(dir) => dir.to_path_buf(),
        None => std::env::var_os("RACHSIM_OUT").map(PathBuf::from).unwrap_or_else(|| "out".into()),
    };
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    for n in 0u32.. {
        let name = if n == 0 {
            format!("{label}-{stamp}")
        } else {
            format!("{label}-{stamp}-{n}")
        };
        let dir = base.join(name);
        if !dir.exists() {
            std::fs::create_dir_all(&dir)
                .with_context(|| format!("creating {}", dir.display()))?;
            return Ok(dir);
        }
    }
    unreachable!("some suffix is always free")
}

fn echo_scenario(dir: &Path, doc: &ScenarioDoc) -> Result<()> {
    std::fs::write(dir.join("effective.scenario"), write_scenario(doc))
        .context("writing effective.scenario")
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let doc = load(&args.scenario, &args.overrides)?;
    let dir = run_directory(args.out_dir.as_deref(), "run")?;
    echo_scenario(&dir, &doc)?;
    let outcomes = run_all(&doc.scenario);
    std::fs::write(dir.join("outcomes.csv"), outcomes_csv(&outcomes))?;
    let trace_count = if args.traces { outcomes.len() } else { 1.min(outcomes.len()) };
    for (i, outcome) in outcomes.iter().take(trace_count).enumerate() {
        let mut text = outcome.trace.join("\n");
        text.push('\n');
        std::fs::write(dir.join(format!("trace_{i:06}.txt")), text)?;
    }
    let connected = connected_count(&outcomes);
    println!(
        "{} trials across {} site(s): {} connected, {} failed",
        outcomes.len(),
        doc.scenario.sites.len(),
        connected,
        outcomes.len() - connected
    );
    println!("results in {}", dir.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let doc = load(&args.scenario, &args.overrides)?;
    let message = if args.msg == 2 { SweepMessage::Msg2 } else { SweepMessage::Msg3 };
    let spec = SweepSpec {
        message,
        grid: enumerate_valid(message.mapping()),
        base: doc.scenario.clone(),
    };
    if let Err(issues) = spec.validate() {
        bail!("sweep spec is invalid:\n{}", issues.join("\n"));
    }
    let dir = run_directory(args.out_dir.as_deref(), &format!("sweep-msg{}", args.msg))?;
    echo_scenario(&dir, &doc)?;
    let results = run_sweep(&spec);
    std::fs::write(dir.join("sweep.csv"), sweep_csv(&results))?;
    std::fs::write(dir.join("sweep_conditional.csv"), sweep_conditional_csv(&results))?;
    for result in &results {
        std::fs::write(dir.join(format!("heatmap_{}.csv", result.site)), heatmap(result))?;
    }
    println!(
        "swept msg{} over {} allocations x {} trials for {} site(s)",
        args.msg,
        spec.grid.len(),
        doc.scenario.trials,
        results.len()
    );
    println!("results in {}", dir.display());
    Ok(())
}

fn cmd_lint(args: &LintArgs) -> Result<bool> {
    let doc = load(&args.scenario, &args.overrides)?;
    let mut opts = doc.lint;
    if let Some(floor) = args.msg2_floor {
        opts.msg2_min_length = floor;
    }
    if let Some(floor) = args.msg3_floor {
        opts.msg3_min_length = floor;
    }
    if args.dump_timeline {
        let timeline = build_timeline(&doc.scenario.tdd, doc.scenario.policy);
        print!("{}", timeline.dump());
    }
    let report = lint(&doc.scenario, &opts);
    if report.findings.is_empty() {
        println!("no findings");
    }
    for finding in &report.findings {
        println!("{finding}");
    }
    Ok(report.has_errors())
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.targets)
        .with_context(|| format!("reading {}", args.targets.display()))?;
    let targets = parse_targets(&text).map_err(anyhow::Error::msg)?;
    let doc = load(&args.scenario, &Overrides::default())?;
    let opts = CalibrationOptions { max_abs_residual: args.max_residual, ..Default::default() };
    let outcome = calibrate(&targets, &doc.scenario.sites, &doc.scenario.channel, &opts)?;
    println!(
        "fitted: decode_threshold_db = {:.4}, fading_sigma_db = {:.4}, redundancy_gain_db = {:.4}, saturation_penalty_db = {:.4}",
        outcome.params.decode_threshold_db,
        outcome.params.fading_sigma_db,
        outcome.params.redundancy_gain_db,
        outcome.params.saturation_penalty_db
    );
    println!(
        "worst |residual| = {:.4}, sum of squares = {:.6}",
        outcome.worst_abs_residual, outcome.sum_squared_error
    );
    for (target, residual) in targets.iter().zip(&outcome.residuals) {
        println!(
            "  {:<12} {} L={:<2} target {:.3}  model {:.3}  residual {:+.4}",
            target.site,
            target.message.label(),
            target.length,
            target.probability,
            target.probability + residual,
            residual
        );
    }
    let dir = run_directory(args.out_dir.as_deref(), "calibrate")?;
    let mut fitted_doc = doc;
    fitted_doc.scenario.channel = outcome.params;
    echo_scenario(&dir, &fitted_doc)?;
    println!("fitted scenario in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    // die quietly when piped into head & co. instead of panicking on EPIPE
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|()| ExitCode::SUCCESS),
        Command::Sweep(args) => cmd_sweep(args).map(|()| ExitCode::SUCCESS),
        Command::Lint(args) => cmd_lint(args).map(|errors| {
            if errors {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }),
        Command::Calibrate(args) => cmd_calibrate(args).map(|()| ExitCode::SUCCESS),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
