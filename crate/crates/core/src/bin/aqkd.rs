//! Command-line front end: run scenarios, sweep attacker strength, verify
//! transcripts, and show a small demo election.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 property
//! violation found by `verify`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aqkd_core::{
    adversary::AdversaryKind,
    harness::{emit_outputs, run_scenario, sweep_intercept, verify_transcript, Scenario},
    transcript::Transcript,
    Error,
};

#[derive(Parser)]
#[command(name = "aqkd", about = "Anonymous quantum key distribution and election simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Scenario file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Override the scenario adversary: a kind name (e.g. intercept-resend)
    /// or an inline JSON object.
    #[arg(long)]
    adversary: Option<String>,
    /// Directory for report.json and transcript.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and summarize the outcomes.
    Run(CommonOpts),
    /// Estimate eavesdropper detection rates across intercepted fractions.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Intercepted fractions to test.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        fractions: Vec<f64>,
    },
    /// Check a transcript's privacy, fairness, and tally properties.
    Verify {
        /// transcript.jsonl produced by `run`.
        transcript: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a tiny honest election and narrate it.
    Demo {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        quiet: bool,
    },
}

/// Accept either a bare kind name with sensible defaults or inline JSON.
fn parse_adversary(text: &str) -> Result<AdversaryKind, Error> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("bad adversary JSON: {e}")));
    }
    Ok(match text {
        "none" => AdversaryKind::None,
        "intercept-resend" => AdversaryKind::InterceptResend { fraction: 1.0 },
        "impersonate-voter" => AdversaryKind::ImpersonateVoter {
            knowledge: aqkd_core::adversary::Knowledge::XToken,
        },
        "replay-ballot" => AdversaryKind::ReplayBallot { cross_round: false },
        "forge-random-ballot" => AdversaryKind::ForgeRandomBallot { attempts: 100 },
        "dishonest-abstain" => AdversaryKind::DishonestAbstain {
            voter: 0,
            rounds_to_waste: 1,
        },
        "eavesdrop-classical" => AdversaryKind::EavesdropClassical,
        other => {
            return Err(Error::Config(format!(
                "unknown adversary {other:?}; pass a kind name or a JSON object"
            )))
        }
    })
}

fn load_scenario(opts: &CommonOpts) -> Result<Scenario, Error> {
    let mut scenario = Scenario::from_path(&opts.config)?;
    if let Some(seed) = opts.seed {
        scenario.seed = seed;
    }
    if let Some(trials) = opts.trials {
        scenario.trials = trials;
    }
    if let Some(text) = &opts.adversary {
        scenario.adversary = parse_adversary(text)?;
    }
    scenario.validate()?;
    Ok(scenario)
}

fn cmd_run(opts: &CommonOpts) -> Result<(), Error> {
    let scenario = load_scenario(opts)?;
    let (report, transcript) = run_scenario(&scenario)?;
    if let Some(dir) = &opts.out {
        emit_outputs(&report, &transcript, dir)?;
    }
    if !opts.quiet {
        let s = &report.summary;
        println!(
            "{}: {} trial(s), {} completed, {} with full inclusion",
            report.scenario.name, s.trials, s.completed, s.all_confirmed
        );
        println!(
            "  keys {}/{} agreed, ballots {} accepted / {} injected, {} detection event(s)",
            s.keys_agreed, s.keys_established, s.ballots_accepted, s.ballots_injected,
            s.detection_events
        );
        if let Some(rate) = s.mean_check_error {
            println!("  mean check error rate {rate:.4}");
        }
        for trial in &report.trials {
            let tally: Vec<String> = trial
                .outcome
                .tally
                .iter()
                .map(|(label, n)| format!("{label}={n}"))
                .collect();
            println!(
                "  trial {}: {} round(s), tally {}",
                trial.trial,
                trial.outcome.rounds,
                tally.join(" ")
            );
        }
    }
    Ok(())
}

fn cmd_sweep(common: &CommonOpts, fractions: &[f64]) -> Result<(), Error> {
    let scenario = load_scenario(common)?;
    let trials = common.trials.unwrap_or(scenario.trials.max(200));
    let points = sweep_intercept(
        scenario.election.m,
        &scenario.election.channel,
        scenario.election.effective_tolerance(),
        fractions,
        trials,
        scenario.seed,
    )?;
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("sweep.json"),
            serde_json::to_string_pretty(&points)?,
        )?;
    }
    if !common.quiet {
        println!(
            "detection rate vs intercepted fraction (m={}, {} trial(s) each):",
            scenario.election.m, trials
        );
        for p in &points {
            println!(
                "  fraction {:.2}: {:.4} [{:.4}, {:.4}] ({}/{})",
                p.fraction, p.estimate.rate, p.estimate.lower, p.estimate.upper,
                p.estimate.detections, p.estimate.trials
            );
        }
    }
    Ok(())
}

fn cmd_verify(path: &PathBuf, quiet: bool) -> Result<bool, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let transcript = Transcript::from_jsonl(&text)?;
    let violations = verify_transcript(&transcript);
    if !quiet {
        if violations.is_empty() {
            println!(
                "{}: {} record(s), all properties hold",
                path.display(),
                transcript.len()
            );
        } else {
            for v in &violations {
                eprintln!("violation: {v}");
            }
        }
    }
    Ok(violations.is_empty())
}

fn cmd_demo(seed: u64, quiet: bool) -> Result<(), Error> {
    let scenario = Scenario::from_json(&format!(
        r#"{{
            "name": "demo", "seed": {seed}, "trials": 1,
            "s": 64, "m": 128, "n_voters": 5,
            "candidates": ["alice", "bob-the-builder", "carol"]
        }}"#
    ))?;
    let (report, transcript) = run_scenario(&scenario)?;
    let outcome = &report.trials[0].outcome;
    if !quiet {
        println!("demo election: 5 voters, 3 candidates, seed {seed}");
        println!(
            "  key distribution: {} session(s), {} key(s) agreed",
            outcome.counters.keys_established, outcome.counters.keys_agreed
        );
        println!(
            "  voting: {} ballot(s) accepted over {} round(s)",
            outcome.counters.ballots_accepted, outcome.rounds
        );
        for (label, n) in &outcome.tally {
            println!("  {label}: {n}");
        }
        let confirmed = outcome
            .inclusion
            .iter()
            .filter(|r| r.result == aqkd_core::election::InclusionResult::Confirmed)
            .count();
        println!("  inclusion confirmed by {confirmed}/5 voters");
        let violations = verify_transcript(&transcript);
        println!(
            "  transcript: {} record(s), {} violation(s)",
            transcript.len(),
            violations.len()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(opts) => cmd_run(opts),
        Command::Sweep { common, fractions } => cmd_sweep(common, fractions),
        Command::Verify { transcript, quiet } => {
            return match cmd_verify(transcript, *quiet) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(2),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Demo { seed, quiet } => cmd_demo(*seed, *quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
