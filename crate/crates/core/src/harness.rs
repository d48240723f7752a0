//! Scenario runner: seeded multi-trial election runs, detection-rate
//! estimation with Wilson confidence intervals, independent transcript
//! verification, parameter sweeps, and file outputs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{
    adversary::{AdversaryKind, InterceptResend},
    aqkd::{run_check_phase, AbortReason, Verdict},
    election::{run_election, ElectionConfig, ElectionOutcome, FaultInjection},
    qubit::QuantumChannelConfig,
    transcript::{Channel, Record, Role, Transcript},
    trial_rng, Error, Result,
};

fn default_name() -> String {
    "scenario".to_string()
}
fn default_trials() -> u64 {
    1
}

/// One runnable experiment: an election configuration, an adversary, an
/// optional fault injection, and trial bookkeeping.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(flatten)]
    pub election: ElectionConfig,
    #[serde(default)]
    pub adversary: AdversaryKind,
    #[serde(default)]
    pub fault: Option<FaultInjection>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        self.election.validate()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub outcome: ElectionOutcome,
}

/// Aggregates across the trials of one scenario.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Summary {
    pub trials: u64,
    pub completed: u64,
    /// Trials where every successful voter confirmed inclusion.
    pub all_confirmed: u64,
    /// Trials where the tally equals the honest intended-cast multiset.
    pub tally_matches_cast: u64,
    pub detection_events: u64,
    pub keys_established: u64,
    pub keys_agreed: u64,
    pub ballots_accepted: u64,
    pub ballots_injected: u64,
    pub mean_check_error: Option<f64>,
    pub mean_sift_len: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub summary: Summary,
    pub trials: Vec<TrialReport>,
}

/// Run every trial of a scenario. Trial t draws its own generator from
/// (seed, t), so results are independent of trial order and count.
pub fn run_scenario(scenario: &Scenario) -> Result<(RunReport, Transcript)> {
    scenario.validate()?;
    let mut transcript = Transcript::new();
    let mut trials = Vec::with_capacity(scenario.trials as usize);
    let mut summary = Summary {
        trials: scenario.trials,
        ..Summary::default()
    };
    let mut err_sum = 0.0;
    let mut err_count = 0u64;
    let mut sift_sum = 0u64;
    let mut sift_count = 0u64;
    for trial in 0..scenario.trials {
        transcript.set_trial(trial);
        let mut rng = trial_rng(scenario.seed, trial);
        let outcome = run_election(
            &scenario.election,
            &scenario.adversary,
            scenario.fault.as_ref(),
            &mut transcript,
            &mut rng,
        )?;
        summary.completed += outcome.completed as u64;
        let all_confirmed = outcome
            .inclusion
            .iter()
            .all(|r| r.result != crate::election::InclusionResult::Missing);
        summary.all_confirmed += all_confirmed as u64;
        summary.tally_matches_cast += (outcome.tally == outcome.cast) as u64;
        summary.detection_events += outcome.counters.detection_events;
        summary.keys_established += outcome.counters.keys_established;
        summary.keys_agreed += outcome.counters.keys_agreed;
        summary.ballots_accepted += outcome.counters.ballots_accepted;
        summary.ballots_injected += outcome.counters.ballots_injected;
        err_sum += outcome.counters.check_error_sum;
        err_count += outcome.counters.check_error_count;
        sift_sum += outcome.counters.sift_len_sum;
        sift_count += outcome.counters.sift_len_count;
        trials.push(TrialReport { trial, outcome });
    }
    if err_count > 0 {
        summary.mean_check_error = Some(err_sum / err_count as f64);
    }
    if sift_count > 0 {
        summary.mean_sift_len = Some(sift_sum as f64 / sift_count as f64);
    }
    Ok((
        RunReport {
            scenario: scenario.clone(),
            summary,
            trials,
        },
        transcript,
    ))
}

/// Wilson score interval for a binomial proportion at confidence z.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectionEstimate {
    pub detections: u64,
    pub trials: u64,
    pub rate: f64,
    /// Wilson 95% interval.
    pub lower: f64,
    pub upper: f64,
}

/// Fraction of check phases that abort on a too-high error rate under an
/// intercept-resend attacker of the given strength.
pub fn estimate_detection_rate(
    m: usize,
    channel: &QuantumChannelConfig,
    fraction: f64,
    tolerance: f64,
    trials: u64,
    seed: u64,
) -> Result<DetectionEstimate> {
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let mut detections = 0u64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let mut eve = InterceptResend::new(fraction);
        let stats = run_check_phase(m, channel, Some(&mut eve), tolerance, &mut rng)?;
        if matches!(
            stats.verdict,
            Verdict::Abort(AbortReason::ErrorRateTooHigh { .. })
        ) {
            detections += 1;
        }
    }
    let (lower, upper) = wilson_interval(detections, trials, 1.96);
    Ok(DetectionEstimate {
        detections,
        trials,
        rate: detections as f64 / trials as f64,
        lower,
        upper,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub fraction: f64,
    pub estimate: DetectionEstimate,
}

/// Detection rate across intercepted fractions, same trial budget each.
pub fn sweep_intercept(
    m: usize,
    channel: &QuantumChannelConfig,
    tolerance: f64,
    fractions: &[f64],
    trials: u64,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    fractions
        .iter()
        .enumerate()
        .map(|(i, &fraction)| {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::Config(format!(
                    "sweep fraction must be in [0, 1], got {fraction}"
                )));
            }
            Ok(SweepPoint {
                fraction,
                estimate: estimate_detection_rate(
                    m,
                    channel,
                    fraction,
                    tolerance,
                    trials,
                    seed.wrapping_add(i as u64),
                )?,
            })
        })
        .collect()
}

fn payload_text(record: &Record) -> String {
    serde_json::to_string(&record.payload).unwrap_or_default()
}

/// Independent transcript checks. Returns a violation message per failed
/// property; an empty list means the transcript is consistent.
///
/// Checked: anonymous records carry no honest sender; no verified voter ID
/// appears on an anonymous channel; the published tally equals a recount of
/// the published ballot table; accepted-ballot announcements match the
/// tally size; no candidate string appears in the administrator's
/// authenticated traffic (skipped below 32-bit candidate strings, where
/// short hex collides by chance).
pub fn verify_transcript(transcript: &Transcript) -> Vec<String> {
    let mut violations = Vec::new();
    let records = transcript.records();

    // channel discipline
    for (i, r) in records.iter().enumerate() {
        if r.channel.is_anonymous() {
            if let Some(sender) = r.sender {
                if sender != Role::Adversary {
                    violations.push(format!(
                        "record {i} ({}): anonymous channel names sender {sender:?}",
                        r.step
                    ));
                }
            }
        }
    }

    // per-trial state gathered in one pass
    #[derive(Default)]
    struct TrialView {
        ids: Vec<String>,
        candidates: Vec<(String, String)>, // (hex value, label)
        s: usize,
        counted: u64,
        tally: Option<Value>,
        table3: Option<Value>,
    }
    let mut views: std::collections::BTreeMap<u64, TrialView> = Default::default();
    for r in records {
        let view = views.entry(r.trial).or_default();
        match r.step.as_str() {
            "election.verified" => {
                if let Some(ids) = r.payload["ids"].as_array() {
                    view.ids = ids
                        .iter()
                        .filter_map(|v| v.as_str().map(String::from))
                        .collect();
                }
            }
            "election.candidates" => {
                view.s = r.payload["s"].as_u64().unwrap_or(0) as usize;
                if let Some(entries) = r.payload["entries"].as_array() {
                    view.candidates = entries
                        .iter()
                        .filter_map(|e| {
                            Some((
                                e["value"]["hex"].as_str()?.to_string(),
                                e["label"].as_str()?.to_string(),
                            ))
                        })
                        .collect();
                }
            }
            "election.ballot-decision" => {
                if r.payload["result"].as_str() == Some("counted") {
                    view.counted += 1;
                }
            }
            "election.tally" => view.tally = Some(r.payload["counts"].clone()),
            "election.table3" => view.table3 = Some(r.payload.clone()),
            _ => {}
        }
    }

    for (trial, view) in &views {
        // ballot secrecy: no voter ID on an anonymous channel
        for (i, r) in records.iter().enumerate() {
            if r.trial != *trial || !r.channel.is_anonymous() {
                continue;
            }
            let text = payload_text(r);
            for id in &view.ids {
                if text.contains(id.as_str()) {
                    violations.push(format!(
                        "record {i} ({}): voter ID {id} on an anonymous channel",
                        r.step
                    ));
                }
            }
        }

        // verifiability: recount the public ballot table
        let (Some(tally), Some(table3)) = (&view.tally, &view.table3) else {
            violations.push(format!("trial {trial}: tally or ballot table never published"));
            continue;
        };
        let mut recount: std::collections::BTreeMap<&str, u64> = Default::default();
        let mut rows = 0u64;
        if let Some(entries) = table3["rows"].as_array() {
            for row in entries {
                rows += 1;
                let hex = row[0]["hex"].as_str().unwrap_or("");
                match view.candidates.iter().find(|(v, _)| v == hex) {
                    Some((_, label)) => *recount.entry(label.as_str()).or_insert(0) += 1,
                    None => violations.push(format!(
                        "trial {trial}: published ballot {hex} is not a candidate"
                    )),
                }
            }
        }
        let tally_total: u64 = tally
            .as_object()
            .map(|m| m.values().filter_map(|v| v.as_u64()).sum())
            .unwrap_or(0);
        for (label, count) in &recount {
            if tally[*label].as_u64() != Some(*count) {
                violations.push(format!(
                    "trial {trial}: tally says {:?} for {label}, recount says {count}",
                    tally[*label]
                ));
            }
        }
        if tally_total != rows {
            violations.push(format!(
                "trial {trial}: tally total {tally_total} != {rows} published ballots"
            ));
        }
        if view.counted != rows {
            violations.push(format!(
                "trial {trial}: {} ballots announced counted, {rows} published",
                view.counted
            ));
        }

        // fairness: the administrator's authenticated traffic never carries
        // a candidate string before or after publication
        if view.s >= 32 {
            for (i, r) in records.iter().enumerate() {
                if r.trial != *trial
                    || r.channel != Channel::Authenticated
                    || !(r.sender == Some(Role::Bob) || r.recipient == Some(Role::Bob))
                {
                    continue;
                }
                let text = payload_text(r);
                for (hex, label) in &view.candidates {
                    if text.contains(hex.as_str()) {
                        violations.push(format!(
                            "record {i} ({}): candidate {label} visible to the administrator",
                            r.step
                        ));
                    }
                }
            }
        }
    }
    violations
}

/// Write `report.json` and `transcript.jsonl` under `dir`. Writes go to
/// temporary names first so a failure never leaves a partial file behind.
pub fn emit_outputs(report: &RunReport, transcript: &Transcript, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let write_atomic = |name: &str, contents: &str| -> Result<()> {
        let tmp = dir.join(format!(".{name}.tmp"));
        let target = dir.join(name);
        if let Err(e) = fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, &target)) {
            let _ = fs::remove_file(&tmp);
            return Err(e.into());
        }
        Ok(())
    };
    write_atomic("report.json", &serde_json::to_string_pretty(report)?)?;
    write_atomic("transcript.jsonl", &transcript.to_jsonl()?)?;
    Ok(())
}
