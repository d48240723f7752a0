//! The four-phase election: candidate publication, voter authentication,
//! per-voter anonymous key distribution, and anonymous ballot casting with
//! verification sets, re-vote rounds, tally, and the public ballot table.
//!
//! The administrator Bob and the counter Charlie are semi-honest by
//! default; malicious behaviors exist only as explicit adversary kinds and
//! fault injections. The anonymous classical channel is a per-phase message
//! pool delivered in uniformly shuffled order with sender identity
//! stripped.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{
    adversary::{impersonate_attempt, AdversaryKind, InterceptResend, Knowledge},
    aqkd::{
        run_session, run_session_hooked, AbortReason, AqkdParams, Bob, Charlie, ConfirmOutcome,
        SessionOutcome, SessionStats,
    },
    bits::BitString,
    credentials::{AqkdCredential, VoterCredential},
    ecc::RepetitionCode,
    otp::{otp_decrypt, otp_encrypt},
    qubit::QuantumChannelConfig,
    transcript::{Channel, Role, Transcript},
    Error, Result, SimRng,
};

fn default_ecc_r() -> usize {
    5
}
fn default_retry_cap() -> u32 {
    3
}
fn default_session_retry_cap() -> u32 {
    3
}
fn default_round_cap() -> u32 {
    8
}
fn default_true() -> bool {
    true
}

/// Election-level configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElectionConfig {
    /// Candidate string length in bits.
    pub s: usize,
    /// Key distribution security parameter (first attempt; retries after an
    /// insufficient sift double it).
    pub m: usize,
    pub n_voters: usize,
    pub candidates: Vec<String>,
    /// Intended choice per voter; empty means round-robin over candidates.
    #[serde(default)]
    pub choices: Vec<String>,
    #[serde(default)]
    pub channel: QuantumChannelConfig,
    #[serde(default = "default_ecc_r")]
    pub ecc_r: usize,
    /// Check-error tolerance; default is 0.05 on a noiseless channel and
    /// flip_prob + 0.03 otherwise.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Failed voting rounds a voter may accumulate before being flagged
    /// disruptive and excluded.
    #[serde(default = "default_retry_cap")]
    pub retry_cap: u32,
    /// Key distribution attempts per voter per round.
    #[serde(default = "default_session_retry_cap")]
    pub session_retry_cap: u32,
    #[serde(default = "default_round_cap")]
    pub round_cap: u32,
    /// Require |candidates| / 2^s <= 2^-40. Disable only for small-s tests.
    #[serde(default = "default_true")]
    pub enforce_candidate_gate: bool,
}

impl ElectionConfig {
    pub fn effective_tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(if self.channel.flip_prob == 0.0 {
            0.05
        } else {
            self.channel.flip_prob + 0.03
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 || self.m == 0 {
            return Err(Error::Config("s and m must be positive".into()));
        }
        if self.candidates.is_empty() {
            return Err(Error::Config("candidate list is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for label in &self.candidates {
            if !seen.insert(label) {
                return Err(Error::Config(format!("duplicate candidate label {label:?}")));
            }
        }
        if !self.choices.is_empty() {
            if self.choices.len() != self.n_voters {
                return Err(Error::Config(
                    "choices must be empty or one per voter".into(),
                ));
            }
            for c in &self.choices {
                if !self.candidates.contains(c) {
                    return Err(Error::Config(format!("unknown choice {c:?}")));
                }
            }
        }
        if self.ecc_r < 3 || self.ecc_r % 2 == 0 {
            return Err(Error::Config("ecc_r must be odd and >= 3".into()));
        }
        if let Some(t) = self.tolerance {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config("tolerance must be in [0, 1]".into()));
            }
        }
        self.channel.validate()
    }
}

/// Published candidate set: a map from s-bit strings to labels. Valid
/// ballots are exactly the values of this map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    s: usize,
    entries: Vec<(BitString, String)>,
}

impl CandidateSet {
    /// Sample distinct s-bit strings for the labels. With the gate
    /// enforced, a random s-bit string is a valid ballot with probability
    /// at most 2^-40.
    pub fn sample(
        labels: &[String],
        s: usize,
        enforce_gate: bool,
        rng: &mut SimRng,
        resamples: &mut u64,
    ) -> Result<Self> {
        if enforce_gate {
            if s < 64 {
                return Err(Error::Config(format!(
                    "candidate strings of {s} bits are too guessable; need s >= 64"
                )));
            }
            if (labels.len() as f64).log2() > s as f64 - 40.0 {
                return Err(Error::Config(format!(
                    "{} candidates at s = {s} violate the negligibility gate",
                    labels.len()
                )));
            }
        }
        let mut used = BTreeSet::new();
        let mut entries = Vec::with_capacity(labels.len());
        for label in labels {
            loop {
                let value = BitString::random(s, rng);
                if used.insert(value.clone()) {
                    entries.push((value, label.clone()));
                    break;
                }
                *resamples += 1;
            }
        }
        Ok(Self { s, entries })
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn entries(&self) -> &[(BitString, String)] {
        &self.entries
    }

    pub fn value_of(&self, label: &str) -> Option<&BitString> {
        self.entries
            .iter()
            .find(|(_, l)| l == label)
            .map(|(v, _)| v)
    }

    pub fn label_of(&self, value: &BitString) -> Option<&str> {
        self.entries
            .iter()
            .find(|(v, _)| v == value)
            .map(|(_, l)| l.as_str())
    }

    pub fn contains(&self, value: &BitString) -> bool {
        self.label_of(value).is_some()
    }

    /// An s-bit string that is not a valid ballot.
    pub fn random_invalid(&self, rng: &mut SimRng) -> BitString {
        loop {
            let value = BitString::random(self.s, rng);
            if !self.contains(&value) {
                return value;
            }
        }
    }
}

/// A row of the administrator's verified-voter table (Table 1).
#[derive(Clone, Debug, Serialize)]
pub struct VerifiedRow {
    pub entry: usize,
    pub id: String,
    pub a: BitString,
    pub b: BitString,
    pub c: BitString,
}

/// A row of the counter's key-string table (Table 2).
#[derive(Clone, Debug, Serialize)]
pub struct KeyRow {
    pub left: BitString,
    pub right: BitString,
    pub remark: BitString,
    pub accepted: bool,
}

/// Table 2: the counter's key strings, keyed by the left key half.
#[derive(Clone, Debug, Default, Serialize)]
pub struct KeyTable {
    rows: Vec<KeyRow>,
}

impl KeyTable {
    pub fn rows(&self) -> &[KeyRow] {
        &self.rows
    }

    pub fn find(&self, left: &BitString) -> Option<&KeyRow> {
        self.rows.iter().find(|r| &r.left == left)
    }

    fn find_mut(&mut self, left: &BitString) -> Option<&mut KeyRow> {
        self.rows.iter_mut().find(|r| &r.left == left)
    }

    fn insert(&mut self, row: KeyRow) -> Result<()> {
        if self.find(&row.left).is_some() {
            return Err(Error::ProtocolViolation("key-table collision".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Delete rows whose key was never accepted; returns how many.
    fn prune_unaccepted(&mut self) -> usize {
        let before = self.rows.len();
        self.rows.retain(|r| r.accepted);
        before - self.rows.len()
    }
}

/// Public ballot table (Table 3): accepted (ballot, left key half) pairs in
/// shuffled order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallotTable {
    pub rows: Vec<(BitString, BitString)>,
}

impl BallotTable {
    pub fn contains(&self, key_left: &BitString, ballot: &BitString) -> bool {
        self.rows
            .iter()
            .any(|(v, k)| v == ballot && k == key_left)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectionPhase {
    Setup,
    Authentication,
    KeyDistribution,
    Voting,
    Published,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallotRejectReason {
    UnknownKey,
    Replay,
    InvalidBallot,
}

impl BallotRejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            BallotRejectReason::UnknownKey => "unknown-key",
            BallotRejectReason::Replay => "replay",
            BallotRejectReason::InvalidBallot => "invalid-ballot",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BallotDecision {
    Counted,
    Rejected(BallotRejectReason),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuthRejectReason {
    AlreadyApplied,
    UnknownVoter,
    BadToken,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuthDecision {
    Accepted { entry: usize },
    Rejected(AuthRejectReason),
}

/// How a voter behaves in the voting phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VoterBehavior {
    #[default]
    Honest,
    /// Completes key distribution but casts nothing for the first `rounds`
    /// rounds.
    Abstain { rounds: u32 },
    /// Casts an invalid candidate string for the first `rounds` rounds.
    InvalidBallot { rounds: u32 },
}

/// Deliberate misbehavior of a semi-honest party, for detection tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FaultInjection {
    /// The counter silently drops one voter's accepted ballot before
    /// publication.
    DropBallot { voter: usize },
}

/// One message on the anonymous ballot channel. `adversarial` is a
/// simulator-side annotation invisible to the parties.
#[derive(Clone, Debug)]
pub struct BallotMessage {
    pub key_left: BitString,
    pub cipher: BitString,
    pub adversarial: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InclusionResult {
    Confirmed,
    Missing,
    DidNotCast,
}

#[derive(Debug)]
pub struct Voter {
    pub id: String,
    pub credential: VoterCredential,
    pub choice: String,
    pub behavior: VoterBehavior,
    /// The reconciled 2s-bit key for the current round, once established.
    pub key: Option<BitString>,
    /// The voter's private (left key half, ballot) pair from the last
    /// honest cast; the only join between identity and ballot anywhere.
    pub cast_record: Option<(BitString, BitString)>,
    pub voted: bool,
    pub failed_rounds: u32,
    pub flagged: bool,
    pub aqkd_failed: bool,
    /// A full-knowledge impersonator consumed this voter's credentials.
    pub hijacked: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ElectionCounters {
    pub ballots_accepted: u64,
    pub ballots_rejected: BTreeMap<String, u64>,
    pub ballots_injected: u64,
    pub session_aborts: u64,
    /// Aborts whose reason was an error rate above tolerance.
    pub detection_events: u64,
    pub session_retries: u64,
    pub session_rejections: u64,
    pub candidate_resamples: u64,
    pub key_collisions: u64,
    pub impersonation_attempts: u64,
    pub impersonations_accepted: u64,
    pub eavesdropped_messages: u64,
    pub check_error_sum: f64,
    pub check_error_count: u64,
    pub sift_len_sum: u64,
    pub sift_len_count: u64,
    pub keys_agreed: u64,
    pub keys_established: u64,
}

impl ElectionCounters {
    fn note_stats(&mut self, stats: &SessionStats) {
        if let Some(rate) = stats.check_error_rate {
            self.check_error_sum += rate;
            self.check_error_count += 1;
        }
        if stats.sift_len > 0 {
            self.sift_len_sum += stats.sift_len as u64;
            self.sift_len_count += 1;
        }
    }

    fn note_rejection(&mut self, reason: BallotRejectReason) {
        *self
            .ballots_rejected
            .entry(reason.as_str().to_string())
            .or_insert(0) += 1;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InclusionRow {
    pub id: String,
    pub result: InclusionResult,
}

/// Everything a finished election reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ElectionOutcome {
    pub completed: bool,
    pub rounds: u32,
    pub tally: BTreeMap<String, u64>,
    /// Intended-choice multiset of the voters who voted successfully.
    pub cast: BTreeMap<String, u64>,
    pub table3: BallotTable,
    pub verification_set_sizes: Vec<usize>,
    pub inclusion: Vec<InclusionRow>,
    pub flagged: Vec<String>,
    pub counters: ElectionCounters,
}

pub struct Election {
    pub cfg: ElectionConfig,
    pub phase: ElectionPhase,
    pub round: u32,
    pub candidates: CandidateSet,
    pub voters: Vec<Voter>,
    verified: Vec<VerifiedRow>,
    applied: BTreeSet<String>,
    bob: Bob,
    charlie: Charlie,
    pub key_table: KeyTable,
    /// Accepted (ballot, left key half) pairs, in acceptance order.
    retained: Vec<(BitString, BitString)>,
    table3: Option<BallotTable>,
    verification_set_sizes: Vec<usize>,
    pub counters: ElectionCounters,
}

impl Election {
    /// Initial phase: publish the candidate set and issue one credential
    /// per eligible voter.
    pub fn setup(
        cfg: ElectionConfig,
        transcript: &mut Transcript,
        rng: &mut SimRng,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut resamples = 0u64;
        let candidates = CandidateSet::sample(
            &cfg.candidates,
            cfg.s,
            cfg.enforce_candidate_gate,
            rng,
            &mut resamples,
        )?;
        transcript.record(
            "election.candidates",
            Channel::PublicBroadcast,
            Some(Role::Bob),
            None,
            json!({
                "s": cfg.s,
                "entries": candidates
                    .entries()
                    .iter()
                    .map(|(v, l)| json!({ "label": l, "value": v }))
                    .collect::<Vec<_>>(),
            }),
        );
        let mut voters = Vec::with_capacity(cfg.n_voters);
        for j in 0..cfg.n_voters {
            let credential = VoterCredential::generate(cfg.m, rng)?;
            let choice = if cfg.choices.is_empty() {
                cfg.candidates[j % cfg.candidates.len()].clone()
            } else {
                cfg.choices[j].clone()
            };
            voters.push(Voter {
                id: format!("voter-{j:03}"),
                credential,
                choice,
                behavior: VoterBehavior::Honest,
                key: None,
                cast_record: None,
                voted: false,
                failed_rounds: 0,
                flagged: false,
                aqkd_failed: false,
                hijacked: false,
            });
        }
        let mut counters = ElectionCounters::default();
        counters.candidate_resamples = resamples;
        Ok(Self {
            cfg,
            phase: ElectionPhase::Authentication,
            round: 0,
            candidates,
            voters,
            verified: Vec::new(),
            applied: BTreeSet::new(),
            bob: Bob::new(),
            charlie: Charlie::new(),
            key_table: KeyTable::default(),
            retained: Vec::new(),
            table3: None,
            verification_set_sizes: Vec::new(),
            counters,
        })
    }

    /// Authentication phase: one voting request. Repeat applications and
    /// wrong tokens are rejected.
    pub fn authenticate(
        &mut self,
        id: &str,
        k: &BitString,
        transcript: &mut Transcript,
    ) -> AuthDecision {
        transcript.record(
            "election.auth-request",
            Channel::Authenticated,
            Some(Role::User),
            Some(Role::Bob),
            json!({ "id": id }),
        );
        let decision = if self.applied.contains(id) {
            AuthDecision::Rejected(AuthRejectReason::AlreadyApplied)
        } else {
            match self.voters.iter().find(|v| v.id == id) {
                None => AuthDecision::Rejected(AuthRejectReason::UnknownVoter),
                Some(v) if &v.credential.k != k => {
                    AuthDecision::Rejected(AuthRejectReason::BadToken)
                }
                Some(v) => {
                    let entry = self.verified.len() + 1;
                    self.verified.push(VerifiedRow {
                        entry,
                        id: id.to_string(),
                        a: v.credential.a.clone(),
                        b: v.credential.b.clone(),
                        c: v.credential.c.clone(),
                    });
                    self.applied.insert(id.to_string());
                    AuthDecision::Accepted { entry }
                }
            }
        };
        let payload = match decision {
            AuthDecision::Accepted { entry } => json!({ "accepted": true, "entry": entry }),
            AuthDecision::Rejected(reason) => json!({ "accepted": false, "reason": reason }),
        };
        transcript.record(
            "election.auth-decision",
            Channel::Authenticated,
            Some(Role::Bob),
            Some(Role::User),
            payload,
        );
        decision
    }

    /// Close the authentication phase: announce n and the verified IDs.
    pub fn finish_authentication(&mut self, transcript: &mut Transcript) {
        let ids: Vec<&str> = self.verified.iter().map(|r| r.id.as_str()).collect();
        transcript.record(
            "election.verified",
            Channel::PublicBroadcast,
            Some(Role::Bob),
            None,
            json!({ "n": self.verified.len(), "ids": ids }),
        );
        self.phase = ElectionPhase::KeyDistribution;
    }

    pub fn authenticate_all(&mut self, transcript: &mut Transcript) -> Result<()> {
        if self.phase != ElectionPhase::Authentication {
            return Err(Error::ProtocolViolation(
                "authentication outside its phase".into(),
            ));
        }
        let requests: Vec<(String, BitString)> = self
            .voters
            .iter()
            .map(|v| (v.id.clone(), v.credential.k.clone()))
            .collect();
        for (id, k) in requests {
            match self.authenticate(&id, &k, transcript) {
                AuthDecision::Accepted { .. } => {}
                AuthDecision::Rejected(reason) => {
                    return Err(Error::ProtocolViolation(format!(
                        "honest authentication of {id} rejected: {reason:?}"
                    )))
                }
            }
        }
        self.finish_authentication(transcript);
        Ok(())
    }

    pub fn verified_rows(&self) -> &[VerifiedRow] {
        &self.verified
    }

    /// Voters still owed a successful vote this round.
    pub fn pending_voters(&self) -> Vec<usize> {
        self.voters
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.voted && !v.flagged && !v.aqkd_failed)
            .map(|(i, _)| i)
            .collect()
    }

    fn update_verified_row(&mut self, idx: usize) {
        let v = &self.voters[idx];
        if let Some(row) = self.verified.iter_mut().find(|r| r.id == v.id) {
            row.a = v.credential.a.clone();
            row.b = v.credential.b.clone();
            row.c = v.credential.c.clone();
        }
    }

    /// One voter's key distribution with the retry policy: fresh
    /// credentials per attempt, doubled m after an insufficient sift,
    /// forced retry on a left-half key collision.
    fn distribute_key_for(
        &mut self,
        idx: usize,
        adversary: &AdversaryKind,
        hook_voter: bool,
        transcript: &mut Transcript,
        rng: &mut SimRng,
    ) -> Result<bool> {
        let mut attempt_m = self.voters[idx].credential.m();
        for attempt in 0..=self.cfg.session_retry_cap {
            if attempt > 0 {
                self.counters.session_retries += 1;
                self.voters[idx].credential = VoterCredential::generate(attempt_m, rng)?;
                self.update_verified_row(idx);
                transcript.record(
                    "election.recredential",
                    Channel::Authenticated,
                    Some(Role::Bob),
                    Some(Role::User),
                    json!({ "id": self.voters[idx].id, "m": attempt_m }),
                );
            }
            let voter = &self.voters[idx];
            let cred = AqkdCredential::from_parts(
                BitString::random(attempt_m, rng),
                voter.credential.a.clone(),
                voter.credential.b.clone(),
                voter.credential.c.clone(),
            )?;
            self.bob.register(&cred);
            let params = AqkdParams {
                m: attempt_m,
                key_bits: 2 * self.cfg.s,
                ecc: RepetitionCode::new(self.cfg.ecc_r)?,
                tolerance: self.cfg.effective_tolerance(),
                channel: self.cfg.channel,
            };
            let mut eve;
            let interceptor: Option<&mut dyn crate::qubit::Interceptor> = match adversary {
                AdversaryKind::InterceptResend { fraction } => {
                    eve = InterceptResend::new(*fraction);
                    Some(&mut eve)
                }
                _ => None,
            };
            let outcome = if hook_voter && attempt == 0 {
                // an impersonator races this voter's confirmation
                let knowledge = match adversary {
                    AdversaryKind::ImpersonateVoter { knowledge } => *knowledge,
                    _ => Knowledge::None,
                };
                let channel = self.cfg.channel;
                let target = cred.clone();
                let counters = &mut self.counters;
                let mut hook = move |charlie: &mut Charlie,
                                     transcript: &mut Transcript,
                                     rng: &mut SimRng|
                      -> Result<()> {
                    counters.impersonation_attempts += 1;
                    let outcome =
                        impersonate_attempt(charlie, knowledge, &target, &channel, transcript, rng)?;
                    if matches!(outcome, ConfirmOutcome::Accepted { .. }) {
                        counters.impersonations_accepted += 1;
                    }
                    Ok(())
                };
                run_session_hooked(
                    &mut self.bob,
                    &mut self.charlie,
                    &cred,
                    &params,
                    interceptor,
                    Some(&mut hook),
                    transcript,
                    rng,
                )?
            } else {
                run_session(
                    &mut self.bob,
                    &mut self.charlie,
                    &cred,
                    &params,
                    interceptor,
                    transcript,
                    rng,
                )?
            };
            match outcome {
                SessionOutcome::Completed {
                    user_key,
                    charlie_key,
                    stats,
                } => {
                    self.counters.note_stats(&stats);
                    self.counters.keys_established += 1;
                    if user_key == charlie_key {
                        self.counters.keys_agreed += 1;
                    }
                    let s = self.cfg.s;
                    let row = KeyRow {
                        left: charlie_key.prefix(s),
                        right: charlie_key.slice(s, 2 * s),
                        remark: cred.x.clone(),
                        accepted: false,
                    };
                    if self.key_table.insert(row).is_err() {
                        // left-half collision: force a retry of this session
                        self.counters.key_collisions += 1;
                        continue;
                    }
                    self.voters[idx].key = Some(user_key);
                    return Ok(true);
                }
                SessionOutcome::Aborted { reason, stats } => {
                    self.counters.note_stats(&stats);
                    self.counters.session_aborts += 1;
                    match reason {
                        AbortReason::ErrorRateTooHigh { .. } => {
                            self.counters.detection_events += 1;
                        }
                        AbortReason::InsufficientSift { .. } => {
                            attempt_m *= 2;
                        }
                        _ => {}
                    }
                }
                SessionOutcome::Rejected { .. } => {
                    self.counters.session_rejections += 1;
                }
            }
        }
        self.voters[idx].aqkd_failed = true;
        Ok(false)
    }

    /// Key distribution phase for every pending voter. A full-knowledge
    /// impersonator hijacks voter 0's slot: the session runs with the
    /// voter's stolen material, but the key lands with the adversary.
    pub fn run_key_distribution(
        &mut self,
        adversary: &AdversaryKind,
        hijacked_key: &mut Option<BitString>,
        transcript: &mut Transcript,
        rng: &mut SimRng,
    ) -> Result<()> {
        self.phase = ElectionPhase::KeyDistribution;
        let pending = self.pending_voters();
        for (slot, idx) in pending.iter().copied().enumerate() {
            let is_target = slot == 0 && self.round == 1;
            if is_target {
                if let AdversaryKind::ImpersonateVoter {
                    knowledge: Knowledge::Full,
                } = adversary
                {
                    // the adversary runs the session in the voter's place
                    self.counters.impersonation_attempts += 1;
                    if self.distribute_key_for(idx, &AdversaryKind::None, false, transcript, rng)? {
                        self.counters.impersonations_accepted += 1;
                        *hijacked_key = self.voters[idx].key.take();
                        self.voters[idx].hijacked = true;
                    }
                    continue;
                }
            }
            let hook = is_target
                && matches!(
                    adversary,
                    AdversaryKind::ImpersonateVoter {
                        knowledge: Knowledge::None | Knowledge::XToken
                    }
                );
            self.distribute_key_for(idx, adversary, hook, transcript, rng)?;
        }
        transcript.record(
            "election.key-distribution-complete",
            Channel::PublicBroadcast,
            Some(Role::Charlie),
            None,
            json!({ "sessions": self.key_table.rows().len() }),
        );
        self.phase = ElectionPhase::Voting;
        Ok(())
    }

    /// Build one voter's ballot message without sending it.
    pub fn cast_ballot(&mut self, idx: usize, rng: &mut SimRng) -> Result<Option<BallotMessage>> {
        if self.phase != ElectionPhase::Voting {
            return Err(Error::ProtocolViolation("casting outside the voting phase".into()));
        }
        let round = self.round;
        let invalid = match self.voters[idx].behavior {
            VoterBehavior::Honest => false,
            VoterBehavior::Abstain { rounds } => {
                if round <= rounds {
                    return Ok(None);
                }
                false
            }
            VoterBehavior::InvalidBallot { rounds } => round <= rounds,
        };
        let Some(key) = self.voters[idx].key.clone() else {
            return Ok(None);
        };
        let s = self.cfg.s;
        let key_left = key.prefix(s);
        let key_right = key.slice(s, 2 * s);
        let v = if invalid {
            self.candidates.random_invalid(rng)
        } else {
            let choice = self.voters[idx].choice.clone();
            self.candidates
                .value_of(&choice)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown candidate {choice:?}")))?
                .clone()
        };
        let cipher = otp_encrypt(&key_right, &v)?;
        if !invalid {
            self.voters[idx].cast_record = Some((key_left.clone(), v));
        }
        Ok(Some(BallotMessage {
            key_left,
            cipher,
            adversarial: false,
        }))
    }

    /// Ballot messages of every pending voter, per their behavior.
    pub fn collect_ballots(&mut self, rng: &mut SimRng) -> Result<Vec<BallotMessage>> {
        let mut pool = Vec::new();
        for idx in self.pending_voters() {
            if let Some(msg) = self.cast_ballot(idx, rng)? {
                pool.push(msg);
            }
        }
        Ok(pool)
    }

    /// Voting-phase acceptance rule: known fresh left half, valid decrypted
    /// ballot.
    pub fn receive_ballot(&mut self, msg: &BallotMessage) -> BallotDecision {
        if self.phase != ElectionPhase::Voting {
            return BallotDecision::Rejected(BallotRejectReason::UnknownKey);
        }
        let Some(row) = self.key_table.find_mut(&msg.key_left) else {
            self.counters.note_rejection(BallotRejectReason::UnknownKey);
            return BallotDecision::Rejected(BallotRejectReason::UnknownKey);
        };
        if row.accepted {
            self.counters.note_rejection(BallotRejectReason::Replay);
            return BallotDecision::Rejected(BallotRejectReason::Replay);
        }
        let valid = otp_decrypt(&row.right, &msg.cipher)
            .ok()
            .filter(|v| self.candidates.contains(v));
        let Some(v) = valid else {
            self.counters.note_rejection(BallotRejectReason::InvalidBallot);
            return BallotDecision::Rejected(BallotRejectReason::InvalidBallot);
        };
        row.accepted = true;
        self.retained.push((v, msg.key_left.clone()));
        self.counters.ballots_accepted += 1;
        BallotDecision::Counted
    }

    /// Shuffle the pool (anonymous delivery) and process every message.
    pub fn deliver_ballots(
        &mut self,
        mut pool: Vec<BallotMessage>,
        transcript: &mut Transcript,
        rng: &mut SimRng,
    ) -> Vec<BallotDecision> {
        pool.shuffle(rng);
        let mut decisions = Vec::with_capacity(pool.len());
        for msg in &pool {
            let sender = msg.adversarial.then_some(Role::Adversary);
            transcript.record(
                "election.ballot",
                Channel::AnonymousClassical,
                sender,
                Some(Role::Charlie),
                json!({ "key_left": msg.key_left, "cipher": msg.cipher }),
            );
            let decision = self.receive_ballot(msg);
            let payload = match decision {
                BallotDecision::Counted => json!({ "result": "counted" }),
                BallotDecision::Rejected(reason) => {
                    json!({ "result": "rejected", "reason": reason.as_str() })
                }
            };
            transcript.record(
                "election.ballot-decision",
                Channel::PublicBroadcast,
                Some(Role::Charlie),
                None,
                payload,
            );
            decisions.push(decision);
        }
        decisions
    }

    /// End of a voting round: prune never-accepted key rows, publish the
    /// verification set, and re-credential voters who did not make it.
    pub fn close_round(&mut self, transcript: &mut Transcript, rng: &mut SimRng) -> Result<()> {
        self.key_table.prune_unaccepted();
        let accepted_remarks: BTreeSet<BitString> = self
            .key_table
            .rows()
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.remark.clone())
            .collect();
        self.verification_set_sizes.push(accepted_remarks.len());
        transcript.record(
            "election.verification-set",
            Channel::PublicBroadcast,
            Some(Role::Charlie),
            None,
            json!({
                "size": accepted_remarks.len(),
                "a": accepted_remarks.iter().collect::<Vec<_>>(),
            }),
        );
        for idx in self.pending_voters() {
            let voter = &self.voters[idx];
            if accepted_remarks.contains(&voter.credential.a) {
                self.voters[idx].voted = true;
                continue;
            }
            self.voters[idx].failed_rounds += 1;
            self.voters[idx].key = None;
            if self.voters[idx].failed_rounds > self.cfg.retry_cap {
                self.voters[idx].flagged = true;
                transcript.record(
                    "election.voter-flagged",
                    Channel::Authenticated,
                    Some(Role::Bob),
                    Some(Role::User),
                    json!({ "id": self.voters[idx].id }),
                );
                continue;
            }
            // a fresh bundle for the next round
            self.voters[idx].credential = VoterCredential::generate(self.cfg.m, rng)?;
            self.update_verified_row(idx);
            transcript.record(
                "election.recredential",
                Channel::Authenticated,
                Some(Role::Bob),
                Some(Role::User),
                json!({ "id": self.voters[idx].id, "m": self.cfg.m }),
            );
        }
        Ok(())
    }

    /// Count the retained ballots, shuffle them into the public table, and
    /// publish.
    pub fn publish_results(
        &mut self,
        fault: Option<&FaultInjection>,
        transcript: &mut Transcript,
        rng: &mut SimRng,
    ) -> Result<()> {
        if let Some(FaultInjection::DropBallot { voter }) = fault {
            if let Some((key_left, _)) = self.voters.get(*voter).and_then(|v| v.cast_record.clone())
            {
                self.retained.retain(|(_, k)| k != &key_left);
            }
        }
        let mut rows = self.retained.clone();
        rows.shuffle(rng);
        let table = BallotTable { rows };
        let mut tally: BTreeMap<String, u64> = BTreeMap::new();
        for (v, _) in &table.rows {
            if let Some(label) = self.candidates.label_of(v) {
                *tally.entry(label.to_string()).or_insert(0) += 1;
            }
        }
        transcript.record(
            "election.tally",
            Channel::PublicBroadcast,
            Some(Role::Charlie),
            None,
            json!({ "counts": tally }),
        );
        transcript.record(
            "election.table3",
            Channel::PublicBroadcast,
            Some(Role::Charlie),
            None,
            serde_json::to_value(&table)?,
        );
        self.table3 = Some(table);
        self.phase = ElectionPhase::Published;
        Ok(())
    }

    /// A voter searches the public table for their own (left key half,
    /// ballot) pair.
    pub fn verify_inclusion(&self, idx: usize) -> InclusionResult {
        let voter = &self.voters[idx];
        let Some(table) = &self.table3 else {
            return InclusionResult::DidNotCast;
        };
        match &voter.cast_record {
            Some((key_left, v)) if voter.voted => {
                if table.contains(key_left, v) {
                    InclusionResult::Confirmed
                } else {
                    InclusionResult::Missing
                }
            }
            // believes to have voted (the verification set said so) but
            // holds no ballot: an impersonation victim
            None if voter.voted => InclusionResult::Missing,
            _ => InclusionResult::DidNotCast,
        }
    }

    pub fn tally(&self) -> BTreeMap<String, u64> {
        let mut tally: BTreeMap<String, u64> = BTreeMap::new();
        for (v, _) in &self.retained {
            if let Some(label) = self.candidates.label_of(v) {
                *tally.entry(label.to_string()).or_insert(0) += 1;
            }
        }
        tally
    }

    pub fn table3(&self) -> Option<&BallotTable> {
        self.table3.as_ref()
    }

    fn outcome(&self, completed: bool) -> ElectionOutcome {
        let mut cast: BTreeMap<String, u64> = BTreeMap::new();
        for v in &self.voters {
            if v.voted && v.cast_record.is_some() {
                *cast.entry(v.choice.clone()).or_insert(0) += 1;
            }
        }
        let inclusion = self
            .voters
            .iter()
            .enumerate()
            .map(|(i, v)| InclusionRow {
                id: v.id.clone(),
                result: self.verify_inclusion(i),
            })
            .collect();
        ElectionOutcome {
            completed,
            rounds: self.round,
            tally: self.tally(),
            cast,
            table3: self.table3.clone().unwrap_or_default(),
            verification_set_sizes: self.verification_set_sizes.clone(),
            inclusion,
            flagged: self
                .voters
                .iter()
                .filter(|v| v.flagged)
                .map(|v| v.id.clone())
                .collect(),
            counters: self.counters.clone(),
        }
    }
}

/// Drive one complete election under the configured adversary and fault
/// injection.
pub fn run_election(
    cfg: &ElectionConfig,
    adversary: &AdversaryKind,
    fault: Option<&FaultInjection>,
    transcript: &mut Transcript,
    rng: &mut SimRng,
) -> Result<ElectionOutcome> {
    let mut election = Election::setup(cfg.clone(), transcript, rng)?;
    if let AdversaryKind::DishonestAbstain {
        voter,
        rounds_to_waste,
    } = adversary
    {
        if let Some(v) = election.voters.get_mut(*voter) {
            v.behavior = VoterBehavior::Abstain {
                rounds: *rounds_to_waste,
            };
        }
    }
    election.authenticate_all(transcript)?;

    let mut hijacked_key: Option<BitString> = None;
    let mut replay_buffer: Vec<BallotMessage> = Vec::new();
    let mut completed = false;
    while election.round < cfg.round_cap {
        election.round += 1;
        transcript.set_round(election.round);
        election.run_key_distribution(adversary, &mut hijacked_key, transcript, rng)?;

        let mut pool = election.collect_ballots(rng)?;
        match adversary {
            AdversaryKind::ReplayBallot { cross_round } => {
                let mut copies: Vec<BallotMessage> = pool
                    .iter()
                    .map(|m| BallotMessage {
                        adversarial: true,
                        ..m.clone()
                    })
                    .collect();
                election.counters.ballots_injected += copies.len() as u64;
                if *cross_round {
                    election.counters.ballots_injected += replay_buffer.len() as u64;
                    copies.extend(replay_buffer.drain(..));
                    replay_buffer = pool
                        .iter()
                        .map(|m| BallotMessage {
                            adversarial: true,
                            ..m.clone()
                        })
                        .collect();
                }
                pool.extend(copies);
            }
            AdversaryKind::ForgeRandomBallot { attempts } => {
                if election.round == 1 {
                    let s = cfg.s;
                    for _ in 0..*attempts {
                        pool.push(BallotMessage {
                            key_left: BitString::random(s, rng),
                            cipher: BitString::random(s, rng),
                            adversarial: true,
                        });
                    }
                    election.counters.ballots_injected += attempts;
                }
            }
            AdversaryKind::ImpersonateVoter {
                knowledge: Knowledge::Full,
            } => {
                if let Some(key) = &hijacked_key {
                    let s = cfg.s;
                    let v = election.candidates.entries()[0].0.clone();
                    let cipher = otp_encrypt(&key.slice(s, 2 * s), &v)?;
                    pool.push(BallotMessage {
                        key_left: key.prefix(s),
                        cipher,
                        adversarial: true,
                    });
                    election.counters.ballots_injected += 1;
                    hijacked_key = None;
                }
            }
            AdversaryKind::EavesdropClassical => {
                election.counters.eavesdropped_messages += pool.len() as u64;
            }
            _ => {}
        }
        election.deliver_ballots(pool, transcript, rng);
        election.close_round(transcript, rng)?;

        if election.pending_voters().is_empty() {
            completed = true;
            break;
        }
    }
    election.publish_results(fault, transcript, rng)?;
    let outcome = election.outcome(completed);
    for row in &outcome.inclusion {
        if row.result == InclusionResult::Missing {
            transcript.record(
                "election.irregularity",
                Channel::PublicBroadcast,
                None,
                None,
                json!({ "kind": "missing-inclusion" }),
            );
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed_rng;

    fn small_cfg() -> ElectionConfig {
        ElectionConfig {
            s: 16,
            m: 48,
            n_voters: 4,
            candidates: vec!["A".into(), "B".into()],
            choices: vec![],
            channel: QuantumChannelConfig::default(),
            ecc_r: 3,
            tolerance: None,
            retry_cap: 3,
            session_retry_cap: 3,
            round_cap: 6,
            enforce_candidate_gate: false,
        }
    }

    #[test]
    fn candidate_gate_arithmetic() {
        let mut rng = seed_rng(1);
        let labels: Vec<String> = (0..4).map(|i| format!("c{i}")).collect();
        let mut resamples = 0;
        // 4 candidates at s = 64: 4 / 2^64 <= 2^-40
        assert!(CandidateSet::sample(&labels, 64, true, &mut rng, &mut resamples).is_ok());
        // s = 8: 4 / 256 is far from negligible
        assert!(CandidateSet::sample(&labels, 8, true, &mut rng, &mut resamples).is_err());
        // gate disabled for test scale
        let set = CandidateSet::sample(&labels, 8, false, &mut rng, &mut resamples).unwrap();
        assert_eq!(set.entries().len(), 4);
        let (v, l) = &set.entries()[0];
        assert_eq!(set.value_of(l), Some(v));
        assert_eq!(set.label_of(v), Some(l.as_str()));
        assert!(!set.contains(&set.random_invalid(&mut rng)));
    }

    #[test]
    fn setup_publishes_distinct_candidates_and_credentials() {
        let mut rng = seed_rng(2);
        let mut transcript = Transcript::new();
        let mut cfg = small_cfg();
        cfg.n_voters = 20;
        let election = Election::setup(cfg, &mut transcript, &mut rng).unwrap();
        let mut parts = BTreeSet::new();
        for v in &election.voters {
            for p in [
                &v.credential.k,
                &v.credential.a,
                &v.credential.b,
                &v.credential.c,
            ] {
                assert!(parts.insert(p.clone()));
            }
        }
        assert_eq!(parts.len(), 80);
        assert_eq!(transcript.records()[0].step, "election.candidates");
    }

    #[test]
    fn authentication_rejects_repeats_and_bad_tokens() {
        let mut rng = seed_rng(3);
        let mut transcript = Transcript::new();
        let mut election = Election::setup(small_cfg(), &mut transcript, &mut rng).unwrap();
        let id = election.voters[0].id.clone();
        let k = election.voters[0].credential.k.clone();
        assert_eq!(
            election.authenticate(&id, &k, &mut transcript),
            AuthDecision::Accepted { entry: 1 }
        );
        // same ID twice
        assert_eq!(
            election.authenticate(&id, &k, &mut transcript),
            AuthDecision::Rejected(AuthRejectReason::AlreadyApplied)
        );
        // one-bit-wrong token
        let id2 = election.voters[1].id.clone();
        let mut bits: Vec<u8> = election.voters[1].credential.k.iter().collect();
        bits[0] ^= 1;
        let wrong = BitString::from_bits(&bits).unwrap();
        assert_eq!(
            election.authenticate(&id2, &wrong, &mut transcript),
            AuthDecision::Rejected(AuthRejectReason::BadToken)
        );
        // unknown voter
        assert_eq!(
            election.authenticate("voter-999", &k, &mut transcript),
            AuthDecision::Rejected(AuthRejectReason::UnknownVoter)
        );
    }

    #[test]
    fn honest_election_counts_every_ballot() {
        let mut rng = seed_rng(4);
        let mut transcript = Transcript::new();
        let cfg = small_cfg();
        let outcome = run_election(
            &cfg,
            &AdversaryKind::None,
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.tally, outcome.cast);
        assert_eq!(outcome.tally.values().sum::<u64>(), 4);
        assert_eq!(outcome.table3.rows.len(), 4);
        assert!(outcome
            .inclusion
            .iter()
            .all(|r| r.result == InclusionResult::Confirmed));
        // Table 2 keeps exactly the accepted rows
        assert_eq!(outcome.verification_set_sizes, vec![4]);
    }

    #[test]
    fn empty_election_is_degenerate_but_fine() {
        let mut rng = seed_rng(5);
        let mut transcript = Transcript::new();
        let mut cfg = small_cfg();
        cfg.n_voters = 0;
        let outcome = run_election(
            &cfg,
            &AdversaryKind::None,
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert!(outcome.completed);
        assert!(outcome.tally.is_empty());
        assert!(outcome.table3.rows.is_empty());
    }

    #[test]
    fn replayed_ballot_rejected_within_round() {
        let mut rng = seed_rng(6);
        let mut transcript = Transcript::new();
        let cfg = small_cfg();
        let outcome = run_election(
            &cfg,
            &AdversaryKind::ReplayBallot { cross_round: false },
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.counters.ballots_accepted, 4);
        assert_eq!(outcome.counters.ballots_rejected.get("replay"), Some(&4));
        assert_eq!(outcome.tally, outcome.cast);
    }

    // A voter who sends an invalid group in round 1 forces a second round;
    // the cross-round replay of their stale message hits a deleted row.
    #[test]
    fn cross_round_replay_hits_a_deleted_key() {
        let mut rng = seed_rng(7);
        let mut transcript = Transcript::new();
        let cfg = small_cfg();
        let mut election = Election::setup(cfg.clone(), &mut transcript, &mut rng).unwrap();
        election.voters[0].behavior = VoterBehavior::InvalidBallot { rounds: 1 };
        election.authenticate_all(&mut transcript).unwrap();

        election.round = 1;
        transcript.set_round(1);
        let mut hijacked = None;
        election
            .run_key_distribution(&AdversaryKind::None, &mut hijacked, &mut transcript, &mut rng)
            .unwrap();
        let pool = election.collect_ballots(&mut rng).unwrap();
        assert_eq!(pool.len(), 4);
        // keep a copy of every round-1 message for cross-round replay
        let stale: Vec<BallotMessage> = pool
            .iter()
            .map(|m| BallotMessage {
                adversarial: true,
                ..m.clone()
            })
            .collect();
        election.deliver_ballots(pool, &mut transcript, &mut rng);
        assert_eq!(
            election.counters.ballots_rejected.get("invalid-ballot"),
            Some(&1)
        );
        election.close_round(&mut transcript, &mut rng).unwrap();
        assert_eq!(election.pending_voters(), vec![0]);

        election.round = 2;
        transcript.set_round(2);
        election
            .run_key_distribution(&AdversaryKind::None, &mut hijacked, &mut transcript, &mut rng)
            .unwrap();
        let mut pool = election.collect_ballots(&mut rng).unwrap();
        let stale_lefts: Vec<BitString> = stale.iter().map(|m| m.key_left.clone()).collect();
        pool.extend(stale);
        let decisions = election.deliver_ballots(pool, &mut transcript, &mut rng);
        // voter 0's fresh honest ballot counted once
        assert_eq!(
            decisions
                .iter()
                .filter(|d| matches!(d, BallotDecision::Counted))
                .count(),
            1
        );
        // the stale message aimed at the deleted row is unknown-key; the
        // replays of accepted rows are replays
        let unknown = election
            .counters
            .ballots_rejected
            .get("unknown-key")
            .copied()
            .unwrap_or(0);
        assert_eq!(unknown, 1, "stale keys {stale_lefts:?}");
        election.close_round(&mut transcript, &mut rng).unwrap();
        assert!(election.pending_voters().is_empty());
    }

    #[test]
    fn forged_random_ballots_never_land_at_real_scale() {
        let mut rng = seed_rng(8);
        let mut transcript = Transcript::new();
        let mut cfg = small_cfg();
        cfg.s = 64;
        cfg.m = 64;
        let outcome = run_election(
            &cfg,
            &AdversaryKind::ForgeRandomBallot { attempts: 500 },
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.counters.ballots_accepted, 4);
        assert_eq!(
            outcome.counters.ballots_rejected.get("unknown-key"),
            Some(&500)
        );
    }

    #[test]
    fn abstaining_voter_is_recredentialed_then_flagged() {
        let mut rng = seed_rng(9);
        let mut transcript = Transcript::new();
        let mut cfg = small_cfg();
        cfg.retry_cap = 3;
        // wastes one round, then votes: election completes in two rounds
        let outcome = run_election(
            &cfg,
            &AdversaryKind::DishonestAbstain {
                voter: 0,
                rounds_to_waste: 1,
            },
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.rounds, 2);
        assert_eq!(outcome.tally.values().sum::<u64>(), 4);
        assert!(outcome.flagged.is_empty());

        // wastes more rounds than the cap: flagged and excluded, the rest
        // complete
        let mut rng = seed_rng(10);
        let mut transcript = Transcript::new();
        let outcome = run_election(
            &cfg,
            &AdversaryKind::DishonestAbstain {
                voter: 0,
                rounds_to_waste: 5,
            },
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert!(outcome.completed);
        assert_eq!(outcome.flagged, vec!["voter-000".to_string()]);
        assert_eq!(outcome.tally.values().sum::<u64>(), 3);
        assert_eq!(outcome.tally, outcome.cast);
    }

    #[test]
    fn dropped_ballot_is_flagged_by_exactly_that_voter() {
        let mut rng = seed_rng(11);
        let mut transcript = Transcript::new();
        let cfg = small_cfg();
        let outcome = run_election(
            &cfg,
            &AdversaryKind::None,
            Some(&FaultInjection::DropBallot { voter: 2 }),
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        for (i, row) in outcome.inclusion.iter().enumerate() {
            if i == 2 {
                assert_eq!(row.result, InclusionResult::Missing);
            } else {
                assert_eq!(row.result, InclusionResult::Confirmed);
            }
        }
    }

    #[test]
    fn full_knowledge_impersonation_detected_post_hoc() {
        let mut rng = seed_rng(12);
        let mut transcript = Transcript::new();
        let cfg = small_cfg();
        let outcome = run_election(
            &cfg,
            &AdversaryKind::ImpersonateVoter {
                knowledge: Knowledge::Full,
            },
            None,
            &mut transcript,
            &mut rng,
        )
        .unwrap();
        assert_eq!(outcome.counters.impersonations_accepted, 1);
        // the victim believes they voted but cannot find a ballot
        assert_eq!(outcome.inclusion[0].result, InclusionResult::Missing);
        for row in &outcome.inclusion[1..] {
            assert_eq!(row.result, InclusionResult::Confirmed);
        }
        // the forged ballot was counted, so the tally exceeds honest casts
        assert_eq!(outcome.tally.values().sum::<u64>(), 4);
        assert_eq!(outcome.cast.values().sum::<u64>(), 3);
    }

    #[test]
    fn knowledgeless_impersonation_always_rejected() {
        for knowledge in [Knowledge::None, Knowledge::XToken] {
            let mut rng = seed_rng(13);
            let mut transcript = Transcript::new();
            let cfg = small_cfg();
            let outcome = run_election(
                &cfg,
                &AdversaryKind::ImpersonateVoter { knowledge },
                None,
                &mut transcript,
                &mut rng,
            )
            .unwrap();
            assert!(outcome.completed);
            assert_eq!(outcome.counters.impersonation_attempts, 1);
            assert_eq!(outcome.counters.impersonations_accepted, 0);
            assert_eq!(outcome.tally, outcome.cast);
        }
    }

    // Delivery order is independent of cast order: with two voters, both
    // orders appear across seeds.
    #[test]
    fn anonymous_delivery_is_shuffled() {
        let mut seen_orders = BTreeSet::new();
        for seed in 0..20u64 {
            let mut rng = seed_rng(seed);
            let mut transcript = Transcript::new();
            let mut cfg = small_cfg();
            cfg.n_voters = 2;
            run_election(&cfg, &AdversaryKind::None, None, &mut transcript, &mut rng).unwrap();
            let firsts: Vec<String> = transcript
                .records()
                .iter()
                .filter(|r| r.step == "election.ballot")
                .map(|r| r.payload["key_left"]["hex"].as_str().unwrap().to_string())
                .collect();
            seen_orders.insert(firsts);
        }
        assert!(seen_orders.len() > 1, "delivery order never varied");
    }

    #[test]
    fn voting_outside_phase_rejected() {
        let mut rng = seed_rng(14);
        let mut transcript = Transcript::new();
        let mut election = Election::setup(small_cfg(), &mut transcript, &mut rng).unwrap();
        assert!(election.cast_ballot(0, &mut rng).is_err());
        let msg = BallotMessage {
            key_left: BitString::random(16, &mut rng),
            cipher: BitString::random(16, &mut rng),
            adversarial: false,
        };
        assert_eq!(
            election.receive_ballot(&msg),
            BallotDecision::Rejected(BallotRejectReason::UnknownKey)
        );
    }
}
