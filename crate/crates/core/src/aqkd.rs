//! The anonymous key distribution protocol: three role state machines and
//! a driver that runs one session end to end.
//!
//! A user who pre-shares a credential (p, x, y, z) with the administrator
//! Bob establishes a key with the counter Charlie without revealing
//! identity:
//!
//! 1. The user sends the request token p to Bob (authenticated channel).
//! 2. Bob checks p, establishes a fresh pair (k_c, k_bc) with Charlie, and
//!    forwards the session secrets as X = E_{k_bc}[k_c || x || y || z].
//! 3. Charlie decrypts X and checks k_c.
//! 4. The user draws r1, r2 (3m bits each), prepares 3m conjugate-coded
//!    qubits, and sends them anonymously to Charlie.
//! 5. Charlie measures every delivered qubit in a random basis, picks m
//!    check positions sigma, and publishes (F, f, bases, delivered).
//! 6. The user compares F against r2 at the check positions where Charlie's
//!    basis matched (only those are decisive); on an acceptable error rate
//!    he builds the match indicator r3 over the non-check positions, seals
//!    it as Y = E_z[y || r3], and anonymously sends (x, Y).
//! 7. Charlie verifies x is known and fresh, opens Y, checks y, and reads
//!    off the sifted key from his outcomes at the flagged positions.
//!
//! The reconciliation variant appends Z = G xor ECC(K) to the confirmation
//! so both sides end with the same freshly chosen error-free key K even on
//! a noisy channel.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{
    bits::BitString,
    credentials::AqkdCredential,
    ecc::RepetitionCode,
    otp::{otp_decrypt, otp_encrypt},
    qubit::{encode, transmit, Interceptor, Qubit, QuantumChannelConfig, TransmissionReport},
    transcript::{Channel, Role, Transcript},
    Error, Result, SimRng,
};

/// Session parameters. `key_bits` is the final key length 2s; zero means
/// the basic variant without reconciliation.
#[derive(Clone, Debug)]
pub struct AqkdParams {
    pub m: usize,
    pub key_bits: usize,
    pub ecc: RepetitionCode,
    pub tolerance: f64,
    pub channel: QuantumChannelConfig,
}

impl AqkdParams {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("m must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.tolerance) {
            return Err(Error::Config(format!(
                "tolerance must be in [0, 1], got {}",
                self.tolerance
            )));
        }
        self.channel.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UserPhase {
    Init,
    SentRequest,
    SentQubits,
    Verified,
    Confirmed,
    Reconciled,
    Aborted,
}

/// Why a session stopped without a rejection by a party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason")]
pub enum AbortReason {
    /// Fewer than m qubits arrived; no check set can be drawn.
    TooFewDelivered { delivered: usize, required: usize },
    /// No check position had a matched basis; the error rate is undefined.
    Undecidable,
    /// Observed check error rate above tolerance (eavesdropping signature).
    ErrorRateTooHigh { rate: f64, decisive: usize },
    /// Too few sifted bits to mask the error-correction block.
    InsufficientSift { sifted: usize, required: usize },
}

/// Why a party refused a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    UnknownRequest,
    ReplayedRequest,
    BadSessionKey,
    UnknownToken,
    ReplayedToken,
    BadWitness,
}

/// Charlie's published check data from step 5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckAnnouncement {
    /// Original positions that arrived, strictly increasing.
    pub delivered_indices: Vec<usize>,
    /// Charlie's measuring bases, aligned with `delivered_indices`.
    pub bases: BitString,
    /// Check positions, a strictly increasing m-subset of the delivered set.
    pub sigma: Vec<usize>,
    /// Indicator over all 3m positions: 0 exactly on sigma.
    pub f: BitString,
    /// Charlie's outcomes at the sigma positions, in order.
    pub outcomes_at_sigma: BitString,
}

impl CheckAnnouncement {
    /// Reconstruct sigma from the indicator string f.
    pub fn sigma_from_f(&self) -> Vec<usize> {
        (0..self.f.len()).filter(|&j| self.f.bit(j) == 0).collect()
    }

    /// Charlie's basis at an original position, if it was delivered.
    pub fn basis_at(&self, pos: usize) -> Option<u8> {
        self.delivered_indices
            .binary_search(&pos)
            .ok()
            .map(|slot| self.bases.bit(slot))
    }
}

/// The user's step-6 message: token, sealed witness, and optionally the
/// masked error-correction block of the reconciliation variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confirmation {
    pub x: BitString,
    pub sealed: BitString,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z_block: Option<BitString>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Accept { error_rate: f64, decisive: usize },
    Abort(AbortReason),
}

/// Step-6 check logic, shared by the user state machine and the detection
/// harness: only check positions where Charlie's basis matched r1 are
/// decisive; mismatched-basis positions carry no information.
pub fn evaluate_check(
    r1: &BitString,
    r2: &BitString,
    ann: &CheckAnnouncement,
    tolerance: f64,
) -> Verdict {
    let mut decisive = 0usize;
    let mut errors = 0usize;
    for (slot, &pos) in ann.sigma.iter().enumerate() {
        match ann.basis_at(pos) {
            Some(basis) if basis == r1.bit(pos) => {
                decisive += 1;
                if ann.outcomes_at_sigma.bit(slot) != r2.bit(pos) {
                    errors += 1;
                }
            }
            _ => {}
        }
    }
    if decisive == 0 {
        return Verdict::Abort(AbortReason::Undecidable);
    }
    let rate = errors as f64 / decisive as f64;
    if rate > tolerance {
        Verdict::Abort(AbortReason::ErrorRateTooHigh { rate, decisive })
    } else {
        Verdict::Accept {
            error_rate: rate,
            decisive,
        }
    }
}

/// Anonymous user state machine.
#[derive(Debug)]
pub struct UserSession {
    credential: AqkdCredential,
    m: usize,
    phase: UserPhase,
    r1: BitString,
    r2: BitString,
    sift: BitString,
    final_key: Option<BitString>,
}

impl UserSession {
    pub fn new(credential: AqkdCredential) -> Self {
        let m = credential.m();
        Self {
            credential,
            m,
            phase: UserPhase::Init,
            r1: BitString::new(),
            r2: BitString::new(),
            sift: BitString::new(),
            final_key: None,
        }
    }

    pub fn phase(&self) -> UserPhase {
        self.phase
    }

    pub fn sifted_key(&self) -> &BitString {
        &self.sift
    }

    pub fn final_key(&self) -> Option<&BitString> {
        self.final_key.as_ref()
    }

    fn expect_phase(&self, phase: UserPhase) -> Result<()> {
        if self.phase != phase {
            return Err(Error::ProtocolViolation(format!(
                "expected phase {phase:?}, session is in {:?}",
                self.phase
            )));
        }
        Ok(())
    }

    /// Step 1: hand the request token to the administrator.
    pub fn request(&mut self) -> Result<BitString> {
        self.expect_phase(UserPhase::Init)?;
        self.phase = UserPhase::SentRequest;
        Ok(self.credential.p.clone())
    }

    /// Step 4: draw r1, r2 and prepare the 3m qubits.
    pub fn emit_qubits(&mut self, rng: &mut SimRng) -> Result<Vec<Qubit>> {
        self.expect_phase(UserPhase::SentRequest)?;
        self.r1 = BitString::random(3 * self.m, rng);
        self.r2 = BitString::random(3 * self.m, rng);
        let qubits = encode(&self.r1, &self.r2)?;
        self.phase = UserPhase::SentQubits;
        Ok(qubits)
    }

    /// Step 6, first half: estimate the error rate at the decisive check
    /// positions and accept or abort.
    pub fn verify_announcement(
        &mut self,
        ann: &CheckAnnouncement,
        tolerance: f64,
    ) -> Result<Verdict> {
        self.expect_phase(UserPhase::SentQubits)?;
        // the user recovers sigma from f; it must match the published set
        let sigma = ann.sigma_from_f();
        if sigma != ann.sigma {
            return Err(Error::ProtocolViolation(
                "announcement f/sigma mismatch".into(),
            ));
        }
        let verdict = evaluate_check(&self.r1, &self.r2, ann, tolerance);
        self.phase = match verdict {
            Verdict::Accept { .. } => UserPhase::Verified,
            Verdict::Abort(_) => UserPhase::Aborted,
        };
        Ok(verdict)
    }

    /// Step 6, second half: build the match indicator r3 over the non-check
    /// positions (undelivered positions count as measured incorrectly),
    /// keep the sifted key, and seal (y || r3) under z.
    pub fn confirm(&mut self, ann: &CheckAnnouncement) -> Result<Confirmation> {
        self.expect_phase(UserPhase::Verified)?;
        let sigma: BTreeSet<usize> = ann.sigma.iter().copied().collect();
        let mut r3 = BitString::new();
        let mut sift = BitString::new();
        for pos in 0..3 * self.m {
            if sigma.contains(&pos) {
                continue;
            }
            let matched = ann.basis_at(pos) == Some(self.r1.bit(pos));
            r3.push(matched as u8);
            if matched {
                sift.push(self.r2.bit(pos));
            }
        }
        debug_assert_eq!(r3.len(), 2 * self.m);
        let sealed = otp_encrypt(&self.credential.z, &self.credential.y.concat(&r3))?;
        self.sift = sift;
        self.phase = UserPhase::Confirmed;
        Ok(Confirmation {
            x: self.credential.x.clone(),
            sealed,
            z_block: None,
        })
    }

    /// Reconciliation: choose the final key, encode it, and mask the
    /// codeword with the sifted key.
    pub fn reconcile(
        &mut self,
        key_bits: usize,
        ecc: &RepetitionCode,
        rng: &mut SimRng,
    ) -> Result<std::result::Result<BitString, AbortReason>> {
        self.expect_phase(UserPhase::Confirmed)?;
        let block_len = ecc.r() * key_bits;
        if self.sift.len() < block_len {
            self.phase = UserPhase::Aborted;
            return Ok(Err(AbortReason::InsufficientSift {
                sifted: self.sift.len(),
                required: block_len,
            }));
        }
        let key = BitString::random(key_bits, rng);
        let codeword = ecc.encode(&key)?;
        let z_block = self.sift.prefix(block_len).xor(&codeword)?;
        self.final_key = Some(key);
        self.phase = UserPhase::Reconciled;
        Ok(Ok(z_block))
    }
}

/// Fresh session keys Bob establishes with Charlie in step 2 (modeled as an
/// authenticated pre-shared pair per session).
#[derive(Clone, Debug)]
pub struct PairwiseKeys {
    pub k_c: BitString,
    pub k_bc: BitString,
}

/// Step-2 output: the ciphertext X for Charlie plus the pairwise keys both
/// parties hold.
#[derive(Clone, Debug)]
pub struct Authorization {
    pub cipher: BitString,
    pub pair: PairwiseKeys,
}

#[derive(Debug)]
pub enum AuthorizeOutcome {
    Authorized(Authorization),
    Rejected(RejectReason),
}

/// The administrator: holds the issued credential table and consumes each
/// request token once.
#[derive(Debug, Default)]
pub struct Bob {
    issued: BTreeMap<BitString, AqkdCredential>,
    consumed: BTreeSet<BitString>,
}

impl Bob {
    pub fn new() -> Self {
        Self::default()
    }

    /// Issue a fresh credential and remember it.
    pub fn issue(&mut self, m: usize, rng: &mut SimRng) -> Result<AqkdCredential> {
        let cred = AqkdCredential::generate(m, rng)?;
        self.issued.insert(cred.p.clone(), cred.clone());
        Ok(cred)
    }

    /// Register a credential built elsewhere (the election maps voter
    /// material onto session credentials).
    pub fn register(&mut self, cred: &AqkdCredential) {
        self.issued.insert(cred.p.clone(), cred.clone());
    }

    /// Step 2: check the request token, establish fresh pairwise keys with
    /// Charlie, and encrypt the session secrets.
    pub fn authorize(&mut self, p: &BitString, rng: &mut SimRng) -> AuthorizeOutcome {
        let Some(cred) = self.issued.get(p) else {
            return AuthorizeOutcome::Rejected(RejectReason::UnknownRequest);
        };
        if !self.consumed.insert(p.clone()) {
            return AuthorizeOutcome::Rejected(RejectReason::ReplayedRequest);
        }
        let m = cred.m();
        let payload = cred
            .x
            .concat(&cred.y)
            .concat(&cred.z);
        let k_c = BitString::random(m, rng);
        let plain = k_c.concat(&payload);
        let k_bc = BitString::random(plain.len(), rng);
        let cipher = otp_encrypt(&k_bc, &plain).expect("lengths match by construction");
        AuthorizeOutcome::Authorized(Authorization {
            cipher,
            pair: PairwiseKeys { k_c, k_bc },
        })
    }
}

/// Secrets Charlie learned from one authorization.
#[derive(Clone, Debug)]
pub struct SessionSecrets {
    pub y: BitString,
    pub z: BitString,
}

/// Per-run record of Charlie's measurements.
#[derive(Debug)]
pub struct CharlieRun {
    total_len: usize,
    delivered: Vec<usize>,
    outcomes: BitString,
    pub announcement: CheckAnnouncement,
}

impl CharlieRun {
    pub fn outcome_at(&self, pos: usize) -> Option<u8> {
        self.delivered
            .binary_search(&pos)
            .ok()
            .map(|slot| self.outcomes.bit(slot))
    }
}

#[derive(Debug)]
pub enum MeasureOutcome {
    Measured(CharlieRun),
    TooFewDelivered { delivered: usize, required: usize },
}

#[derive(Debug, PartialEq)]
pub enum ConfirmOutcome {
    Accepted { sifted: BitString },
    Rejected(RejectReason),
}

/// The counter: database of session secrets keyed by token x, a single-use
/// acceptance registry, and per-run measurement state.
#[derive(Debug, Default)]
pub struct Charlie {
    db: BTreeMap<BitString, SessionSecrets>,
    accepted: BTreeSet<BitString>,
}

impl Charlie {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn knows_token(&self, x: &BitString) -> bool {
        self.db.contains_key(x)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted.len()
    }

    /// Step 3: decrypt X, check k_c, and store (x, y, z).
    pub fn receive_authorization(
        &mut self,
        cipher: &BitString,
        pair: &PairwiseKeys,
    ) -> std::result::Result<(), RejectReason> {
        let m = pair.k_c.len();
        if cipher.len() != 12 * m || pair.k_bc.len() != cipher.len() {
            return Err(RejectReason::BadSessionKey);
        }
        let plain = otp_decrypt(&pair.k_bc, cipher).expect("lengths checked");
        if plain.prefix(m) != pair.k_c {
            return Err(RejectReason::BadSessionKey);
        }
        let x = plain.slice(m, 4 * m);
        let y = plain.slice(4 * m, 7 * m);
        let z = plain.slice(7 * m, 12 * m);
        self.db.insert(x, SessionSecrets { y, z });
        Ok(())
    }

    /// Step 5: measure every delivered qubit in a random basis, draw the
    /// check set sigma, and publish (F, f, bases, delivered).
    pub fn measure_and_announce(
        mut report: TransmissionReport,
        total_len: usize,
        m: usize,
        rng: &mut SimRng,
    ) -> Result<MeasureOutcome> {
        if report.delivered() < m {
            return Ok(MeasureOutcome::TooFewDelivered {
                delivered: report.delivered(),
                required: m,
            });
        }
        let mut bases = BitString::new();
        let mut outcomes = BitString::new();
        for q in report.qubits.iter_mut() {
            let basis = rng.random::<bool>() as u8;
            let outcome = q.measure(basis, rng)?;
            bases.push(basis);
            outcomes.push(outcome);
        }
        let delivered = report.delivered_indices;
        let mut sigma: Vec<usize> = rand::seq::index::sample(rng, delivered.len(), m)
            .into_iter()
            .map(|slot| delivered[slot])
            .collect();
        sigma.sort_unstable();
        let sigma_set: BTreeSet<usize> = sigma.iter().copied().collect();
        let mut f = BitString::new();
        for j in 0..total_len {
            f.push(!sigma_set.contains(&j) as u8);
        }
        let outcomes_at_sigma = {
            let mut out = BitString::new();
            for &pos in &sigma {
                let slot = delivered.binary_search(&pos).expect("sigma within delivered");
                out.push(outcomes.bit(slot));
            }
            out
        };
        let announcement = CheckAnnouncement {
            delivered_indices: delivered.clone(),
            bases,
            sigma,
            f,
            outcomes_at_sigma,
        };
        Ok(MeasureOutcome::Measured(CharlieRun {
            total_len,
            delivered,
            outcomes,
            announcement,
        }))
    }

    /// Step 7: verify the token is known and fresh, open the sealed
    /// witness, and extract the sifted key from the flagged positions.
    pub fn accept_confirmation(
        &mut self,
        conf: &Confirmation,
        run: &CharlieRun,
    ) -> ConfirmOutcome {
        if self.accepted.contains(&conf.x) {
            return ConfirmOutcome::Rejected(RejectReason::ReplayedToken);
        }
        let Some(secrets) = self.db.get(&conf.x) else {
            return ConfirmOutcome::Rejected(RejectReason::UnknownToken);
        };
        if conf.sealed.len() != secrets.z.len() {
            return ConfirmOutcome::Rejected(RejectReason::BadWitness);
        }
        let plain = otp_decrypt(&secrets.z, &conf.sealed).expect("lengths checked");
        let y_len = secrets.y.len();
        if plain.prefix(y_len) != secrets.y {
            return ConfirmOutcome::Rejected(RejectReason::BadWitness);
        }
        let r3 = plain.slice(y_len, plain.len());
        let sigma_set: BTreeSet<usize> = run.announcement.sigma.iter().copied().collect();
        let mut sifted = BitString::new();
        let mut j = 0usize;
        for pos in 0..run.total_len {
            if sigma_set.contains(&pos) {
                continue;
            }
            if j < r3.len() && r3.bit(j) == 1 {
                // a flag on an undelivered position yields nothing
                if let Some(outcome) = run.outcome_at(pos) {
                    sifted.push(outcome);
                }
            }
            j += 1;
        }
        self.accepted.insert(conf.x.clone());
        ConfirmOutcome::Accepted { sifted }
    }

    /// Reconciliation, receiver side: unmask the codeword with the sifted
    /// key and decode. A residual post-decode mismatch is undetectable here
    /// by construction; it surfaces later as a failed ballot decrypt.
    pub fn reconcile(
        sifted: &BitString,
        z_block: &BitString,
        ecc: &RepetitionCode,
    ) -> Result<BitString> {
        if sifted.len() < z_block.len() {
            return Err(Error::ProtocolViolation(format!(
                "sifted key ({} bits) shorter than reconciliation block ({} bits)",
                sifted.len(),
                z_block.len()
            )));
        }
        let codeword = sifted.prefix(z_block.len()).xor(z_block)?;
        ecc.decode(&codeword)
    }
}

/// Per-session summary statistics.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SessionStats {
    pub check_error_rate: Option<f64>,
    pub decisive_positions: usize,
    pub sift_len: usize,
}

#[derive(Debug)]
pub enum SessionOutcome {
    Completed {
        user_key: BitString,
        charlie_key: BitString,
        stats: SessionStats,
    },
    Aborted {
        reason: AbortReason,
        stats: SessionStats,
    },
    Rejected {
        reason: RejectReason,
    },
}

/// Hook invoked after step 3, once Charlie holds the session secrets but
/// before the honest confirmation arrives. Lets an attacker race the user.
pub type PostAuthHook<'a> =
    dyn FnMut(&mut Charlie, &mut Transcript, &mut SimRng) -> Result<()> + 'a;

/// Drive one full session (steps 1-7 plus reconciliation) between a user
/// holding `credential` and the long-lived Bob and Charlie.
pub fn run_session(
    bob: &mut Bob,
    charlie: &mut Charlie,
    credential: &AqkdCredential,
    params: &AqkdParams,
    interceptor: Option<&mut dyn Interceptor>,
    transcript: &mut Transcript,
    rng: &mut SimRng,
) -> Result<SessionOutcome> {
    run_session_hooked(
        bob, charlie, credential, params, interceptor, None, transcript, rng,
    )
}

/// [`run_session`] with an optional post-authorization hook.
#[allow(clippy::too_many_arguments)]
pub fn run_session_hooked(
    bob: &mut Bob,
    charlie: &mut Charlie,
    credential: &AqkdCredential,
    params: &AqkdParams,
    interceptor: Option<&mut dyn Interceptor>,
    mut post_auth: Option<&mut PostAuthHook<'_>>,
    transcript: &mut Transcript,
    rng: &mut SimRng,
) -> Result<SessionOutcome> {
    params.validate()?;
    let mut user = UserSession::new(credential.clone());
    let mut stats = SessionStats::default();

    // step 1: request token on the authenticated channel
    let p = user.request()?;
    transcript.record(
        "aqkd.request",
        Channel::Authenticated,
        Some(Role::User),
        Some(Role::Bob),
        json!({ "p": p }),
    );

    // step 2: authorization
    let auth = match bob.authorize(&p, rng) {
        AuthorizeOutcome::Authorized(auth) => auth,
        AuthorizeOutcome::Rejected(reason) => {
            transcript.record(
                "aqkd.request-rejected",
                Channel::Authenticated,
                Some(Role::Bob),
                Some(Role::User),
                json!({ "reason": reason }),
            );
            return Ok(SessionOutcome::Rejected { reason });
        }
    };
    transcript.record(
        "aqkd.authorize",
        Channel::Authenticated,
        Some(Role::Bob),
        Some(Role::Charlie),
        json!({ "cipher": auth.cipher }),
    );

    // step 3
    if let Err(reason) = charlie.receive_authorization(&auth.cipher, &auth.pair) {
        transcript.record(
            "aqkd.authorization-rejected",
            Channel::Authenticated,
            Some(Role::Charlie),
            Some(Role::Bob),
            json!({ "reason": reason }),
        );
        return Ok(SessionOutcome::Rejected { reason });
    }

    if let Some(hook) = post_auth.as_deref_mut() {
        hook(charlie, transcript, rng)?;
    }

    // step 4: anonymous quantum transmission
    let qubits = user.emit_qubits(rng)?;
    let report = transmit(qubits, &params.channel, interceptor, rng)?;
    transcript.record(
        "aqkd.qubits",
        Channel::AnonymousQuantum,
        None,
        Some(Role::Charlie),
        json!({ "count": 3 * params.m }),
    );

    // step 5: measurement and public check announcement
    let run = match Charlie::measure_and_announce(report, 3 * params.m, params.m, rng)? {
        MeasureOutcome::Measured(run) => run,
        MeasureOutcome::TooFewDelivered { delivered, required } => {
            let reason = AbortReason::TooFewDelivered { delivered, required };
            transcript.record(
                "aqkd.abort",
                Channel::PublicBroadcast,
                Some(Role::Charlie),
                None,
                serde_json::to_value(&reason)?,
            );
            return Ok(SessionOutcome::Aborted { reason, stats });
        }
    };
    transcript.record(
        "aqkd.announce",
        Channel::PublicBroadcast,
        Some(Role::Charlie),
        None,
        serde_json::to_value(&run.announcement)?,
    );

    // step 6: verification
    match user.verify_announcement(&run.announcement, params.tolerance)? {
        Verdict::Accept { error_rate, decisive } => {
            stats.check_error_rate = Some(error_rate);
            stats.decisive_positions = decisive;
        }
        Verdict::Abort(reason) => {
            if let AbortReason::ErrorRateTooHigh { rate, decisive } = &reason {
                stats.check_error_rate = Some(*rate);
                stats.decisive_positions = *decisive;
            }
            transcript.record(
                "aqkd.abort",
                Channel::PublicBroadcast,
                None,
                None,
                serde_json::to_value(&reason)?,
            );
            return Ok(SessionOutcome::Aborted { reason, stats });
        }
    }

    // step 6 continued: confirmation, with reconciliation when a final key
    // length is requested
    let mut conf = user.confirm(&run.announcement)?;
    stats.sift_len = user.sifted_key().len();
    if params.key_bits > 0 {
        match user.reconcile(params.key_bits, &params.ecc, rng)? {
            Ok(z_block) => conf.z_block = Some(z_block),
            Err(reason) => {
                transcript.record(
                    "aqkd.abort",
                    Channel::PublicBroadcast,
                    None,
                    None,
                    serde_json::to_value(&reason)?,
                );
                return Ok(SessionOutcome::Aborted { reason, stats });
            }
        }
    }
    transcript.record(
        "aqkd.confirm",
        Channel::AnonymousClassical,
        None,
        Some(Role::Charlie),
        serde_json::to_value(&conf)?,
    );

    // step 7
    let sifted = match charlie.accept_confirmation(&conf, &run) {
        ConfirmOutcome::Accepted { sifted } => sifted,
        ConfirmOutcome::Rejected(reason) => {
            transcript.record(
                "aqkd.confirm-rejected",
                Channel::PublicBroadcast,
                Some(Role::Charlie),
                None,
                json!({ "reason": reason }),
            );
            return Ok(SessionOutcome::Rejected { reason });
        }
    };

    if params.key_bits == 0 {
        // basic variant: the sifted strings are the keys
        return Ok(SessionOutcome::Completed {
            user_key: user.sifted_key().clone(),
            charlie_key: sifted,
            stats,
        });
    }

    let z_block = conf.z_block.as_ref().expect("set above");
    let charlie_key = Charlie::reconcile(&sifted, z_block, &params.ecc)?;
    let user_key = user.final_key().expect("reconciled").clone();
    Ok(SessionOutcome::Completed {
        user_key,
        charlie_key,
        stats,
    })
}

/// Stats from the check phase alone (steps 4-6 without the classical
/// setup), for detection-rate estimation.
#[derive(Clone, Debug)]
pub struct CheckPhaseStats {
    pub verdict: Verdict,
}

/// Run steps 4-6 only: prepare, transmit, measure, announce, verify.
pub fn run_check_phase(
    m: usize,
    channel: &QuantumChannelConfig,
    interceptor: Option<&mut dyn Interceptor>,
    tolerance: f64,
    rng: &mut SimRng,
) -> Result<CheckPhaseStats> {
    let r1 = BitString::random(3 * m, rng);
    let r2 = BitString::random(3 * m, rng);
    let qubits = encode(&r1, &r2)?;
    let report = transmit(qubits, channel, interceptor, rng)?;
    let verdict = match Charlie::measure_and_announce(report, 3 * m, m, rng)? {
        MeasureOutcome::Measured(run) => evaluate_check(&r1, &r2, &run.announcement, tolerance),
        MeasureOutcome::TooFewDelivered { delivered, required } => {
            Verdict::Abort(AbortReason::TooFewDelivered { delivered, required })
        }
    };
    Ok(CheckPhaseStats { verdict })
}
