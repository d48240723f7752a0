//! Pluggable attacker strategies: channel interception, voter
//! impersonation, ballot replay and forgery, and disruption by abstention.
//! Exactly one kind is active per scenario run; composing behaviors is the
//! harness's job.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{
    aqkd::{Charlie, ConfirmOutcome, MeasureOutcome, UserSession, Verdict},
    bits::BitString,
    credentials::AqkdCredential,
    qubit::{transmit, Interceptor, Qubit, QuantumChannelConfig},
    transcript::{Channel, Role, Transcript},
    Result, SimRng,
};

/// Which attacker runs in a scenario, with its parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversaryKind {
    #[default]
    None,
    /// Measure a fraction of transiting qubits in random bases and
    /// re-prepare them.
    InterceptResend { fraction: f64 },
    /// Attempt a key distribution session with forged credentials.
    ImpersonateVoter { knowledge: Knowledge },
    /// Duplicate observed ballot messages, within and across rounds.
    ReplayBallot {
        #[serde(default)]
        cross_round: bool,
    },
    /// Inject ballots built from random key and ciphertext guesses.
    ForgeRandomBallot { attempts: u64 },
    /// A verified voter who completes key distribution but never casts.
    DishonestAbstain { voter: usize, rounds_to_waste: u32 },
    /// Read anonymous and public classical traffic without altering it.
    EavesdropClassical,
}

/// What an impersonator managed to steal before attacking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Knowledge {
    /// Public transcript only.
    None,
    /// The single-use token x (a stolen `a` string).
    XToken,
    /// The whole (x, y, z) triple, as a malicious administrator holds.
    Full,
}

/// Eve's record of one intercepted qubit.
#[derive(Clone, Copy, Debug)]
pub struct EveNote {
    pub index: usize,
    pub basis: u8,
    pub outcome: u8,
}

/// Canonical intercept-resend: measure in a uniform random basis and
/// re-prepare in that basis with the observed outcome. Produces exactly the
/// 25% error signature at matched-basis check positions.
#[derive(Debug, Default)]
pub struct InterceptResend {
    fraction: f64,
    pub notes: Vec<EveNote>,
}

impl InterceptResend {
    pub fn new(fraction: f64) -> Self {
        Self {
            fraction,
            notes: Vec::new(),
        }
    }
}

impl Interceptor for InterceptResend {
    fn intercept(&mut self, index: usize, mut qubit: Qubit, rng: &mut SimRng) -> Qubit {
        if self.fraction < 1.0 && rng.random::<f64>() >= self.fraction {
            return qubit;
        }
        let basis = rng.random::<bool>() as u8;
        let outcome = qubit.measure(basis, rng).expect("in-transit qubit is fresh");
        self.notes.push(EveNote {
            index,
            basis,
            outcome,
        });
        Qubit::prepare(basis, outcome).expect("valid bits")
    }
}

/// One forged session attempt: the attacker runs the qubit and
/// confirmation steps with his own qubits and whatever credential parts he
/// has, against a Charlie who holds the real session secrets.
pub fn impersonate_attempt(
    charlie: &mut Charlie,
    knowledge: Knowledge,
    target: &AqkdCredential,
    channel: &QuantumChannelConfig,
    transcript: &mut Transcript,
    rng: &mut SimRng,
) -> Result<ConfirmOutcome> {
    let m = target.m();
    let (x, y, z) = match knowledge {
        Knowledge::None => (
            BitString::random(3 * m, rng),
            BitString::random(3 * m, rng),
            BitString::random(5 * m, rng),
        ),
        Knowledge::XToken => (
            target.x.clone(),
            BitString::random(3 * m, rng),
            BitString::random(5 * m, rng),
        ),
        Knowledge::Full => (target.x.clone(), target.y.clone(), target.z.clone()),
    };
    let forged = AqkdCredential::from_parts(BitString::random(m, rng), x, y, z)?;
    let mut attacker = UserSession::new(forged);
    attacker.request()?;
    let qubits = attacker.emit_qubits(rng)?;
    let report = transmit(qubits, channel, None, rng)?;
    let run = match Charlie::measure_and_announce(report, 3 * m, m, rng)? {
        MeasureOutcome::Measured(run) => run,
        MeasureOutcome::TooFewDelivered { .. } => {
            // nothing arrived; the attempt dies before confirmation
            return Ok(ConfirmOutcome::Rejected(
                crate::aqkd::RejectReason::BadWitness,
            ));
        }
    };
    // the attacker accepts any error rate on his own qubits
    match attacker.verify_announcement(&run.announcement, 1.0)? {
        Verdict::Accept { .. } => {}
        Verdict::Abort(_) => {
            return Ok(ConfirmOutcome::Rejected(
                crate::aqkd::RejectReason::BadWitness,
            ))
        }
    }
    let conf = attacker.confirm(&run.announcement)?;
    let outcome = charlie.accept_confirmation(&conf, &run);
    transcript.record(
        "adversary.impersonate",
        Channel::AnonymousClassical,
        Some(Role::Adversary),
        Some(Role::Charlie),
        serde_json::json!({
            "knowledge": knowledge,
            "accepted": matches!(outcome, ConfirmOutcome::Accepted { .. }),
        }),
    );
    Ok(outcome)
}

/// Count full-key guesses by an adversary with no access beyond the public
/// transcript: each sifted bit is uniform given his view, so both the key
/// and his best guess are independent uniform strings.
pub fn no_access_guess_successes(key_bits: u32, trials: u64, rng: &mut SimRng) -> u64 {
    assert!(key_bits <= 32);
    let mask = if key_bits == 32 {
        u32::MAX
    } else {
        (1u32 << key_bits) - 1
    };
    let mut successes = 0u64;
    for _ in 0..trials {
        let key = rng.random::<u32>() & mask;
        let guess = rng.random::<u32>() & mask;
        successes += (key == guess) as u64;
    }
    successes
}

/// Per-bit guess success of an intercept-resend attacker who guesses each
/// encoded bit as his own measurement outcome. Returns (correct, total).
pub fn intercept_guess_stats(n_qubits: usize, rng: &mut SimRng) -> (u64, u64) {
    let mut eve = InterceptResend::new(1.0);
    let basis = BitString::random(n_qubits, rng);
    let value = BitString::random(n_qubits, rng);
    let qubits = crate::qubit::encode(&basis, &value).expect("valid bits");
    let cfg = QuantumChannelConfig::default();
    let _ = transmit(qubits, &cfg, Some(&mut eve), rng).expect("valid config");
    let correct = eve
        .notes
        .iter()
        .filter(|note| note.outcome == value.bit(note.index))
        .count() as u64;
    (correct, n_qubits as u64)
}
