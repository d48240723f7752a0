//! Conjugate-coded qubits and quantum channels.
//!
//! A qubit is a (basis, value) record: basis 0 is the rectilinear /
//! computational basis, basis 1 the diagonal / Hadamard basis. Measuring
//! in the preparation basis returns the encoded value; measuring in the
//! other basis returns a fair coin flip. A qubit can be measured exactly
//! once; a second attempt is a protocol violation (no-cloning stand-in).
//!
//! Fields are private: a qubit is opaque to everyone but its creator, and
//! the only way to learn anything about one you did not prepare is
//! [`Qubit::measure`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{bits::BitString, Error, Result, SimRng};

#[derive(Debug)]
pub struct Qubit {
    basis: u8,
    value: u8,
    measured: bool,
}

impl Qubit {
    /// Prepare a fresh qubit in the given basis with the given value.
    pub fn prepare(basis: u8, value: u8) -> Result<Self> {
        if basis > 1 || value > 1 {
            return Err(Error::InvalidArgument(
                "basis and value must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            basis,
            value,
            measured: false,
        })
    }

    /// Single-particle measurement in `basis`. Consumes the qubit: a second
    /// measurement errors.
    pub fn measure<R: Rng + ?Sized>(&mut self, basis: u8, rng: &mut R) -> Result<u8> {
        if basis > 1 {
            return Err(Error::InvalidArgument("basis must be 0 or 1".into()));
        }
        if self.measured {
            return Err(Error::ProtocolViolation(
                "qubit measured twice".into(),
            ));
        }
        self.measured = true;
        if basis == self.basis {
            Ok(self.value)
        } else {
            Ok(rng.random::<bool>() as u8)
        }
    }

    fn flip_value(&mut self) {
        self.value ^= 1;
    }
}

/// Prepare one qubit per position: qubit j is basis_bits[j], value_bits[j].
pub fn encode(basis_bits: &BitString, value_bits: &BitString) -> Result<Vec<Qubit>> {
    if basis_bits.len() != value_bits.len() || basis_bits.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "basis/value length mismatch or empty: {} vs {}",
            basis_bits.len(),
            value_bits.len()
        )));
    }
    basis_bits
        .iter()
        .zip(value_bits.iter())
        .map(|(b, v)| Qubit::prepare(b, v))
        .collect()
}

/// Channel model: independent per-qubit loss, then a value flip that shows
/// up when the receiver later measures in the correct basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumChannelConfig {
    #[serde(default)]
    pub loss_prob: f64,
    #[serde(default)]
    pub flip_prob: f64,
}

impl Default for QuantumChannelConfig {
    fn default() -> Self {
        Self {
            loss_prob: 0.0,
            flip_prob: 0.0,
        }
    }
}

impl QuantumChannelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("loss_prob", self.loss_prob), ("flip_prob", self.flip_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

/// In-line channel adversary. Receives each delivered qubit (after the loss
/// draw: lost qubits give an attacker nothing) and returns whatever it
/// forwards to the receiver.
pub trait Interceptor {
    fn intercept(&mut self, index: usize, qubit: Qubit, rng: &mut SimRng) -> Qubit;
}

/// What came out of the channel: surviving original positions, in order,
/// with the post-channel qubits aligned to them.
#[derive(Debug)]
pub struct TransmissionReport {
    pub delivered_indices: Vec<usize>,
    pub qubits: Vec<Qubit>,
}

impl TransmissionReport {
    pub fn delivered(&self) -> usize {
        self.delivered_indices.len()
    }
}

/// Push a qubit sequence through the channel. Loss is not an error; the
/// report tells the receiver which positions arrived.
pub fn transmit(
    qubits: Vec<Qubit>,
    cfg: &QuantumChannelConfig,
    mut interceptor: Option<&mut dyn Interceptor>,
    rng: &mut SimRng,
) -> Result<TransmissionReport> {
    cfg.validate()?;
    let mut delivered_indices = Vec::with_capacity(qubits.len());
    let mut delivered = Vec::with_capacity(qubits.len());
    for (i, q) in qubits.into_iter().enumerate() {
        if cfg.loss_prob > 0.0 && rng.random::<f64>() < cfg.loss_prob {
            continue;
        }
        let mut q = match interceptor.as_deref_mut() {
            Some(eve) => eve.intercept(i, q, rng),
            None => q,
        };
        if cfg.flip_prob > 0.0 && rng.random::<f64>() < cfg.flip_prob {
            q.flip_value();
        }
        delivered_indices.push(i);
        delivered.push(q);
    }
    Ok(TransmissionReport {
        delivered_indices,
        qubits: delivered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed_rng;

    #[test]
    fn encode_pairs_positionally() {
        let basis = BitString::parse("0110").unwrap();
        let value = BitString::parse("1011").unwrap();
        let qubits = encode(&basis, &value).unwrap();
        assert_eq!(qubits.len(), 4);
        let expected = [(0, 1), (1, 0), (1, 1), (0, 1)];
        for (q, (b, v)) in qubits.iter().zip(expected) {
            assert_eq!((q.basis, q.value), (b, v));
        }
        // identity and Hadamard single cases
        let q = encode(&BitString::parse("0").unwrap(), &BitString::parse("0").unwrap()).unwrap();
        assert_eq!((q[0].basis, q[0].value), (0, 0));
        let q = encode(&BitString::parse("1").unwrap(), &BitString::parse("0").unwrap()).unwrap();
        assert_eq!((q[0].basis, q[0].value), (1, 0));
    }

    #[test]
    fn encode_rejects_length_mismatch() {
        let basis = BitString::parse("01").unwrap();
        let value = BitString::parse("011").unwrap();
        assert!(encode(&basis, &value).is_err());
    }

    #[test]
    fn matched_basis_measurement_is_deterministic() {
        let mut rng = seed_rng(1);
        let mut q = Qubit::prepare(0, 1).unwrap();
        assert_eq!(q.measure(0, &mut rng).unwrap(), 1);
    }

    #[test]
    fn double_measurement_is_a_protocol_violation() {
        let mut rng = seed_rng(2);
        let mut q = Qubit::prepare(1, 0).unwrap();
        q.measure(1, &mut rng).unwrap();
        assert!(matches!(
            q.measure(1, &mut rng),
            Err(crate::Error::ProtocolViolation(_))
        ));
    }

    // Monte-Carlo against the Bernoulli(1/2) oracle: mismatched-basis
    // outcomes are fair coin flips.
    #[test]
    fn mismatched_basis_is_a_fair_coin() {
        let mut rng = seed_rng(11);
        let trials = 100_000;
        let mut ones = 0usize;
        for _ in 0..trials {
            let mut q = Qubit::prepare(1, 1).unwrap();
            ones += q.measure(0, &mut rng).unwrap() as usize;
        }
        let frac = ones as f64 / trials as f64;
        assert!((frac - 0.5).abs() < 0.01, "fraction of ones {frac}");
    }

    // Mismatched-basis outcomes carry no information about the encoded
    // value: compare outcome distributions for value 0 vs value 1.
    #[test]
    fn mismatched_outcomes_independent_of_value() {
        let mut rng = seed_rng(13);
        let trials = 50_000;
        let mut ones = [0usize; 2];
        for value in 0..2u8 {
            for _ in 0..trials {
                let mut q = Qubit::prepare(0, value).unwrap();
                ones[value as usize] += q.measure(1, &mut rng).unwrap() as usize;
            }
        }
        // chi-squared on the 2x2 table at desk scale
        let p0 = ones[0] as f64 / trials as f64;
        let p1 = ones[1] as f64 / trials as f64;
        assert!((p0 - p1).abs() < 0.015, "p0={p0} p1={p1}");
    }

    #[test]
    fn identity_channel_delivers_everything() {
        let mut rng = seed_rng(21);
        let basis = BitString::random(64, &mut rng);
        let value = BitString::random(64, &mut rng);
        let qubits = encode(&basis, &value).unwrap();
        let cfg = QuantumChannelConfig::default();
        let report = transmit(qubits, &cfg, None, &mut rng).unwrap();
        assert_eq!(report.delivered_indices, (0..64).collect::<Vec<_>>());
        // matched-basis measurement reproduces the values bit for bit
        let mut report = report;
        for (slot, &pos) in report.delivered_indices.clone().iter().enumerate() {
            let out = report.qubits[slot].measure(basis.bit(pos), &mut rng).unwrap();
            assert_eq!(out, value.bit(pos));
        }
    }

    #[test]
    fn total_loss_delivers_nothing() {
        let mut rng = seed_rng(22);
        let qubits = encode(
            &BitString::random(16, &mut rng),
            &BitString::random(16, &mut rng),
        )
        .unwrap();
        let cfg = QuantumChannelConfig {
            loss_prob: 1.0,
            flip_prob: 0.0,
        };
        let report = transmit(qubits, &cfg, None, &mut rng).unwrap();
        assert!(report.delivered_indices.is_empty());
        assert!(report.qubits.is_empty());
    }

    // Binomial oracle: survivors of a 10% loss channel over 10^4 qubits.
    #[test]
    fn loss_matches_binomial_bound() {
        let mut rng = seed_rng(23);
        let n = 10_000usize;
        let qubits = encode(
            &BitString::random(n, &mut rng),
            &BitString::random(n, &mut rng),
        )
        .unwrap();
        let cfg = QuantumChannelConfig {
            loss_prob: 0.1,
            flip_prob: 0.0,
        };
        let report = transmit(qubits, &cfg, None, &mut rng).unwrap();
        let expected = n as f64 * 0.9;
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        let got = report.delivered() as f64;
        assert!(
            (got - expected).abs() <= 3.0 * sd,
            "delivered {got}, expected {expected} +- {}",
            3.0 * sd
        );
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let cfg = QuantumChannelConfig {
            loss_prob: 1.5,
            flip_prob: 0.0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn transmit_is_deterministic_per_seed() {
        let run = |seed: u64| {
            let mut rng = seed_rng(seed);
            let basis = BitString::random(128, &mut rng);
            let value = BitString::random(128, &mut rng);
            let qubits = encode(&basis, &value).unwrap();
            let cfg = QuantumChannelConfig {
                loss_prob: 0.2,
                flip_prob: 0.05,
            };
            transmit(qubits, &cfg, None, &mut rng).unwrap().delivered_indices
        };
        assert_eq!(run(77), run(77));
    }
}
