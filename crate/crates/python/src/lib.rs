//! Python bindings: bit strings, the one-time pad and repetition code,
//! detection-rate estimation, and the scenario runner. Everything heavy
//! stays in the core crate; this layer translates types and errors.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use aqkd_core::{
    bits::BitString,
    ecc::RepetitionCode,
    harness::{self, Scenario},
    otp,
    qubit::QuantumChannelConfig,
    seed_rng,
    transcript::Transcript,
};

fn err(e: aqkd_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// An explicit-length bit string. Serializes as lowercase hex plus length.
#[pyclass(name = "Bits", skip_from_py_object)]
#[derive(Clone)]
struct Bits {
    inner: BitString,
}

#[pymethods]
impl Bits {
    /// Parse from a binary string like "0110".
    #[new]
    fn new(binary: &str) -> PyResult<Self> {
        Ok(Self {
            inner: BitString::parse(binary).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_hex(hex: &str, len: usize) -> PyResult<Self> {
        Ok(Self {
            inner: BitString::from_hex(hex, len).map_err(err)?,
        })
    }

    /// n uniform bits from a seeded generator.
    #[staticmethod]
    fn random(n: usize, seed: u64) -> Self {
        let mut rng = seed_rng(seed);
        Self {
            inner: BitString::random(n, &mut rng),
        }
    }

    fn hex(&self) -> String {
        self.inner.to_hex()
    }

    fn xor(&self, other: &Bits) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.xor(&other.inner).map_err(err)?,
        })
    }

    fn concat(&self, other: &Bits) -> Self {
        Self {
            inner: self.inner.concat(&other.inner),
        }
    }

    fn count_ones(&self) -> usize {
        self.inner.count_ones()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Bits('{}')", self.inner)
    }

    fn __eq__(&self, other: &Bits) -> bool {
        self.inner == other.inner
    }
}

/// One-time-pad encryption (XOR with an equal-length pad). Its own inverse.
#[pyfunction]
fn otp_encrypt(pad: &Bits, message: &Bits) -> PyResult<Bits> {
    Ok(Bits {
        inner: otp::otp_encrypt(&pad.inner, &message.inner).map_err(err)?,
    })
}

/// Repetition-code encode: each payload bit repeated r times.
#[pyfunction]
fn ecc_encode(payload: &Bits, r: usize) -> PyResult<Bits> {
    let code = RepetitionCode::new(r).map_err(err)?;
    Ok(Bits {
        inner: code.encode(&payload.inner).map_err(err)?,
    })
}

/// Repetition-code decode by per-block majority.
#[pyfunction]
fn ecc_decode(codeword: &Bits, r: usize) -> PyResult<Bits> {
    let code = RepetitionCode::new(r).map_err(err)?;
    Ok(Bits {
        inner: code.decode(&codeword.inner).map_err(err)?,
    })
}

/// Run a scenario (JSON text) and return (report_json, transcript_jsonl).
#[pyfunction]
fn run_scenario(scenario_json: &str) -> PyResult<(String, String)> {
    let scenario = Scenario::from_json(scenario_json).map_err(err)?;
    let (report, transcript) = harness::run_scenario(&scenario).map_err(err)?;
    Ok((
        serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))?,
        transcript.to_jsonl().map_err(err)?,
    ))
}

/// Check a transcript (JSONL text); returns the violation messages.
#[pyfunction]
fn verify_transcript(transcript_jsonl: &str) -> PyResult<Vec<String>> {
    let transcript = Transcript::from_jsonl(transcript_jsonl).map_err(err)?;
    Ok(harness::verify_transcript(&transcript))
}

/// Detection rate of an intercept-resend attacker over seeded trials.
/// Returns (detections, trials, rate, wilson_lower, wilson_upper).
#[pyfunction]
#[pyo3(signature = (m, fraction, trials, seed, loss_prob=0.0, flip_prob=0.0, tolerance=0.05))]
fn detection_rate(
    m: usize,
    fraction: f64,
    trials: u64,
    seed: u64,
    loss_prob: f64,
    flip_prob: f64,
    tolerance: f64,
) -> PyResult<(u64, u64, f64, f64, f64)> {
    let channel = QuantumChannelConfig {
        loss_prob,
        flip_prob,
    };
    let est = harness::estimate_detection_rate(m, &channel, fraction, tolerance, trials, seed)
        .map_err(err)?;
    Ok((est.detections, est.trials, est.rate, est.lower, est.upper))
}

#[pymodule]
fn aqkd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Bits>()?;
    m.add_function(wrap_pyfunction!(otp_encrypt, m)?)?;
    m.add_function(wrap_pyfunction!(ecc_encode, m)?)?;
    m.add_function(wrap_pyfunction!(ecc_decode, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(verify_transcript, m)?)?;
    m.add_function(wrap_pyfunction!(detection_rate, m)?)?;
    Ok(())
}
