//! One-time-pad encryption: XOR with a single-use key of equal length.

use std::collections::BTreeSet;

use crate::{bits::BitString, Error, Result};

/// Encrypt `msg` under `key`. Errors on length mismatch.
pub fn otp_encrypt(key: &BitString, msg: &BitString) -> Result<BitString> {
    if key.len() != msg.len() {
        return Err(Error::InvalidArgument(format!(
            "one-time pad key length {} does not match message length {}",
            key.len(),
            msg.len()
        )));
    }
    key.xor(msg)
}

/// Decryption is the same XOR.
pub fn otp_decrypt(key: &BitString, cipher: &BitString) -> Result<BitString> {
    otp_encrypt(key, cipher)
}

/// Strict-mode pad registry: rejects any key value used twice within one
/// scenario instance.
#[derive(Debug, Default)]
pub struct PadTracker {
    used: BTreeSet<BitString>,
}

impl PadTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Encrypt, recording the pad; a second use of the same pad is a
    /// protocol violation.
    pub fn encrypt(&mut self, key: &BitString, msg: &BitString) -> Result<BitString> {
        if !self.used.insert(key.clone()) {
            return Err(Error::ProtocolViolation("one-time pad reused".into()));
        }
        otp_encrypt(key, msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed_rng;

    #[test]
    fn zero_key_is_identity() {
        let key = BitString::parse("0000").unwrap();
        let msg = BitString::parse("1011").unwrap();
        assert_eq!(otp_encrypt(&key, &msg).unwrap(), msg);
    }

    #[test]
    fn known_xor() {
        let key = BitString::parse("1100").unwrap();
        let msg = BitString::parse("1010").unwrap();
        assert_eq!(otp_encrypt(&key, &msg).unwrap().to_string(), "0110");
    }

    #[test]
    fn encrypt_is_an_involution() {
        let mut rng = seed_rng(9);
        let key = BitString::random(128, &mut rng);
        let msg = BitString::random(128, &mut rng);
        let cipher = otp_encrypt(&key, &msg).unwrap();
        assert_eq!(otp_decrypt(&key, &cipher).unwrap(), msg);
    }

    #[test]
    fn length_mismatch_rejected() {
        let key = BitString::parse("10").unwrap();
        let msg = BitString::parse("101").unwrap();
        assert!(otp_encrypt(&key, &msg).is_err());
    }

    #[test]
    fn pad_reuse_rejected_in_strict_mode() {
        let mut tracker = PadTracker::new();
        let key = BitString::parse("1100").unwrap();
        let msg = BitString::parse("1010").unwrap();
        tracker.encrypt(&key, &msg).unwrap();
        assert!(matches!(
            tracker.encrypt(&key, &msg),
            Err(Error::ProtocolViolation(_))
        ));
    }
}
