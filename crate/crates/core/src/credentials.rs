//! Pre-shared credential bundles.
//!
//! An AQKD user holds (p || x || y || z): p is the m-bit request token the
//! administrator checks, x is the single-use token the counter checks, y
//! seals the basis confirmation, and z is the one-time pad that encrypts
//! (y || r3). Since r3 is 2m bits, z must be 5m bits for the pad lengths to
//! work out, making the bundle 12m bits total.
//!
//! A voter's bundle (k || a || b || c) maps onto the same roles: k
//! authenticates the voter to the administrator, and (a, b, c) play
//! (x, y, z) in the per-voter key distribution session.

use serde::{Deserialize, Serialize};

use crate::{bits::BitString, Error, Result, SimRng};

/// Per-session AQKD credential, parameterized by the security parameter m.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AqkdCredential {
    /// Request token, m bits.
    pub p: BitString,
    /// Single-use session token, 3m bits.
    pub x: BitString,
    /// Confirmation witness, 3m bits.
    pub y: BitString,
    /// One-time pad for the sealed confirmation, 5m bits.
    pub z: BitString,
}

impl AqkdCredential {
    pub fn generate(m: usize, rng: &mut SimRng) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("security parameter m must be positive".into()));
        }
        Ok(Self {
            p: BitString::random(m, rng),
            x: BitString::random(3 * m, rng),
            y: BitString::random(3 * m, rng),
            z: BitString::random(5 * m, rng),
        })
    }

    /// Build from voter material: (a, b, c) take the (x, y, z) roles, with
    /// a fresh request token.
    pub fn from_parts(p: BitString, x: BitString, y: BitString, z: BitString) -> Result<Self> {
        let m = p.len();
        if m == 0 || x.len() != 3 * m || y.len() != 3 * m || z.len() != 5 * m {
            return Err(Error::InvalidArgument(format!(
                "credential component lengths ({}, {}, {}, {}) inconsistent",
                p.len(),
                x.len(),
                y.len(),
                z.len()
            )));
        }
        Ok(Self { p, x, y, z })
    }

    /// Security parameter.
    pub fn m(&self) -> usize {
        self.p.len()
    }
}

/// Voter credential established with the administrator before the election.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoterCredential {
    /// Authentication token, m bits.
    pub k: BitString,
    /// Takes the x role in the voter's key distribution session, 3m bits.
    pub a: BitString,
    /// Takes the y role, 3m bits.
    pub b: BitString,
    /// Takes the z role, 5m bits.
    pub c: BitString,
}

impl VoterCredential {
    pub fn generate(m: usize, rng: &mut SimRng) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("security parameter m must be positive".into()));
        }
        Ok(Self {
            k: BitString::random(m, rng),
            a: BitString::random(3 * m, rng),
            b: BitString::random(3 * m, rng),
            c: BitString::random(5 * m, rng),
        })
    }

    pub fn m(&self) -> usize {
        self.k.len()
    }
}
