//! Ordered log of every message on every channel. The transcript is the
//! evidence base for the privacy, fairness, and verifiability assertions:
//! anonymous-channel records never carry a sender identity, and the public
//! subset alone suffices to recompute the tally.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// Confidential and authenticated point-to-point classical channel.
    Authenticated,
    /// Anonymous classical channel: shuffled delivery, sender stripped.
    AnonymousClassical,
    /// Anonymous quantum channel.
    AnonymousQuantum,
    /// Publicly readable broadcast.
    PublicBroadcast,
}

impl Channel {
    pub fn is_anonymous(&self) -> bool {
        matches!(self, Channel::AnonymousClassical | Channel::AnonymousQuantum)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    User,
    Bob,
    Charlie,
    Adversary,
}

/// One logged event. `sender`/`recipient` are roles, never identities; on
/// anonymous channels the sender is absent entirely (adversary injections
/// are tagged, as a simulator annotation no party can observe).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub trial: u64,
    pub round: u32,
    pub step: String,
    pub channel: Channel,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sender: Option<Role>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recipient: Option<Role>,
    pub payload: Value,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Transcript {
    records: Vec<Record>,
    trial: u64,
    round: u32,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_trial(&mut self, trial: u64) {
        self.trial = trial;
        self.round = 0;
    }

    pub fn set_round(&mut self, round: u32) {
        self.round = round;
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    /// Append a record. Honest senders on anonymous channels must pass
    /// `None`; the only tolerated tag there is the adversary annotation.
    pub fn record(
        &mut self,
        step: &str,
        channel: Channel,
        sender: Option<Role>,
        recipient: Option<Role>,
        payload: Value,
    ) {
        debug_assert!(
            !channel.is_anonymous() || sender.is_none() || sender == Some(Role::Adversary),
            "anonymous channel record with a sender"
        );
        self.records.push(Record {
            trial: self.trial,
            round: self.round,
            step: step.to_string(),
            channel,
            sender,
            recipient,
            payload,
        });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records on the public broadcast channel only.
    pub fn public_records(&self) -> impl Iterator<Item = &Record> {
        self.records
            .iter()
            .filter(|r| r.channel == Channel::PublicBroadcast)
    }

    /// Line-delimited JSON, one record per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line).map_err(|e| {
                Error::InvalidArgument(format!("transcript line {}: {e}", i + 1))
            })?;
            records.push(record);
        }
        Ok(Self {
            records,
            trial: 0,
            round: 0,
        })
    }
}
