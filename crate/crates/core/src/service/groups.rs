use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Delay,
    RealTime,
    RealTimeWithNudge,
}

impl Group {
    pub fn sees_immediately(self) -> bool {
        !matches!(self, Group::Delay)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("group weights must each lie in [0, 1] and sum to 1, got {delay}/{realtime}/{nudge}")]
pub struct InvalidWeights {
    pub delay: f64,
    pub realtime: f64,
    pub nudge: f64,
}

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Fractions of students per group. Sum is 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub delay: f64,
    pub realtime: f64,
    pub nudge: f64,
}

impl Default for GroupWeights {
    fn default() -> Self {
        Self { delay: 0.10, realtime: 0.45, nudge: 0.45 }
    }
}

impl GroupWeights {
    pub fn new(delay: f64, realtime: f64, nudge: f64) -> Result<Self, InvalidWeights> {
        let w = Self { delay, realtime, nudge };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), InvalidWeights> {
        let all = [self.delay, self.realtime, self.nudge];
        let in_range = all.iter().all(|w| w.is_finite() && (0.0..=1.0).contains(w));
        if in_range && (all.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOLERANCE {
            Ok(())
        } else {
            Err(InvalidWeights { delay: self.delay, realtime: self.realtime, nudge: self.nudge })
        }
    }
}

/// Stable point in [0, 1): SHA-256 of the little-endian seed followed by the
/// id, first 8 bytes as a big-endian integer over 2^64.
pub fn unit_hash(student_id: &str, seed: u64) -> f64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(student_id.as_bytes());
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    // 53 high bits keep the result strictly below 1.
    (u64::from_be_bytes(first) >> 11) as f64 / (1u64 << 53) as f64
}

pub fn assign_group(student_id: &str, weights: &GroupWeights, seed: u64) -> Result<Group, InvalidWeights> {
    weights.validate()?;
    let u = unit_hash(student_id, seed);
    Ok(if u < weights.delay {
        Group::Delay
    } else if u < weights.delay + weights.realtime {
        Group::RealTime
    } else {
        Group::RealTimeWithNudge
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validation() {
        assert!(GroupWeights::new(0.1, 0.45, 0.45).is_ok());
        assert!(GroupWeights::new(0.5, 0.45, 0.45).is_err());
        assert!(GroupWeights::new(-0.1, 0.65, 0.45).is_err());
        assert!(GroupWeights::new(f64::NAN, 0.5, 0.5).is_err());
    }

    #[test]
    fn degenerate_weights() {
        let all_delay = GroupWeights::new(1.0, 0.0, 0.0).unwrap();
        let all_nudge = GroupWeights::new(0.0, 0.0, 1.0).unwrap();
        for i in 0..200 {
            let id = format!("s{i}");
            assert_eq!(assign_group(&id, &all_delay, 7).unwrap(), Group::Delay);
            assert_eq!(assign_group(&id, &all_nudge, 7).unwrap(), Group::RealTimeWithNudge);
        }
    }

    #[test]
    fn hash_is_stable() {
        // Independent recomputation of the documented construction.
        let mut bytes = 42u64.to_le_bytes().to_vec();
        bytes.extend_from_slice(b"student-1");
        let d = Sha256::digest(&bytes);
        let n = u64::from_be_bytes(d[..8].try_into().unwrap());
        assert_eq!(unit_hash("student-1", 42), (n >> 11) as f64 / 9007199254740992.0);
        assert!(unit_hash("student-1", 42) != unit_hash("student-1", 43));
    }
}
