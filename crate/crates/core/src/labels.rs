//! Aggregation of crowdsourced worker votes into binary image labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("record {image_id}: {votes} positive votes out of {workers} workers")]
    InvalidRecord { image_id: String, votes: u32, workers: u32 },
    #[error("scheme C needs at least one record")]
    Empty,
}

/// `votes` of `workers` marked the image as showing the class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub image_id: String,
    pub votes: u32,
    pub workers: u32,
}

impl VoteRecord {
    pub fn new(image_id: impl Into<String>, votes: u32, workers: u32) -> Result<Self, LabelError> {
        let r = VoteRecord {
            image_id: image_id.into(),
            votes,
            workers,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), LabelError> {
        if self.workers == 0 || self.votes > self.workers {
            return Err(LabelError::InvalidRecord {
                image_id: self.image_id.clone(),
                votes: self.votes,
                workers: self.workers,
            });
        }
        Ok(())
    }

    pub fn ratio(&self) -> f64 {
        f64::from(self.votes) / f64::from(self.workers)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// More than one positive vote.
    A,
    /// More than two positive votes.
    B,
    /// More than one positive vote and a vote ratio above the population median.
    C,
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Scheme::A),
            "B" => Ok(Scheme::B),
            "C" => Ok(Scheme::C),
            _ => Err(format!("unknown scheme {s:?}, expected A, B or C")),
        }
    }
}

/// Median of the vote ratios; mean of the two central values for even counts.
pub fn median_ratio(records: &[VoteRecord]) -> Option<f64> {
    if records.is_empty() {
        return None;
    }
    let mut r: Vec<f64> = records.iter().map(VoteRecord::ratio).collect();
    r.sort_by(f64::total_cmp);
    let n = r.len();
    Some(if n % 2 == 1 {
        r[n / 2]
    } else {
        0.5 * (r[n / 2 - 1] + r[n / 2])
    })
}

/// Label per image id. Records sharing an id are resolved in favor of a positive label.
pub fn aggregate(records: &[VoteRecord], scheme: Scheme) -> Result<BTreeMap<String, bool>, LabelError> {
    for r in records {
        r.validate()?;
    }
    let median = match scheme {
        Scheme::C => Some(median_ratio(records).ok_or(LabelError::Empty)?),
        _ => None,
    };
    let mut out = BTreeMap::new();
    for r in records {
        let positive = match scheme {
            Scheme::A => r.votes > 1,
            Scheme::B => r.votes > 2,
            Scheme::C => r.votes > 1 && r.ratio() > median.unwrap_or(f64::INFINITY),
        };
        *out.entry(r.image_id.clone()).or_insert(false) |= positive;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, b: u32, w: u32) -> VoteRecord {
        VoteRecord::new(id, b, w).unwrap()
    }

    #[test]
    fn two_of_three() {
        let r = [rec("x", 2, 3)];
        assert!(aggregate(&r, Scheme::A).unwrap()["x"]);
        assert!(!aggregate(&r, Scheme::B).unwrap()["x"]);
    }

    #[test]
    fn median_is_strict() {
        let r = [
            rec("a", 0, 5),
            rec("b", 1, 5),
            rec("c", 2, 5),
            rec("d", 3, 5),
            rec("e", 4, 5),
        ];
        assert_eq!(median_ratio(&r), Some(0.4));
        let c = aggregate(&r, Scheme::C).unwrap();
        assert!(c["d"]);
        assert!(!c["c"]);
    }

    #[test]
    fn even_median_averages_center() {
        let r = [rec("a", 0, 4), rec("b", 2, 4), rec("c", 3, 4), rec("d", 4, 4)];
        assert_eq!(median_ratio(&r), Some(0.625));
        let c = aggregate(&r, Scheme::C).unwrap();
        assert!(!c["b"]);
        assert!(c["c"] && c["d"]);
    }

    #[test]
    fn invalid_and_empty() {
        assert!(VoteRecord::new("x", 4, 3).is_err());
        assert!(VoteRecord::new("x", 0, 0).is_err());
        assert_eq!(aggregate(&[], Scheme::C), Err(LabelError::Empty));
        assert!(aggregate(&[], Scheme::A).unwrap().is_empty());
    }
}
