use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mr::Verdict;

/// Verdict counts for one (SUT, MR) cell or an aggregate of cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub satisfied: usize,
    pub violated: usize,
    pub source_failed: usize,
    pub followup_failed: usize,
    pub inapplicable: usize,
}

impl Tally {
    pub fn record(&mut self, v: &Verdict) {
        match v {
            Verdict::Satisfied(_) => self.satisfied += 1,
            Verdict::Violated(_) => self.violated += 1,
            Verdict::SourceFailure { .. } => self.source_failed += 1,
            Verdict::FollowupFailure { .. } => self.followup_failed += 1,
            Verdict::Inapplicable => self.inapplicable += 1,
        }
    }

    pub fn merge(&mut self, o: &Tally) {
        self.satisfied += o.satisfied;
        self.violated += o.violated;
        self.source_failed += o.source_failed;
        self.followup_failed += o.followup_failed;
        self.inapplicable += o.inapplicable;
    }

    pub fn survived(&self) -> usize {
        self.satisfied + self.violated
    }

    /// Pairs that were executed (inapplicable pairs are not).
    pub fn pairs(&self) -> usize {
        self.survived() + self.source_failed + self.followup_failed
    }

    /// Runtime failure on either input, or a violation.
    pub fn failed_pairs(&self) -> usize {
        self.violated + self.source_failed + self.followup_failed
    }

    pub fn total(&self) -> usize {
        self.pairs() + self.inapplicable
    }

    pub fn ratio_of_violation(&self) -> Option<f64> {
        ratio_of_violation(self).ok()
    }

    pub fn extended_ratio(&self) -> Option<f64> {
        extended_ratio(self.failed_pairs(), self.pairs())
    }
}

/// Violations over survived pairs.
pub fn ratio_of_violation(t: &Tally) -> Result<f64> {
    if t.survived() == 0 {
        return Err(Error::NoSurvivedPairs);
    }
    Ok(t.violated as f64 / t.survived() as f64)
}

/// Failed pairs over all pairs; `None` when there are no pairs.
pub fn extended_ratio(failed: usize, pairs: usize) -> Option<f64> {
    (pairs > 0).then(|| failed as f64 / pairs as f64)
}

/// Median of the defined values; `None` if there are none.
pub fn median(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().flatten().collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}
