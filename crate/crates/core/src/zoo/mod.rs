//! Catalog of seeded solver faults, organised by mutation-operator category,
//! plus equivalence filtering against the reference solver.

mod catalog;
mod pipeline;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::harness::{self, SutHandle, SutStatus};

pub use catalog::{catalog, manifest_json, parse_fault_list, Category, Fault, FaultSpec, Stage};
pub use pipeline::{run_pipeline, Halt};

/// In-process SUT running the faulty pipeline.
pub fn instantiate(spec: &FaultSpec) -> Result<SutHandle> {
    Ok(SutHandle::fault(spec.fault()?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub fault: Fault,
    pub equivalent: bool,
    /// Probes run; for a non-equivalent fault the last one is the first that differed.
    pub probes_used: usize,
}

fn same_output(a: &SutStatus, b: &SutStatus) -> bool {
    match (a, b) {
        (SutStatus::Ok { beta: x }, SutStatus::Ok { beta: y }) => {
            x.len() == y.len() && x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits())
        }
        _ => a == b,
    }
}

/// Marks a fault equivalent when its output matches the reference bit for bit
/// on every probe. Stops at the first differing probe.
pub fn filter_equivalents(faults: &[Fault], probes: &[Dataset]) -> Result<Vec<EquivalenceReport>> {
    let reference = SutHandle::reference();
    let mut baselines = Vec::with_capacity(probes.len());
    for ds in probes {
        let mut h = reference.clone();
        harness::calibrate(&mut h, ds)?;
        let out = harness::execute(&h, ds)?;
        baselines.push((h.baseline_runtime.expect("calibrated"), out.status));
    }
    faults
        .iter()
        .map(|&fault| {
            let sut = SutHandle::fault(fault);
            for (i, (ds, (baseline, expected))) in probes.iter().zip(&baselines).enumerate() {
                let out = harness::execute(&sut.with_baseline(*baseline), ds)?;
                if !same_output(&out.status, expected) {
                    return Ok(EquivalenceReport { fault, equivalent: false, probes_used: i + 1 });
                }
            }
            Ok(EquivalenceReport { fault, equivalent: true, probes_used: probes.len() })
        })
        .collect()
}

/// Number of faults still distinguishable after `1..=max_probes` probes.
pub fn sensitivity_curve(reports: &[EquivalenceReport], max_probes: usize) -> Vec<usize> {
    (1..=max_probes).map(|m| reports.iter().filter(|r| !r.equivalent && r.probes_used <= m).count()).collect()
}
