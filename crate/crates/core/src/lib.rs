//! Metamorphic testing of ordinary-least-squares regression.
//!
//! The crate provides a reference Householder-QR solver with a first-order
//! forward-error bound ([`linreg`], [`bounds`]), a random dataset generator
//! ([`gen`]), the eleven metamorphic relations and their verdicts ([`mr`]), a
//! driver for in-process and external systems under test ([`harness`]), a zoo
//! of seeded solver faults ([`zoo`]) and campaign orchestration with
//! ratio-of-violation reporting ([`campaign`]).

pub mod bounds;
pub mod campaign;
pub mod dataset;
pub mod error;
pub mod gen;
pub mod harness;
pub mod linreg;
pub mod mr;
pub mod zoo;

pub use bounds::{BoundConfig, ErrorBound};
pub use campaign::{CampaignConfig, CampaignReport, SutSpec};
pub use dataset::{Dataset, NewPoint, Sidecar};
pub use error::{Error, Result};
pub use gen::{GenSpec, GeneratedDataset};
pub use harness::{SutHandle, SutOutcome, SutStatus};
pub use linreg::Estimator;
pub use mr::{Form, MetamorphicTestGroup, MrId, TransformSpec, Verdict};
pub use zoo::{Category, Fault, FaultSpec};
