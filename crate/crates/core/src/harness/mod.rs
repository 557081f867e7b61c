//! Uniform driver for systems under test.
//!
//! Every execution maps to exactly one [`SutStatus`]. Environment problems
//! (temp files, a command that cannot be spawned) surface as
//! [`Error::HarnessIo`] instead, so they are never mistaken for SUT failures.

mod external;

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linreg;
use crate::zoo::{self, Fault};

pub use external::IoMode;

/// Environment variable overriding [`DEFAULT_TIMEOUT_FACTOR`].
pub const TIMEOUT_FACTOR_ENV: &str = "MTLR_TIMEOUT_FACTOR";
pub const DEFAULT_TIMEOUT_FACTOR: f64 = 1000.0;
/// Runs used by [`calibrate`].
pub const CALIBRATION_RUNS: usize = 5;

/// Lower bounds on the deadline; sub-millisecond baselines would otherwise
/// turn scheduler noise into timeouts.
const MIN_DEADLINE_IN_PROCESS: Duration = Duration::from_millis(20);
const MIN_DEADLINE_EXTERNAL: Duration = Duration::from_secs(2);
/// Per-run cap while calibrating an external program.
const CALIBRATION_CAP_EXTERNAL: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Reference,
    Fault(Fault),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SutKind {
    InProcess {
        solver: Solver,
    },
    /// Run without a shell; the dataset path is appended to `args` in
    /// [`IoMode::PathArg`].
    External {
        command: String,
        args: Vec<String>,
        io_mode: IoMode,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SutHandle {
    pub kind: SutKind,
    pub timeout_factor: f64,
    pub baseline_runtime: Option<Duration>,
}

/// `MTLR_TIMEOUT_FACTOR` if set to a number above 1, else the default.
pub fn timeout_factor_from_env() -> f64 {
    std::env::var(TIMEOUT_FACTOR_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|f| *f > 1.0 && f.is_finite())
        .unwrap_or(DEFAULT_TIMEOUT_FACTOR)
}

impl SutHandle {
    pub fn new(kind: SutKind) -> Self {
        Self { kind, timeout_factor: timeout_factor_from_env(), baseline_runtime: None }
    }

    pub fn reference() -> Self {
        Self::new(SutKind::InProcess { solver: Solver::Reference })
    }

    pub fn fault(fault: Fault) -> Self {
        Self::new(SutKind::InProcess { solver: Solver::Fault(fault) })
    }

    pub fn external(command: impl Into<String>, args: Vec<String>) -> Self {
        Self::new(SutKind::External { command: command.into(), args, io_mode: IoMode::PathArg })
    }

    pub fn with_timeout_factor(mut self, factor: f64) -> Result<Self> {
        if !(factor > 1.0 && factor.is_finite()) {
            return Err(Error::HarnessIo(format!("timeout factor must exceed 1, got {factor}")));
        }
        self.timeout_factor = factor;
        Ok(self)
    }

    pub fn with_baseline(&self, baseline: Duration) -> Self {
        Self { baseline_runtime: Some(baseline), ..self.clone() }
    }

    /// Short identifier used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            SutKind::InProcess { solver: Solver::Reference } => "reference".into(),
            SutKind::InProcess { solver: Solver::Fault(f) } => f.id().into(),
            SutKind::External { command, args, .. } => {
                std::iter::once(command.as_str()).chain(args.iter().map(String::as_str)).collect::<Vec<_>>().join(" ")
            }
        }
    }

    pub fn is_external(&self) -> bool {
        matches!(self.kind, SutKind::External { .. })
    }

    /// `timeout_factor × baseline`, floored per execution kind.
    pub fn deadline(&self) -> Option<Duration> {
        let base = self.baseline_runtime?;
        let floor = if self.is_external() { MIN_DEADLINE_EXTERNAL } else { MIN_DEADLINE_IN_PROCESS };
        Some(base.mul_f64(self.timeout_factor).max(floor))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SutStatus {
    Ok { beta: Vec<f64> },
    Crash { exit_code: Option<i32>, message: String },
    NonNumeric,
    WrongSize { expected: usize, got: usize },
    Timeout,
    Empty,
}

/// Status without payload, for verdict logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusKind {
    Ok,
    Crash,
    NonNumeric,
    WrongSize,
    Timeout,
    Empty,
}

impl SutStatus {
    pub fn kind(&self) -> StatusKind {
        match self {
            Self::Ok { .. } => StatusKind::Ok,
            Self::Crash { .. } => StatusKind::Crash,
            Self::NonNumeric => StatusKind::NonNumeric,
            Self::WrongSize { .. } => StatusKind::WrongSize,
            Self::Timeout => StatusKind::Timeout,
            Self::Empty => StatusKind::Empty,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Self::Ok { .. })
    }

    pub fn beta(&self) -> Option<&[f64]> {
        match self {
            Self::Ok { beta } => Some(beta),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SutOutcome {
    pub status: SutStatus,
    pub runtime: Duration,
}

/// Raw result of a run before classification.
#[derive(Debug)]
pub(crate) enum Raw {
    Values(Vec<f64>),
    Unparseable,
    Halted { exit_code: Option<i32>, message: String },
    TimedOut,
}

/// Empty, then non-numeric, then size; only a well-formed vector is `Ok`.
pub(crate) fn classify(raw: Raw, expected_len: usize) -> SutStatus {
    match raw {
        Raw::TimedOut => SutStatus::Timeout,
        Raw::Halted { exit_code, message } => SutStatus::Crash { exit_code, message },
        Raw::Unparseable => SutStatus::NonNumeric,
        Raw::Values(v) if v.is_empty() => SutStatus::Empty,
        Raw::Values(v) if v.iter().any(|x| !x.is_finite()) => SutStatus::NonNumeric,
        Raw::Values(v) if v.len() != expected_len => SutStatus::WrongSize { expected: expected_len, got: v.len() },
        Raw::Values(beta) => SutStatus::Ok { beta },
    }
}

/// Runs the SUT on `ds`. Without a baseline the handle is calibrated on `ds`
/// first.
pub fn execute(sut: &SutHandle, ds: &Dataset) -> Result<SutOutcome> {
    if sut.baseline_runtime.is_none() {
        let mut calibrated = sut.clone();
        calibrate(&mut calibrated, ds)?;
        return execute(&calibrated, ds);
    }
    let deadline = sut.deadline().expect("baseline present");
    let start = Instant::now();
    let raw = match &sut.kind {
        SutKind::InProcess { solver } => run_in_process(solver, ds, start + deadline),
        SutKind::External { command, args, io_mode } => external::run(command, args, *io_mode, ds, deadline)?,
    };
    let runtime = start.elapsed();
    let raw = if runtime > deadline { Raw::TimedOut } else { raw };
    Ok(SutOutcome { status: classify(raw, ds.n_coefficients()), runtime })
}

fn run_in_process(solver: &Solver, ds: &Dataset, deadline: Instant) -> Raw {
    let result = panic::catch_unwind(AssertUnwindSafe(|| match solver {
        Solver::Reference => linreg::solve(ds).map_err(|e| zoo::Halt::Error(e.to_string())),
        Solver::Fault(f) => zoo::run_pipeline(*f, ds, deadline),
    }));
    match result {
        Ok(Ok(beta)) => Raw::Values(beta),
        Ok(Err(zoo::Halt::Error(message))) => Raw::Halted { exit_code: None, message },
        Ok(Err(zoo::Halt::Stalled)) => Raw::TimedOut,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            Raw::Halted { exit_code: None, message }
        }
    }
}

/// Sets `baseline_runtime` to the median of [`CALIBRATION_RUNS`] runs on `ds`.
///
/// In-process handles time the reference solver. External handles time the
/// program itself, since process start-up dominates and is not comparable; a
/// program that outlives the calibration cap gets the floor deadline.
pub fn calibrate(sut: &mut SutHandle, ds: &Dataset) -> Result<Duration> {
    let mut times = Vec::with_capacity(CALIBRATION_RUNS);
    for _ in 0..CALIBRATION_RUNS {
        let start = Instant::now();
        match &sut.kind {
            SutKind::InProcess { .. } => {
                let _ = std::hint::black_box(linreg::solve(std::hint::black_box(ds)));
            }
            SutKind::External { command, args, io_mode } => {
                if let Raw::TimedOut = external::run(command, args, *io_mode, ds, CALIBRATION_CAP_EXTERNAL)? {
                    break;
                }
            }
        }
        times.push(start.elapsed());
    }
    times.sort();
    let baseline = match times.len() {
        0 => MIN_DEADLINE_EXTERNAL.div_f64(sut.timeout_factor),
        len => times[len / 2],
    };
    sut.baseline_runtime = Some(baseline);
    Ok(baseline)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_points(&[(1.0, 3.0), (3.0, 7.0), (5.0, 11.0)], true).unwrap()
    }

    #[test]
    fn reference_on_the_worked_line() {
        let out = execute(&SutHandle::reference(), &line()).unwrap();
        let beta = out.status.beta().unwrap();
        assert!((beta[0] - 1.0).abs() < 1e-12 && (beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn classification_is_total_and_ordered() {
        assert_eq!(classify(Raw::Values(vec![]), 2), SutStatus::Empty);
        assert_eq!(classify(Raw::Values(vec![f64::NAN]), 2), SutStatus::NonNumeric);
        assert_eq!(classify(Raw::Values(vec![1.0]), 2), SutStatus::WrongSize { expected: 2, got: 1 });
        assert_eq!(classify(Raw::Values(vec![1.0, 2.0]), 2), SutStatus::Ok { beta: vec![1.0, 2.0] });
        assert_eq!(classify(Raw::Unparseable, 2), SutStatus::NonNumeric);
        assert_eq!(classify(Raw::TimedOut, 2), SutStatus::Timeout);
        assert!(matches!(classify(Raw::Halted { exit_code: Some(3), message: String::new() }, 2), SutStatus::Crash { .. }));
    }

    #[test]
    fn rank_deficient_input_crashes_the_reference() {
        let ds = Dataset::from_points(&[(2.0, 1.0), (2.0, 3.0), (2.0, 4.0)], true).unwrap();
        let out = execute(&SutHandle::reference(), &ds).unwrap();
        assert_eq!(out.status.kind(), StatusKind::Crash);
    }

    #[test]
    fn deadline_is_factor_times_baseline() {
        let h = SutHandle::reference().with_timeout_factor(1000.0).unwrap().with_baseline(Duration::from_millis(1));
        assert_eq!(h.deadline(), Some(Duration::from_secs(1)));
        let tiny = h.with_baseline(Duration::from_nanos(10));
        assert_eq!(tiny.deadline(), Some(MIN_DEADLINE_IN_PROCESS));
        assert!(SutHandle::reference().with_timeout_factor(1.0).is_err());
    }

    #[test]
    fn calibration_is_stable_and_fast_suts_finish_in_time() {
        let mut h = SutHandle::reference();
        let a = calibrate(&mut h, &line()).unwrap();
        let b = calibrate(&mut h, &line()).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        assert!(hi <= lo * 10 + Duration::from_micros(50), "{a:?} vs {b:?}");
        let out = execute(&h, &line()).unwrap();
        assert!(out.runtime < h.deadline().unwrap());
    }
}
