//! The eleven metamorphic relations: follow-up construction, expected output
//! and the round-off-aware verdict.

mod transform;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundConfig, ErrorBound};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::harness::{self, StatusKind, SutHandle, SutOutcome, SutStatus};
use crate::linreg::Estimator;

pub use transform::TransformSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MrId {
    #[serde(rename = "MR1.1")]
    Mr1_1,
    #[serde(rename = "MR1.2")]
    Mr1_2,
    #[serde(rename = "MR2.1")]
    Mr2_1,
    #[serde(rename = "MR2.2")]
    Mr2_2,
    #[serde(rename = "MR3.1")]
    Mr3_1,
    #[serde(rename = "MR3.2")]
    Mr3_2,
    #[serde(rename = "MR4.1")]
    Mr4_1,
    #[serde(rename = "MR4.2")]
    Mr4_2,
    #[serde(rename = "MR5.1")]
    Mr5_1,
    #[serde(rename = "MR5.2")]
    Mr5_2,
    #[serde(rename = "MR6")]
    Mr6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Intercept,
    Constrained,
}

impl Form {
    pub fn of(has_intercept: bool) -> Self {
        if has_intercept {
            Self::Intercept
        } else {
            Self::Constrained
        }
    }

    pub fn has_intercept(self) -> bool {
        self == Self::Intercept
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Intercept => "intercept",
            Self::Constrained => "constrained",
        }
    }
}

impl MrId {
    pub const ALL: [MrId; 11] = [
        Self::Mr1_1,
        Self::Mr1_2,
        Self::Mr2_1,
        Self::Mr2_2,
        Self::Mr3_1,
        Self::Mr3_2,
        Self::Mr4_1,
        Self::Mr4_2,
        Self::Mr5_1,
        Self::Mr5_2,
        Self::Mr6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Mr1_1 => "MR1.1",
            Self::Mr1_2 => "MR1.2",
            Self::Mr2_1 => "MR2.1",
            Self::Mr2_2 => "MR2.2",
            Self::Mr3_1 => "MR3.1",
            Self::Mr3_2 => "MR3.2",
            Self::Mr4_1 => "MR4.1",
            Self::Mr4_2 => "MR4.2",
            Self::Mr5_1 => "MR5.1",
            Self::Mr5_2 => "MR5.2",
            Self::Mr6 => "MR6",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Mr1_1 => "inserting a predicted point",
            Self::Mr1_2 => "inserting the centroid",
            Self::Mr2_1 => "reflecting the dependent variable",
            Self::Mr2_2 => "reflecting an independent variable",
            Self::Mr3_1 => "scaling the dependent variable",
            Self::Mr3_2 => "scaling an independent variable",
            Self::Mr4_1 => "shifting the dependent variable",
            Self::Mr4_2 => "shifting an independent variable",
            Self::Mr5_1 => "swapping samples",
            Self::Mr5_2 => "swapping two independent variables",
            Self::Mr6 => "rotating two independent variables",
        }
    }

    pub fn applies_to(self, form: Form) -> bool {
        form == Form::Intercept || !matches!(self, Self::Mr1_2 | Self::Mr4_1 | Self::Mr4_2)
    }

    /// True when the follow-up input depends on the source output.
    pub fn needs_source_output(self) -> bool {
        self == Self::Mr1_1
    }

    fn check_applicable(self, has_intercept: bool) -> Result<()> {
        let form = Form::of(has_intercept);
        if !self.applies_to(form) {
            return Err(Error::Inapplicable { mr: self.name().into(), form: form.name() });
        }
        Ok(())
    }

    /// Whether `spec` is a transform this relation can be instantiated with.
    pub fn accepts(self, spec: &TransformSpec) -> bool {
        use TransformSpec as T;
        match (self, spec) {
            (Self::Mr1_1, T::InsertPoint { .. }) | (Self::Mr1_2, T::InsertCentroid) => true,
            (Self::Mr2_1, T::Scale { a, b, .. }) => *a == -1.0 && *b == 1.0,
            (Self::Mr2_2, T::Scale { a, b, .. }) => *a == 1.0 && *b == -1.0,
            (Self::Mr3_1, T::Scale { a, b, .. }) => *a > 0.0 && *b == 1.0,
            (Self::Mr3_2, T::Scale { a, b, .. }) => *a == 1.0 && *b > 0.0,
            (Self::Mr4_1, T::Shift { b, .. }) => *b == 0.0,
            (Self::Mr4_2, T::Shift { a, .. }) => *a == 0.0,
            (Self::Mr5_1, T::PermuteSamples { .. }) => true,
            (Self::Mr5_2, T::SwapVars { .. }) | (Self::Mr5_2, T::PermuteVars { .. }) => true,
            (Self::Mr6, T::Rotate { .. }) => true,
            _ => false,
        }
    }

    /// Draws transform parameters for this relation on `source`.
    pub fn sample_spec<R: Rng + ?Sized>(self, source: &Dataset, rng: &mut R) -> Result<TransformSpec> {
        self.check_applicable(source.has_intercept())?;
        let d = source.d();
        let n = source.n();
        let log_uniform = |rng: &mut R| 10f64.powf(rng.random_range(-1.0..=1.0));
        let shift = |rng: &mut R| loop {
            let v: f64 = rng.random_range(-100.0..=100.0);
            if v != 0.0 {
                break v;
            }
        };
        let pair = |rng: &mut R| -> Result<(usize, usize)> {
            if d < 2 {
                return Err(Error::Inapplicable { mr: self.name().into(), form: "single-variable" });
            }
            let p = rng.random_range(1..=d);
            let mut q = rng.random_range(1..d);
            if q >= p {
                q += 1;
            }
            Ok((p, q))
        };
        Ok(match self {
            Self::Mr1_1 => {
                let x = source.column_bounds().into_iter().map(|(lo, hi)| if lo < hi { rng.random_range(lo..=hi) } else { lo }).collect();
                TransformSpec::InsertPoint { x }
            }
            Self::Mr1_2 => TransformSpec::InsertCentroid,
            Self::Mr2_1 => TransformSpec::Scale { a: -1.0, b: 1.0, k: 1 },
            Self::Mr2_2 => TransformSpec::Scale { a: 1.0, b: -1.0, k: rng.random_range(1..=d) },
            Self::Mr3_1 => TransformSpec::Scale { a: log_uniform(rng), b: 1.0, k: 1 },
            Self::Mr3_2 => {
                let k = rng.random_range(1..=d);
                TransformSpec::Scale { a: 1.0, b: log_uniform(rng), k }
            }
            Self::Mr4_1 => TransformSpec::Shift { a: shift(rng), b: 0.0, k: 1 },
            Self::Mr4_2 => {
                let k = rng.random_range(1..=d);
                TransformSpec::Shift { a: 0.0, b: shift(rng), k }
            }
            Self::Mr5_1 => {
                if n < 2 {
                    return Err(Error::Inapplicable { mr: self.name().into(), form: "single-sample" });
                }
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                let mut order: Vec<usize> = (0..n).collect();
                order.swap(i, j);
                TransformSpec::PermuteSamples { order }
            }
            Self::Mr5_2 => {
                let (p, q) = pair(rng)?;
                TransformSpec::SwapVars { p, q }
            }
            Self::Mr6 => {
                let (p, q) = pair(rng)?;
                let quarter = std::f64::consts::FRAC_PI_2;
                let theta = loop {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let off = (t / quarter).round() * quarter - t;
                    if off.abs() > 0.05 {
                        break t;
                    }
                };
                TransformSpec::Rotate { p, q, theta }
            }
        })
    }
}

impl fmt::Display for MrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MrId {
    type Err = Error;

    /// Accepts `MR1.1`, `mr1_1`, `1.1` and `MR6`-style spellings.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase().replace('_', ".");
        let t = t.strip_prefix("MR").unwrap_or(&t);
        Self::ALL.into_iter().find(|m| &m.name()[2..] == t).ok_or_else(|| Error::UnknownMr(s.to_string()))
    }
}

/// Parses a comma-separated list; `all` selects every relation.
pub fn parse_mr_list(list: &str) -> Result<Vec<MrId>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(MrId::ALL.to_vec());
    }
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetamorphicTestGroup {
    pub mr: MrId,
    pub source: Dataset,
    pub followups: Vec<Dataset>,
    pub spec: TransformSpec,
    pub source_output_dependent: bool,
}

impl MetamorphicTestGroup {
    pub fn followup(&self) -> &Dataset {
        &self.followups[0]
    }
}

/// Builds the follow-up input. `source_out` is required for MR1.1 and ignored
/// otherwise.
pub fn make_followup(mr: MrId, source: &Dataset, source_out: Option<&Estimator>, spec: &TransformSpec) -> Result<MetamorphicTestGroup> {
    mr.check_applicable(source.has_intercept())?;
    if !mr.accepts(spec) {
        return Err(Error::InvalidTransform(format!("{spec:?} does not instantiate {mr}")));
    }
    if mr.needs_source_output() && source_out.is_none() {
        return Err(Error::MissingSourceOutput(mr.name().into()));
    }
    let followup = spec.apply_to_dataset(source, source_out)?;
    Ok(MetamorphicTestGroup {
        mr,
        source: source.clone(),
        followups: vec![followup],
        spec: spec.clone(),
        source_output_dependent: mr.needs_source_output(),
    })
}

/// Samples parameters with `rng` and builds the group.
pub fn make_followup_random<R: Rng + ?Sized>(
    mr: MrId,
    source: &Dataset,
    source_out: Option<&Estimator>,
    rng: &mut R,
) -> Result<MetamorphicTestGroup> {
    let spec = mr.sample_spec(source, rng)?;
    make_followup(mr, source, source_out, &spec)
}

/// [`make_followup_random`] with parameters drawn from a ChaCha8 stream seeded
/// with `seed`.
pub fn make_followup_seeded(mr: MrId, source: &Dataset, source_out: Option<&Estimator>, seed: u64) -> Result<MetamorphicTestGroup> {
    make_followup_random(mr, source, source_out, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn expected_followup_output(mr: MrId, spec: &TransformSpec, source_out: &Estimator) -> Result<Estimator> {
    mr.check_applicable(source_out.has_intercept)?;
    if !source_out.is_finite() {
        return Err(Error::NonFinite("source estimator".into()));
    }
    spec.apply_to_estimator(source_out)
}

/// Discrepancy `‖expected − actual‖₂` and tolerance `sqrt(‖δˢ‖² + ‖δᶠ‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub discrepancy: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Satisfied(Discrepancy),
    Violated(Discrepancy),
    SourceFailure { status: StatusKind },
    FollowupFailure { status: StatusKind },
    Inapplicable,
}

impl Verdict {
    pub fn is_violated(&self) -> bool {
        matches!(self, Self::Violated(_))
    }

    /// Both executions returned well-formed numeric estimators.
    pub fn survived(&self) -> bool {
        matches!(self, Self::Satisfied(_) | Self::Violated(_))
    }
}

/// `expected` must already carry the source bound pushed through the map; the
/// caller passes it as `delta_s`.
pub fn judge(mr: MrId, expected: &Estimator, actual_followup: &Estimator, delta_s: &ErrorBound, delta_f: &ErrorBound) -> Result<Verdict> {
    if expected.beta.len() != actual_followup.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "{mr}: expected {} coefficients, got {}",
            expected.beta.len(),
            actual_followup.beta.len()
        )));
    }
    let sq: f64 = expected.beta.iter().zip(&actual_followup.beta).map(|(e, a)| (e - a) * (e - a)).sum();
    let budget = delta_s.delta_norm * delta_s.delta_norm + delta_f.delta_norm * delta_f.delta_norm;
    let detail = Discrepancy { discrepancy: sq.sqrt(), tolerance: budget.sqrt() };
    // NaN compares false, so a non-finite discrepancy is a violation.
    Ok(if sq <= budget { Verdict::Satisfied(detail) } else { Verdict::Violated(detail) })
}

pub fn run_mtg(sut: &SutHandle, mtg: &MetamorphicTestGroup, cfg: &BoundConfig) -> Result<Verdict> {
    let source = harness::execute(sut, &mtg.source)?;
    run_mtg_with_source(sut, mtg, &source, cfg)
}

/// Like [`run_mtg`] but reuses an already observed source execution.
///
/// For MR1.1 the stored follow-up is rebuilt from this SUT's own source output.
pub fn run_mtg_with_source(sut: &SutHandle, mtg: &MetamorphicTestGroup, source: &SutOutcome, cfg: &BoundConfig) -> Result<Verdict> {
    let has_intercept = mtg.source.has_intercept();
    let src_beta = match &source.status {
        SutStatus::Ok { beta } => beta.clone(),
        other => return Ok(Verdict::SourceFailure { status: other.kind() }),
    };
    let src_est = Estimator::exact(src_beta, has_intercept);

    let rebuilt;
    let followup_ds = if mtg.source_output_dependent {
        match mtg.spec.apply_to_dataset(&mtg.source, Some(&src_est)) {
            Ok(ds) => {
                rebuilt = ds;
                &rebuilt
            }
            Err(Error::NonFinite(_)) => return Ok(Verdict::FollowupFailure { status: StatusKind::NonNumeric }),
            Err(e) => return Err(e),
        }
    } else {
        mtg.followup()
    };

    let follow = harness::execute(sut, followup_ds)?;
    let f_beta = match follow.status {
        SutStatus::Ok { beta } => beta,
        other => return Ok(Verdict::FollowupFailure { status: other.kind() }),
    };
    let f_est = Estimator::exact(f_beta, has_intercept);

    let delta_s = bounds::forward_bound_with(&mtg.source, &src_est, cfg)?.scaled(mtg.spec.operator_norm());
    let delta_f = bounds::forward_bound_with(followup_ds, &f_est, cfg)?;
    let expected = expected_followup_output(mtg.mr, &mtg.spec, &src_est)?;
    judge(mtg.mr, &expected, &f_est, &delta_s, &delta_f)
}

/// Audit record of one group; datasets are referenced, not embedded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtgRecord {
    pub mr: MrId,
    pub spec: TransformSpec,
    pub source_ref: String,
    pub followup_ref: String,
}

impl MtgRecord {
    pub fn new(mr: MrId, spec: TransformSpec, source_ref: impl Into<String>) -> Self {
        let source_ref = source_ref.into();
        let followup_ref = if mr.needs_source_output() { format!("{source_ref}#{mr}@sut-output") } else { format!("{source_ref}#{mr}") };
        Self { mr, spec, source_ref, followup_ref }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Dataset {
        Dataset::from_points(&[(1.0, 3.0), (3.0, 7.0), (5.0, 11.0)], true).unwrap()
    }

    #[test]
    fn table_one_applicability() {
        for mr in MrId::ALL {
            assert!(mr.applies_to(Form::Intercept));
            let intercept_only = matches!(mr, MrId::Mr1_2 | MrId::Mr4_1 | MrId::Mr4_2);
            assert_eq!(mr.applies_to(Form::Constrained), !intercept_only, "{mr}");
        }
    }

    #[test]
    fn names_round_trip() {
        for mr in MrId::ALL {
            assert_eq!(mr.name().parse::<MrId>().unwrap(), mr);
            assert_eq!(serde_json::to_string(&mr).unwrap(), format!("\"{}\"", mr.name()));
        }
        assert_eq!("mr3_2".parse::<MrId>().unwrap(), MrId::Mr3_2);
        assert_eq!("6".parse::<MrId>().unwrap(), MrId::Mr6);
        assert!("MR7".parse::<MrId>().is_err());
        assert_eq!(parse_mr_list("MR1.1,MR6").unwrap(), vec![MrId::Mr1_1, MrId::Mr6]);
        assert_eq!(parse_mr_list("all").unwrap().len(), 11);
    }

    #[test]
    fn sample_swap_example() {
        let spec = TransformSpec::PermuteSamples { order: vec![2, 1, 0] };
        let mtg = make_followup(MrId::Mr5_1, &line(), None, &spec).unwrap();
        let expected = Dataset::from_points(&[(5.0, 11.0), (3.0, 7.0), (1.0, 3.0)], true).unwrap();
        assert_eq!(mtg.followup(), &expected);
        assert!(!mtg.source_output_dependent);
    }

    #[test]
    fn centroid_example() {
        let mtg = make_followup(MrId::Mr1_2, &line(), None, &TransformSpec::InsertCentroid).unwrap();
        let f = mtg.followup();
        assert_eq!((f.n(), f.row(3)[0], f.y()[3]), (4, 3.0, 7.0));
    }

    #[test]
    fn predicted_point_example() {
        let spec = TransformSpec::InsertPoint { x: vec![7.0] };
        assert!(matches!(make_followup(MrId::Mr1_1, &line(), None, &spec), Err(Error::MissingSourceOutput(_))));
        let est = Estimator::exact(vec![1.0, 2.0], true);
        let mtg = make_followup(MrId::Mr1_1, &line(), Some(&est), &spec).unwrap();
        assert_eq!((mtg.followup().row(3)[0], mtg.followup().y()[3]), (7.0, 15.0));
        assert!(mtg.source_output_dependent);
    }

    #[test]
    fn constrained_form_rejects_intercept_only_relations() {
        let ds = line().with_intercept(false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for mr in [MrId::Mr1_2, MrId::Mr4_1, MrId::Mr4_2] {
            assert!(matches!(mr.sample_spec(&ds, &mut rng), Err(Error::Inapplicable { .. })));
        }
        let est = Estimator::exact(vec![2.0], false);
        let spec = TransformSpec::Shift { a: 1.0, b: 0.0, k: 1 };
        assert!(matches!(expected_followup_output(MrId::Mr4_1, &spec, &est), Err(Error::Inapplicable { .. })));
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let spec = TransformSpec::Scale { a: 2.0, b: 1.0, k: 1 };
        assert!(make_followup(MrId::Mr2_1, &line(), None, &spec).is_err());
        assert!(make_followup(MrId::Mr3_1, &line(), None, &spec).is_ok());
    }

    #[test]
    fn expected_output_examples() {
        let est = Estimator::exact(vec![1.0, 2.0], true);
        let reflect = TransformSpec::Scale { a: -1.0, b: 1.0, k: 1 };
        assert_eq!(expected_followup_output(MrId::Mr2_1, &reflect, &est).unwrap().beta, vec![-1.0, -2.0]);
        let scale = TransformSpec::Scale { a: 3.0, b: 1.0, k: 1 };
        assert_eq!(expected_followup_output(MrId::Mr3_1, &scale, &est).unwrap().beta, vec![3.0, 6.0]);
        let same = expected_followup_output(MrId::Mr1_2, &TransformSpec::InsertCentroid, &est).unwrap();
        assert_eq!(same, est);
    }

    #[test]
    fn judge_examples() {
        let e = Estimator::exact(vec![1.0, 2.0], true);
        let b = ErrorBound { kappa: 1.0, backward: 0.0, delta_norm: 0.1 };
        assert!(matches!(judge(MrId::Mr1_2, &e, &e, &b, &b).unwrap(), Verdict::Satisfied(_)));
        let off = Estimator::exact(vec![1.0, 2.15], true);
        assert!(judge(MrId::Mr1_2, &e, &off, &b, &b).unwrap().is_violated());
        let near = Estimator::exact(vec![1.0, 2.14], true);
        assert!(!judge(MrId::Mr1_2, &e, &near, &b, &b).unwrap().is_violated());
        let short = Estimator::exact(vec![1.0], true);
        assert!(judge(MrId::Mr1_2, &e, &short, &b, &b).is_err());
        let nan = Estimator::exact(vec![1.0, f64::NAN], true);
        assert!(judge(MrId::Mr1_2, &e, &nan, &b, &b).unwrap().is_violated());
    }

    #[test]
    fn sampled_parameters_follow_the_documented_ranges() {
        let ds = Dataset::new(4, 3, (0..12).map(|v| (v * v % 7) as f64).collect(), vec![1.0, 2.0, 0.0, 5.0], true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            for mr in MrId::ALL {
                let spec = mr.sample_spec(&ds, &mut rng).unwrap();
                assert!(mr.accepts(&spec), "{mr} {spec:?}");
                spec.validate(ds.d(), Some(ds.n()), true).unwrap();
                match spec {
                    TransformSpec::Scale { a, b, .. } if mr == MrId::Mr3_1 || mr == MrId::Mr3_2 => {
                        assert!((0.1..=10.0).contains(&a) && (0.1..=10.0).contains(&b));
                    }
                    TransformSpec::Shift { a, b, .. } => assert!(a.abs() <= 100.0 && b.abs() <= 100.0),
                    TransformSpec::Rotate { theta, .. } => {
                        let q = std::f64::consts::FRAC_PI_2;
                        assert!(((theta / q).round() * q - theta).abs() > 0.05);
                    }
                    TransformSpec::InsertPoint { ref x } => {
                        for (v, (lo, hi)) in x.iter().zip(ds.column_bounds()) {
                            assert!(lo <= *v && *v <= hi);
                        }
                    }
                    _ => {}
                }
            }
        }
    }

    #[test]
    fn audit_record_serializes() {
        let rec = MtgRecord::new(MrId::Mr3_1, TransformSpec::Scale { a: 2.0, b: 1.0, k: 1 }, "dataset-0003");
        let json = serde_json::to_value(&rec).unwrap();
        assert_eq!(json["mr"], "MR3.1");
        assert_eq!(json["spec"]["kind"], "scale");
        assert_eq!(json["followup_ref"], "dataset-0003#MR3.1");
        let back: MtgRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, rec);
    }
}
