//! Campaigns: every (SUT, dataset, MR) group plus the two-case random-testing
//! baseline, with deterministic verdict logs and aggregate metrics.
//!
//! Randomness is drawn from sub-streams of the campaign seed: stream 1 for
//! source datasets, 2 for the baseline's second datasets, 3 for MR parameters
//! (per dataset and relation, independent of the SUT) and 4 for equivalence
//! probes. Only timing depends on the machine.

mod metrics;
mod report;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundConfig;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gen::{self, derive_seed, GenSpec, GeneratedDataset};
use crate::harness::{self, IoMode, StatusKind, SutHandle, SutKind, DEFAULT_TIMEOUT_FACTOR};
use crate::linreg;
use crate::mr::{self, Form, MetamorphicTestGroup, MrId, MtgRecord, Verdict};
use crate::zoo::{self, Category, Fault};

pub use metrics::{extended_ratio, median, ratio_of_violation, Tally};
pub use report::{CampaignReport, CategorySummary, CellTally, MrSummary, RtSummary, SutDetection, TimingReport};

const STREAM_SOURCE: u64 = 1;
const STREAM_SECOND: u64 = 2;
const STREAM_PARAMS: u64 = 3;
const STREAM_PROBES: u64 = 4;
/// Redraws allowed when a generated dataset cannot be fitted by the reference.
const MAX_DATASET_ATTEMPTS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SutSpec {
    Reference,
    Fault { id: Fault },
    External { command: String, args: Vec<String>, io_mode: IoMode },
}

impl SutSpec {
    pub fn handle(&self, timeout_factor: f64) -> Result<SutHandle> {
        let h = match self {
            Self::Reference => SutHandle::reference(),
            Self::Fault { id } => SutHandle::fault(*id),
            Self::External { command, args, io_mode } => {
                SutHandle::new(SutKind::External { command: command.clone(), args: args.clone(), io_mode: *io_mode })
            }
        };
        h.with_timeout_factor(timeout_factor)
    }

    pub fn category(&self) -> Option<Category> {
        match self {
            Self::Fault { id } => Some(id.category()),
            _ => None,
        }
    }

    pub fn faults(faults: &[Fault]) -> Vec<SutSpec> {
        faults.iter().map(|&id| Self::Fault { id }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub seed: u64,
    pub datasets: usize,
    pub mrs: Vec<MrId>,
    pub suts: Vec<SutSpec>,
    /// Generator template; its `seed` is replaced per dataset.
    pub gen: GenSpec,
    pub form: Form,
    pub bound: BoundConfig,
    /// Equivalence probes for fault SUTs; 0 disables filtering.
    pub probes: usize,
    pub timeout_factor: f64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub random_baseline: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            datasets: 100,
            mrs: MrId::ALL.to_vec(),
            suts: vec![SutSpec::Reference],
            gen: GenSpec::default(),
            form: Form::Intercept,
            bound: BoundConfig::default(),
            probes: 100,
            timeout_factor: DEFAULT_TIMEOUT_FACTOR,
            workers: 0,
            random_baseline: true,
        }
    }
}

impl CampaignConfig {
    /// Whole zoo with the given dataset count.
    pub fn zoo(seed: u64, datasets: usize) -> Self {
        Self { seed, datasets, suts: SutSpec::faults(Fault::ALL), ..Self::default() }
    }
}

/// One log line: a verdict of one group on one SUT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub sut: String,
    pub dataset: usize,
    pub mr: MrId,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// One random-testing pair: the MT source dataset plus a fresh one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtRecord {
    pub sut: String,
    pub dataset: usize,
    pub first: StatusKind,
    /// Not run when the first case already failed.
    pub second: Option<StatusKind>,
    pub failed: bool,
}

/// Everything needed to recount the report; contains no timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictLog {
    pub seed: u64,
    pub verdicts: Vec<VerdictRecord>,
    pub random_baseline: Vec<RtRecord>,
}

/// Output of one work item (one SUT on one dataset).
#[derive(Debug, Clone)]
pub struct ItemResult {
    pub sut_index: usize,
    pub dataset: usize,
    pub verdicts: Vec<VerdictRecord>,
    pub rt: Option<RtRecord>,
    pub busy: Duration,
}

#[derive(Debug, Clone)]
pub struct CampaignRun {
    pub report: CampaignReport,
    pub log: VerdictLog,
    pub timing: TimingReport,
    pub mtgs: Vec<MtgRecord>,
    pub sources: Vec<GeneratedDataset>,
    pub seconds: Vec<GeneratedDataset>,
}

fn dataset_name(j: usize) -> String {
    format!("dataset-{j:04}")
}

/// Draws dataset `index` of `stream`, redrawing until the reference can fit it.
fn draw(cfg: &CampaignConfig, stream: u64, index: usize) -> Result<GeneratedDataset> {
    for attempt in 0..MAX_DATASET_ATTEMPTS {
        let seed = derive_seed(cfg.seed, stream, (index as u64) << 8 | attempt);
        let mut g = gen::generate(&GenSpec { seed, ..cfg.gen.clone() })?;
        g.ds = g.ds.with_intercept(cfg.form.has_intercept());
        if linreg::solve(&g.ds).is_ok() {
            return Ok(g);
        }
    }
    Err(Error::InfeasibleSpec(format!("no full-rank dataset for index {index} after {MAX_DATASET_ATTEMPTS} draws")))
}

fn plan(cfg: &CampaignConfig, j: usize, ds: &Dataset) -> Result<Vec<Option<MetamorphicTestGroup>>> {
    cfg.mrs
        .iter()
        .map(|&mr| {
            let mr_index = MrId::ALL.iter().position(|m| *m == mr).expect("known relation") as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_PARAMS, (j as u64) << 8 | mr_index));
            let spec = match mr.sample_spec(ds, &mut rng) {
                Ok(spec) => spec,
                Err(Error::Inapplicable { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            // The stored MR1.1 follow-up uses the reference output; each SUT
            // rebuilds it from its own output when run.
            let reference =
                if mr.needs_source_output() { Some(linreg::Estimator::exact(linreg::solve(ds)?, ds.has_intercept())) } else { None };
            mr::make_followup(mr, ds, reference.as_ref(), &spec).map(Some)
        })
        .collect()
}

fn probes(cfg: &CampaignConfig) -> Result<Vec<Dataset>> {
    (0..cfg.probes).map(|i| draw(cfg, STREAM_PROBES, i).map(|g| g.ds)).collect()
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignRun> {
    run_campaign_with(cfg, |_| Ok(()))
}

/// Runs the campaign, handing each finished work item to `sink` (called from
/// one thread at a time, in completion order) so partial results can be
/// persisted.
pub fn run_campaign_with<F>(cfg: &CampaignConfig, sink: F) -> Result<CampaignRun>
where
    F: FnMut(&ItemResult) -> Result<()> + Send,
{
    let started = Instant::now();
    if cfg.mrs.is_empty() || cfg.suts.is_empty() {
        return Err(Error::InvalidTransform("campaign needs at least one MR and one SUT".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        pool = pool.num_threads(cfg.workers);
    }
    let pool = pool.build().map_err(|e| Error::HarnessIo(format!("worker pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, sink, started))
}

fn run_in_pool<F>(cfg: &CampaignConfig, sink: F, started: Instant) -> Result<CampaignRun>
where
    F: FnMut(&ItemResult) -> Result<()> + Send,
{
    let n = cfg.datasets;
    let sources: Vec<GeneratedDataset> = (0..n).into_par_iter().map(|j| draw(cfg, STREAM_SOURCE, j)).collect::<Result<_>>()?;
    let seconds: Vec<GeneratedDataset> =
        if cfg.random_baseline { (0..n).into_par_iter().map(|j| draw(cfg, STREAM_SECOND, j)).collect::<Result<_>>()? } else { Vec::new() };
    let plans: Vec<Vec<Option<MetamorphicTestGroup>>> =
        sources.par_iter().enumerate().map(|(j, g)| plan(cfg, j, &g.ds)).collect::<Result<_>>()?;

    let calibrate = |ds: &Dataset| -> Result<Duration> {
        let mut h = SutHandle::reference();
        harness::calibrate(&mut h, ds)
    };
    let source_baselines: Vec<Duration> = sources.par_iter().map(|g| calibrate(&g.ds)).collect::<Result<_>>()?;
    let second_baselines: Vec<Duration> = seconds.par_iter().map(|g| calibrate(&g.ds)).collect::<Result<_>>()?;

    let fault_list: Vec<Fault> = cfg
        .suts
        .iter()
        .filter_map(|s| match s {
            SutSpec::Fault { id } => Some(*id),
            _ => None,
        })
        .collect();
    let equivalence =
        if cfg.probes > 0 && !fault_list.is_empty() { zoo::filter_equivalents(&fault_list, &probes(cfg)?)? } else { Vec::new() };
    let is_equivalent = |s: &SutSpec| matches!(s, SutSpec::Fault { id } if equivalence.iter().any(|r| r.fault == *id && r.equivalent));
    let active: Vec<(usize, SutHandle)> = cfg
        .suts
        .iter()
        .enumerate()
        .filter(|(_, s)| !is_equivalent(s))
        .map(|(i, s)| s.handle(cfg.timeout_factor).map(|h| (i, h)))
        .collect::<Result<_>>()?;

    let items: Vec<(usize, usize)> = (0..active.len()).flat_map(|a| (0..n).map(move |j| (a, j))).collect();
    let sink = std::sync::Mutex::new(sink);
    let results: Vec<ItemResult> = items
        .par_iter()
        .map(|&(a, j)| {
            let (sut_index, handle) = &active[a];
            let ctx = ItemCtx {
                cfg,
                source: &sources[j].ds,
                second: seconds.get(j).map(|g| &g.ds),
                plans: &plans[j],
                source_baseline: source_baselines[j],
                second_baseline: second_baselines.get(j).copied(),
            };
            let item = run_item(*sut_index, handle, j, &ctx)?;
            (sink.lock().expect("sink poisoned"))(&item)?;
            Ok(item)
        })
        .collect::<Result<_>>()?;

    let mtgs = plans
        .iter()
        .enumerate()
        .flat_map(|(j, p)| p.iter().flatten().map(move |m| MtgRecord::new(m.mr, m.spec.clone(), dataset_name(j))))
        .collect();
    let log = VerdictLog {
        seed: cfg.seed,
        verdicts: results.iter().flat_map(|r| r.verdicts.iter().cloned()).collect(),
        random_baseline: results.iter().filter_map(|r| r.rt.clone()).collect(),
    };
    let report = report::build(cfg, &log, equivalence);
    let timing = report::timing(cfg, &results, started.elapsed());
    Ok(CampaignRun { report, log, timing, mtgs, sources, seconds })
}

struct ItemCtx<'a> {
    cfg: &'a CampaignConfig,
    source: &'a Dataset,
    second: Option<&'a Dataset>,
    plans: &'a [Option<MetamorphicTestGroup>],
    source_baseline: Duration,
    second_baseline: Option<Duration>,
}

fn run_item(sut_index: usize, handle: &SutHandle, j: usize, ctx: &ItemCtx<'_>) -> Result<ItemResult> {
    let started = Instant::now();
    let label = handle.label();
    let sut = if handle.is_external() {
        let mut h = handle.clone();
        harness::calibrate(&mut h, ctx.source)?;
        h
    } else {
        handle.with_baseline(ctx.source_baseline)
    };
    let source = harness::execute(&sut, ctx.source)?;

    let mut verdicts = Vec::with_capacity(ctx.plans.len());
    for (mr, plan) in ctx.cfg.mrs.iter().zip(ctx.plans) {
        let verdict = match plan {
            None => Verdict::Inapplicable,
            Some(mtg) => mr::run_mtg_with_source(&sut, mtg, &source, &ctx.cfg.bound)?,
        };
        verdicts.push(VerdictRecord { sut: label.clone(), dataset: j, mr: *mr, verdict });
    }

    let rt = match ctx.second {
        Some(second) => {
            let first = source.status.kind();
            let second_status = if first == StatusKind::Ok {
                let sut2 = if handle.is_external() {
                    sut.clone()
                } else {
                    handle.with_baseline(ctx.second_baseline.expect("baseline per second dataset"))
                };
                Some(harness::execute(&sut2, second)?.status.kind())
            } else {
                None
            };
            let failed = first != StatusKind::Ok || second_status != Some(StatusKind::Ok);
            Some(RtRecord { sut: label.clone(), dataset: j, first, second: second_status, failed })
        }
        None => None,
    };
    Ok(ItemResult { sut_index, dataset: j, verdicts, rt, busy: started.elapsed() })
}

pub use report::{render_text, write_outputs, ConfigEcho, SutTiming};
