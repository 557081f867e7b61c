use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::metrics::{extended_ratio, median, Tally};
use super::{dataset_name, CampaignConfig, CampaignRun, ItemResult, SutSpec, VerdictLog};
use crate::error::Result;
use crate::harness::{StatusKind, SutHandle};
use crate::mr::{MrId, Verdict};
use crate::zoo::{self, Category, EquivalenceReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTally {
    pub sut: String,
    pub category: Option<Category>,
    pub mr: MrId,
    #[serde(flatten)]
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrSummary {
    pub mr: MrId,
    #[serde(flatten)]
    pub tally: Tally,
    pub ratio_of_violation: Option<f64>,
    pub mt_extended: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorySummary {
    pub category: Category,
    pub faults: usize,
    /// Ratio of violation per MR, in campaign MR order.
    pub ratio_of_violation: Vec<Option<f64>>,
    pub overall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtSummary {
    pub pairs: usize,
    pub failed: usize,
    pub extended_ratio: Option<f64>,
}

/// How (and whether) one SUT was caught.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SutDetection {
    pub sut: String,
    pub violated_by: Vec<MrId>,
    pub failures: Vec<StatusKind>,
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub datasets: usize,
    pub mrs: Vec<MrId>,
    pub suts: Vec<String>,
    pub form: crate::mr::Form,
    pub safety_factor: Option<f64>,
    pub probes: usize,
    pub timeout_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: ConfigEcho,
    pub equivalence: Vec<EquivalenceReport>,
    pub cells: Vec<CellTally>,
    pub per_mr: Vec<MrSummary>,
    pub per_category: Vec<CategorySummary>,
    pub mt_extended_median: Option<f64>,
    pub rt_baseline: Option<RtSummary>,
    pub detection: Vec<SutDetection>,
}

impl CampaignReport {
    pub fn mr(&self, mr: MrId) -> Option<&MrSummary> {
        self.per_mr.iter().find(|s| s.mr == mr)
    }

    pub fn cell(&self, sut: &str, mr: MrId) -> Option<&CellTally> {
        self.cells.iter().find(|c| c.sut == sut && c.mr == mr)
    }

    pub fn total_violations(&self) -> usize {
        self.per_mr.iter().map(|s| s.tally.violated).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SutTiming {
    pub sut: String,
    pub busy_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub wall_seconds: f64,
    pub per_sut: Vec<SutTiming>,
}

fn label_of(spec: &SutSpec, timeout_factor: f64) -> String {
    spec.handle(timeout_factor).map(|h| h.label()).unwrap_or_else(|_| SutHandle::reference().label())
}

pub(super) fn build(cfg: &CampaignConfig, log: &VerdictLog, equivalence: Vec<EquivalenceReport>) -> CampaignReport {
    let labels: Vec<(String, Option<Category>)> = cfg.suts.iter().map(|s| (label_of(s, cfg.timeout_factor), s.category())).collect();

    let mut cells: BTreeMap<(usize, usize), Tally> = BTreeMap::new();
    let index_of_sut = |name: &str| labels.iter().position(|(l, _)| l == name).expect("sut in config");
    let index_of_mr = |mr: MrId| cfg.mrs.iter().position(|m| *m == mr).expect("mr in config");
    for rec in &log.verdicts {
        cells.entry((index_of_sut(&rec.sut), index_of_mr(rec.mr))).or_default().record(&rec.verdict);
    }

    let cell_list: Vec<CellTally> =
        cells.iter().map(|(&(s, m), t)| CellTally { sut: labels[s].0.clone(), category: labels[s].1, mr: cfg.mrs[m], tally: *t }).collect();

    let per_mr: Vec<MrSummary> = cfg
        .mrs
        .iter()
        .enumerate()
        .map(|(m, &mr)| {
            let mut t = Tally::default();
            cells.iter().filter(|((_, mm), _)| *mm == m).for_each(|(_, c)| t.merge(c));
            MrSummary { mr, tally: t, ratio_of_violation: t.ratio_of_violation(), mt_extended: t.extended_ratio() }
        })
        .collect();

    let mut categories: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
    for &(s, _) in cells.keys() {
        if let Some(c) = labels[s].1 {
            let v = categories.entry(c).or_default();
            if !v.contains(&s) {
                v.push(s);
            }
        }
    }
    let per_category = categories
        .into_iter()
        .map(|(category, suts)| {
            let mut overall = Tally::default();
            let ratio_of_violation = (0..cfg.mrs.len())
                .map(|m| {
                    let mut t = Tally::default();
                    for s in &suts {
                        if let Some(c) = cells.get(&(*s, m)) {
                            t.merge(c);
                        }
                    }
                    overall.merge(&t);
                    t.ratio_of_violation()
                })
                .collect();
            CategorySummary { category, faults: suts.len(), ratio_of_violation, overall: overall.ratio_of_violation() }
        })
        .collect();

    let rt_baseline = cfg.random_baseline.then(|| {
        let pairs = log.random_baseline.len();
        let failed = log.random_baseline.iter().filter(|r| r.failed).count();
        RtSummary { pairs, failed, extended_ratio: extended_ratio(failed, pairs) }
    });

    let detection = labels
        .iter()
        .filter(|(l, _)| log.verdicts.iter().any(|v| &v.sut == l))
        .map(|(label, _)| {
            let mut violated_by = Vec::new();
            let mut failures = Vec::new();
            for v in log.verdicts.iter().filter(|v| &v.sut == label) {
                match v.verdict {
                    Verdict::Violated(_) if !violated_by.contains(&v.mr) => violated_by.push(v.mr),
                    Verdict::SourceFailure { status } | Verdict::FollowupFailure { status } if !failures.contains(&status) => {
                        failures.push(status)
                    }
                    _ => {}
                }
            }
            for r in log.random_baseline.iter().filter(|r| &r.sut == label) {
                for s in std::iter::once(r.first).chain(r.second) {
                    if s != StatusKind::Ok && !failures.contains(&s) {
                        failures.push(s);
                    }
                }
            }
            violated_by.sort();
            failures.sort();
            let detected = !violated_by.is_empty() || !failures.is_empty();
            SutDetection { sut: label.clone(), violated_by, failures, detected }
        })
        .collect();

    CampaignReport {
        config: ConfigEcho {
            seed: cfg.seed,
            datasets: cfg.datasets,
            mrs: cfg.mrs.clone(),
            suts: labels.iter().map(|(l, _)| l.clone()).collect(),
            form: cfg.form,
            safety_factor: cfg.bound.safety_factor,
            probes: cfg.probes,
            timeout_factor: cfg.timeout_factor,
        },
        equivalence,
        cells: cell_list,
        mt_extended_median: median(per_mr.iter().map(|s| s.mt_extended)),
        per_mr,
        per_category,
        rt_baseline,
        detection,
    }
}

pub(super) fn timing(cfg: &CampaignConfig, items: &[ItemResult], wall: Duration) -> TimingReport {
    let mut busy = vec![Duration::ZERO; cfg.suts.len()];
    for it in items {
        busy[it.sut_index] += it.busy;
    }
    let per_sut = cfg
        .suts
        .iter()
        .zip(busy)
        .filter(|(_, b)| !b.is_zero())
        .map(|(s, b)| SutTiming { sut: label_of(s, cfg.timeout_factor), busy_seconds: b.as_secs_f64() })
        .collect();
    TimingReport { wall_seconds: wall.as_secs_f64(), per_sut }
}

fn fmt_ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

/// Human-readable tables: per-MR counts and ratios, per-category ratios, and
/// the extended-ratio comparison against the random baseline.
pub fn render_text(report: &CampaignReport) -> String {
    let mut out = String::new();
    let w = 26;
    let header = |out: &mut String, first: &str| {
        let _ = write!(out, "{first:<w$}");
        for s in &report.per_mr {
            let _ = write!(out, "{:>9}", s.mr.name());
        }
        out.push('\n');
    };
    let _ = writeln!(out, "seed {}  datasets {}  form {}", report.config.seed, report.config.datasets, report.config.form.name());
    if !report.equivalence.is_empty() {
        let eq: Vec<&str> = report.equivalence.iter().filter(|r| r.equivalent).map(|r| r.fault.id()).collect();
        let _ = writeln!(out, "equivalent faults excluded ({}): {}", eq.len(), if eq.is_empty() { "none".into() } else { eq.join(", ") });
    }
    out.push('\n');

    header(&mut out, "");
    type Row = (&'static str, fn(&MrSummary) -> String);
    let rows: [Row; 6] = [
        ("survived pairs", |s| s.tally.survived().to_string()),
        ("violations", |s| s.tally.violated.to_string()),
        ("source failures", |s| s.tally.source_failed.to_string()),
        ("follow-up failures", |s| s.tally.followup_failed.to_string()),
        ("ratio of violation", |s| fmt_ratio(s.ratio_of_violation)),
        ("extended ratio (MT)", |s| fmt_ratio(s.mt_extended)),
    ];
    for (name, f) in rows {
        let _ = write!(out, "{name:<w$}");
        for s in &report.per_mr {
            let _ = write!(out, "{:>9}", f(s));
        }
        out.push('\n');
    }

    if !report.per_category.is_empty() {
        out.push_str("\nratio of violation by category\n");
        header(&mut out, "category (faults)");
        for c in &report.per_category {
            let _ = write!(out, "{:<w$}", format!("{} ({})", c.category, c.faults));
            for r in &c.ratio_of_violation {
                let _ = write!(out, "{:>9}", fmt_ratio(*r));
            }
            out.push('\n');
        }
    }

    out.push_str("\nextended ratio of failure detection\n");
    let _ = writeln!(out, "{:<w$}{:>9}", "MT (median over MRs)", fmt_ratio(report.mt_extended_median));
    if let Some(rt) = &report.rt_baseline {
        let _ = writeln!(out, "{:<w$}{:>9}  ({} of {} pairs)", "R2 (random testing)", fmt_ratio(rt.extended_ratio), rt.failed, rt.pairs);
    }

    let missed: Vec<&str> = report.detection.iter().filter(|d| !d.detected).map(|d| d.sut.as_str()).collect();
    if report.detection.len() > 1 || report.detection.iter().any(|d| d.detected) {
        let _ = writeln!(out, "\nundetected SUTs: {}", if missed.is_empty() { "none".into() } else { missed.join(", ") });
    }
    out
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `report.json`, `verdicts.json`, `timing.json`, `report.txt`,
/// `mtgs.json`, the datasets and, for zoo campaigns, `faults.json`.
pub fn write_outputs(run: &CampaignRun, cfg: &CampaignConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &run.report)?;
    write_json(&dir.join("verdicts.json"), &run.log)?;
    write_json(&dir.join("timing.json"), &run.timing)?;
    write_json(&dir.join("mtgs.json"), &run.mtgs)?;
    fs::write(dir.join("report.txt"), render_text(&run.report))?;
    if cfg.suts.iter().any(|s| matches!(s, SutSpec::Fault { .. })) {
        fs::write(dir.join("faults.json"), zoo::manifest_json() + "\n")?;
    }
    let data = dir.join("datasets");
    fs::create_dir_all(&data)?;
    for (j, g) in run.sources.iter().enumerate() {
        g.ds.save(data.join(format!("{}.csv", dataset_name(j))), None, Some(g.true_beta.clone()))?;
    }
    for (j, g) in run.seconds.iter().enumerate() {
        g.ds.save(data.join(format!("rt-{j:04}.csv")), None, Some(g.true_beta.clone()))?;
    }
    Ok(())
}
