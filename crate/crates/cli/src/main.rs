//! `mtlr`: generate datasets, fit them, and run metamorphic testing campaigns.
//!
//! Exit codes: 0 when the run completed without findings, 1 when a violation
//! or SUT failure was found, 2 on usage or harness errors.

mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use mtlr_core::bounds::forward_bound_with;
use mtlr_core::campaign::{self, render_text, run_campaign_with, write_outputs, CampaignRun};
use mtlr_core::gen::{self, Generator};
use mtlr_core::harness::{self, IoMode, TIMEOUT_FACTOR_ENV};
use mtlr_core::linreg::{self, Estimator};
use mtlr_core::mr::{self, parse_mr_list, MtgRecord};
use mtlr_core::zoo::{self, parse_fault_list};
use mtlr_core::{BoundConfig, CampaignConfig, Dataset, Form, GenSpec, MrId, SutHandle, SutSpec, Verdict};
use serde::Serialize;

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "mtlr", version, about = "Metamorphic testing of linear regression solvers")]
struct Cli {
    /// TOML file with `[error_bound]`, `[campaign]` and `[generator]` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random regression datasets (CSV plus JSON sidecar).
    Gen(GenArgs),
    /// Fit one dataset and print the coefficients, intercept first.
    Fit(FitArgs),
    /// Run one metamorphic test group on a dataset.
    Mr(MrArgs),
    /// Run a full campaign over SUTs, datasets and relations.
    Campaign(CampaignArgs),
    /// Run a campaign and compare metamorphic against random testing.
    CompareRt(CampaignArgs),
    /// Print the fault catalog as JSON.
    Catalog,
}

#[derive(Args, Clone)]
struct GeneratorArgs {
    #[arg(long)]
    d_min: Option<usize>,
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Noise standard deviation relative to each signal term.
    #[arg(long)]
    snr: Option<f64>,
    /// Fit through the origin (no intercept column).
    #[arg(long)]
    constrained: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    datasets: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    generator: GeneratorArgs,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset CSV, or `-` for standard input.
    file: PathBuf,
    /// Fit through the origin; overrides the sidecar.
    #[arg(long)]
    constrained: bool,
    /// Also report the forward error bound on standard error.
    #[arg(long)]
    bound: bool,
    #[arg(long)]
    safety_factor: Option<f64>,
}

#[derive(Args, Clone)]
struct SutArgs {
    /// External solver command, split like a POSIX shell word list but run
    /// without a shell. Repeatable.
    #[arg(long)]
    sut: Vec<String>,
    /// Pipe the dataset to external SUTs on stdin instead of passing its path.
    #[arg(long)]
    stdin: bool,
}

#[derive(Args)]
struct MrArgs {
    /// Dataset CSV (sidecar, if present, selects the form).
    file: PathBuf,
    #[arg(long)]
    mr: MrId,
    #[arg(long)]
    seed: Option<u64>,
    /// Catalog fault to run instead of the reference solver.
    #[arg(long, conflicts_with = "sut")]
    fault: Option<String>,
    #[command(flatten)]
    sut: SutArgs,
    /// Directory for the audit record and follow-up dataset.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    safety_factor: Option<f64>,
}

#[derive(Args, Clone)]
struct CampaignArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    datasets: Option<usize>,
    /// Comma-separated relations (`MR1.1,MR5.2`) or `all`.
    #[arg(long)]
    mrs: Option<String>,
    /// Comma-separated fault ids or `all`.
    #[arg(long)]
    faults: Option<String>,
    #[command(flatten)]
    sut: SutArgs,
    /// Include the reference solver (implied when no SUT or fault is named).
    #[arg(long)]
    reference: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    safety_factor: Option<f64>,
    /// Equivalence probes per fault; 0 disables filtering.
    #[arg(long)]
    probes: Option<usize>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    no_random_baseline: bool,
    #[command(flatten)]
    generator: GeneratorArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // A reader that hung up early wants no diagnostics.
            let closed = e.downcast_ref::<io::Error>().is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe);
            if !closed {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}

/// Writes to stdout, surfacing a closed pipe as an error instead of a panic.
fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(a) => gen_cmd(&file, a),
        Command::Fit(a) => fit_cmd(&file, a),
        Command::Mr(a) => mr_cmd(&file, a),
        Command::Campaign(a) => campaign_cmd(&file, a, false),
        Command::CompareRt(a) => campaign_cmd(&file, a, true),
        Command::Catalog => {
            emit(&format!("{}\n", zoo::manifest_json()))?;
            Ok(0)
        }
    }
}

fn bound_config(file: &FileConfig, flag: Option<f64>) -> Result<BoundConfig> {
    match flag.or(file.error_bound.safety_factor) {
        Some(c) if c > 0.0 && c.is_finite() => Ok(BoundConfig::with_safety_factor(c)),
        Some(c) => bail!("safety factor must be positive and finite, got {c}"),
        None => Ok(BoundConfig::default()),
    }
}

fn timeout_factor(file: &FileConfig) -> Result<f64> {
    let factor = match std::env::var(TIMEOUT_FACTOR_ENV) {
        Ok(v) => v.trim().parse::<f64>().with_context(|| format!("{TIMEOUT_FACTOR_ENV}={v} is not a number"))?,
        Err(_) => file.campaign.timeout_factor.unwrap_or(harness::DEFAULT_TIMEOUT_FACTOR),
    };
    if !(factor > 1.0 && factor.is_finite()) {
        bail!("timeout factor must exceed 1, got {factor}");
    }
    Ok(factor)
}

fn gen_spec(file: &FileConfig, a: &GeneratorArgs) -> GenSpec {
    let g = &file.generator;
    let d = GenSpec::default();
    GenSpec {
        d_range: (a.d_min.or(g.d_min).unwrap_or(d.d_range.0), a.d_max.or(g.d_max).unwrap_or(d.d_range.1)),
        n_range: (a.n_min.or(g.n_min).unwrap_or(d.n_range.0), a.n_max.or(g.n_max).unwrap_or(d.n_range.1)),
        value_bound: g.value_bound.unwrap_or(d.value_bound),
        snr: a.snr.or(g.snr).unwrap_or(d.snr),
        x_snr: g.x_snr.or(d.x_snr),
        seed: d.seed,
    }
}

fn constrained(file: &FileConfig, a: &GeneratorArgs) -> bool {
    a.constrained || file.campaign.constrained.unwrap_or(false)
}

fn gen_cmd(file: &FileConfig, a: GenArgs) -> Result<u8> {
    let seed = a.seed.or(file.campaign.seed).unwrap_or(0);
    let count = a.datasets.or(file.campaign.datasets).unwrap_or(1);
    let spec = GenSpec { seed, ..gen_spec(file, &a.generator) };
    let intercept = !constrained(file, &a.generator);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (i, g) in Generator::new(spec.clone()).take(count).enumerate() {
        let g = g?;
        let path = a.out.join(format!("dataset-{i:04}.csv"));
        let seed_i = gen::derive_seed(spec.seed, 0, i as u64);
        // The generating model has an intercept, so its coefficients do not
        // describe a fit through the origin.
        let true_beta = intercept.then_some(g.true_beta);
        g.ds.with_intercept(intercept).save(&path, Some(seed_i), true_beta)?;
        emit(&format!("{}\n", path.display()))?;
    }
    Ok(0)
}

fn load_dataset(path: &Path, force_constrained: bool) -> Result<Dataset> {
    let ds = if path == Path::new("-") {
        Dataset::read_csv_from(io::stdin().lock(), true)?
    } else {
        Dataset::load(path, true).with_context(|| format!("reading {}", path.display()))?.0
    };
    Ok(if force_constrained { ds.with_intercept(false) } else { ds })
}

fn format_coefficients(beta: &[f64]) -> String {
    beta.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn fit_cmd(file: &FileConfig, a: FitArgs) -> Result<u8> {
    let ds = load_dataset(&a.file, a.constrained)?;
    let cfg = bound_config(file, a.safety_factor)?;
    let est = linreg::fit_with(&ds, &cfg)?;
    emit(&format!("{}\n", format_coefficients(&est.beta)))?;
    if a.bound {
        let b = forward_bound_with(&ds, &est, &cfg)?;
        eprintln!("kappa={:e} backward={:e} delta_norm={:e}", b.kappa, b.backward, b.delta_norm);
    }
    Ok(0)
}

fn external_suts(args: &SutArgs, extra: &[String], timeout: f64) -> Result<Vec<SutSpec>> {
    let io_mode = if args.stdin { IoMode::Stdin } else { IoMode::PathArg };
    args.sut
        .iter()
        .chain(extra)
        .map(|cmd| {
            let mut words = shlex::split(cmd).filter(|w| !w.is_empty()).ok_or_else(|| anyhow!("cannot split SUT command `{cmd}`"))?;
            if words.is_empty() {
                bail!("empty SUT command");
            }
            let command = words.remove(0);
            let spec = SutSpec::External { command, args: words, io_mode };
            spec.handle(timeout)?;
            Ok(spec)
        })
        .collect()
}

#[derive(Serialize)]
struct MrOutput<'a> {
    sut: String,
    record: Option<&'a MtgRecord>,
    #[serde(flatten)]
    verdict: Verdict,
}

fn mr_cmd(file: &FileConfig, a: MrArgs) -> Result<u8> {
    let ds = load_dataset(&a.file, false)?;
    let cfg = bound_config(file, a.safety_factor)?;
    let timeout = timeout_factor(file)?;
    let seed = a.seed.or(file.campaign.seed).unwrap_or(0);
    let spec = match (&a.fault, external_suts(&a.sut, &[], timeout)?.pop()) {
        (Some(id), _) => SutSpec::Fault { id: id.parse()? },
        (None, Some(ext)) => ext,
        (None, None) => SutSpec::Reference,
    };
    let sut = spec.handle(timeout)?;

    if !a.mr.applies_to(Form::of(ds.has_intercept())) {
        return print_mr(&sut, None, Verdict::Inapplicable);
    }
    // The stored MR1.1 follow-up uses the reference output; the run rebuilds
    // it from the SUT's own source output.
    let reference = Estimator::exact(linreg::solve(&ds)?, ds.has_intercept());
    let mtg = match mr::make_followup_seeded(a.mr, &ds, Some(&reference), seed) {
        Ok(m) => m,
        Err(mtlr_core::Error::Inapplicable { .. }) => return print_mr(&sut, None, Verdict::Inapplicable),
        Err(e) => return Err(e.into()),
    };
    let mut calibrated = sut.clone();
    harness::calibrate(&mut calibrated, &ds)?;
    let source = harness::execute(&calibrated, &ds)?;
    let verdict = mr::run_mtg_with_source(&calibrated, &mtg, &source, &cfg)?;

    let source_ref = a.file.file_stem().map_or_else(|| "source".into(), |s| s.to_string_lossy().into_owned());
    let record = MtgRecord::new(a.mr, mtg.spec.clone(), source_ref);
    if let Some(out) = &a.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        fs::write(out.join("mtg.json"), serde_json::to_string_pretty(&record)?)?;
        let followup = match source.status.beta() {
            Some(beta) if mtg.source_output_dependent => {
                mtg.spec.apply_to_dataset(&ds, Some(&Estimator::exact(beta.to_vec(), ds.has_intercept())))?
            }
            _ => mtg.followup().clone(),
        };
        followup.save(out.join("followup.csv"), None, None)?;
    }
    print_mr(&sut, Some(&record), verdict)
}

fn print_mr(sut: &SutHandle, record: Option<&MtgRecord>, verdict: Verdict) -> Result<u8> {
    let out = MrOutput { sut: sut.label(), record, verdict };
    emit(&format!("{}\n", serde_json::to_string_pretty(&out)?))?;
    Ok(u8::from(verdict.is_violated() || matches!(verdict, Verdict::SourceFailure { .. } | Verdict::FollowupFailure { .. })))
}

fn campaign_config(file: &FileConfig, a: &CampaignArgs) -> Result<CampaignConfig> {
    let c = &file.campaign;
    let timeout = timeout_factor(file)?;
    let mrs = parse_mr_list(a.mrs.as_deref().or(c.mrs.as_deref()).unwrap_or("all"))?;
    let faults = match a.faults.as_deref().or(c.faults.as_deref()) {
        Some(list) => parse_fault_list(list)?,
        None => Vec::new(),
    };
    let externals = external_suts(&a.sut, if a.sut.sut.is_empty() { &c.sut } else { &[] }, timeout)?;
    let mut suts = Vec::new();
    if a.reference || (faults.is_empty() && externals.is_empty()) {
        suts.push(SutSpec::Reference);
    }
    suts.extend(externals);
    suts.extend(SutSpec::faults(&faults));
    let defaults = CampaignConfig::default();
    Ok(CampaignConfig {
        seed: a.seed.or(c.seed).unwrap_or(defaults.seed),
        datasets: a.datasets.or(c.datasets).unwrap_or(defaults.datasets),
        mrs,
        suts,
        gen: gen_spec(file, &a.generator),
        form: Form::of(!constrained(file, &a.generator)),
        bound: bound_config(file, a.safety_factor)?,
        probes: a.probes.or(c.probes).unwrap_or(defaults.probes),
        timeout_factor: timeout,
        workers: a.workers.or(c.workers).unwrap_or(defaults.workers),
        random_baseline: !a.no_random_baseline,
    })
}

/// Appends every finished work item to `verdicts.partial.jsonl` so an
/// interrupted campaign leaves its results behind.
struct PartialLog {
    path: PathBuf,
    w: BufWriter<File>,
}

impl PartialLog {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("verdicts.partial.jsonl");
        let w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        Ok(Self { path, w })
    }

    fn append(&mut self, item: &campaign::ItemResult) -> mtlr_core::Result<()> {
        for v in &item.verdicts {
            serde_json::to_writer(&mut self.w, v)?;
            self.w.write_all(b"\n")?;
        }
        self.w.flush()?;
        Ok(())
    }
}

fn campaign_cmd(file: &FileConfig, a: CampaignArgs, compare: bool) -> Result<u8> {
    let cfg = campaign_config(file, &a)?;
    if compare && !cfg.random_baseline {
        bail!("compare-rt needs the random baseline");
    }
    let mut partial = a.out.as_deref().map(PartialLog::create).transpose()?;
    let run = run_campaign_with(&cfg, |item| match partial.as_mut() {
        Some(p) => p.append(item),
        None => Ok(()),
    })?;
    if let (Some(out), Some(p)) = (&a.out, partial) {
        write_outputs(&run, &cfg, out)?;
        drop(p.w);
        fs::remove_file(&p.path)?;
    }
    if compare {
        emit(&compare_text(&run))?;
    } else {
        emit(&render_text(&run.report))?;
    }
    let found = run.log.verdicts.iter().any(|v| !matches!(v.verdict, Verdict::Satisfied(_) | Verdict::Inapplicable))
        || run.log.random_baseline.iter().any(|r| r.failed);
    Ok(u8::from(found))
}

fn ratio(r: Option<f64>) -> String {
    r.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn compare_text(run: &CampaignRun) -> String {
    let rep = &run.report;
    let mut s = String::from("MR      pairs  failed  extended\n");
    for m in &rep.per_mr {
        s += &format!("{:<7} {:>5}  {:>6}  {:>8}\n", m.mr.name(), m.tally.pairs(), m.tally.failed_pairs(), ratio(m.mt_extended));
    }
    let rt = rep.rt_baseline.as_ref();
    s += &format!("MT median extended ratio: {}\n", ratio(rep.mt_extended_median));
    s += &format!(
        "R2 extended ratio: {} ({} of {} pairs failed)\n",
        ratio(rt.and_then(|r| r.extended_ratio)),
        rt.map_or(0, |r| r.failed),
        rt.map_or(0, |r| r.pairs)
    );
    let verdict = match (rep.mt_extended_median, rt.and_then(|r| r.extended_ratio)) {
        (Some(mt), Some(r2)) if mt > r2 => "MT > R2",
        (Some(mt), Some(r2)) if mt < r2 => "MT < R2",
        (Some(_), Some(_)) => "MT = R2",
        _ => "undefined",
    };
    s += &format!("comparison: {verdict}\n");
    s
}
