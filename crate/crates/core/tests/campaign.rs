//! Campaign bookkeeping checked against a recount of the raw verdict log.

use std::collections::BTreeMap;

use mtlr_core::campaign::{run_campaign, run_campaign_with, write_outputs, CampaignRun, Tally, VerdictLog};
use mtlr_core::{CampaignConfig, Fault, Form, MrId, SutSpec, Verdict};

fn small(seed: u64) -> CampaignConfig {
    let faults = [
        Fault::Noop,
        Fault::ColumnOrder,
        Fault::NegatedOutput,
        Fault::NullOutput,
        Fault::InfiniteLoop,
        Fault::RankGuardAlways,
        Fault::InterceptFlagNegated,
        Fault::YPlusOne,
    ];
    let mut suts = vec![SutSpec::Reference];
    suts.extend(SutSpec::faults(&faults));
    CampaignConfig { seed, datasets: 12, suts, probes: 20, ..CampaignConfig::default() }
}

fn recount(log: &VerdictLog) -> BTreeMap<(String, MrId), Tally> {
    let mut cells: BTreeMap<(String, MrId), Tally> = BTreeMap::new();
    for v in &log.verdicts {
        let t = cells.entry((v.sut.clone(), v.mr)).or_default();
        match v.verdict {
            Verdict::Satisfied(_) => t.satisfied += 1,
            Verdict::Violated(_) => t.violated += 1,
            Verdict::SourceFailure { .. } => t.source_failed += 1,
            Verdict::FollowupFailure { .. } => t.followup_failed += 1,
            Verdict::Inapplicable => t.inapplicable += 1,
        }
    }
    cells
}

fn run(cfg: &CampaignConfig) -> CampaignRun {
    run_campaign(cfg).expect("campaign")
}

#[test]
fn report_matches_a_recount_and_conserves_pairs() {
    let cfg = small(3);
    let r = run(&cfg);
    let counts = recount(&r.log);
    assert_eq!(counts.len(), r.report.cells.len());
    for cell in &r.report.cells {
        assert_eq!(counts[&(cell.sut.clone(), cell.mr)], cell.tally, "{} {}", cell.sut, cell.mr);
        assert_eq!(cell.tally.total(), cfg.datasets, "{} {}", cell.sut, cell.mr);
    }
    for s in &r.report.per_mr {
        let mut t = Tally::default();
        counts.iter().filter(|((_, mr), _)| *mr == s.mr).for_each(|(_, c)| t.merge(c));
        assert_eq!(t, s.tally);
        for ratio in [s.ratio_of_violation, s.mt_extended].into_iter().flatten() {
            assert!((0.0..=1.0).contains(&ratio));
        }
    }
}

#[test]
fn equivalent_faults_are_excluded_and_noop_is_equivalent() {
    let r = run(&small(4));
    let noop = r.report.equivalence.iter().find(|e| e.fault == Fault::Noop).unwrap();
    assert!(noop.equivalent && noop.probes_used == 20);
    assert!(r.log.verdicts.iter().all(|v| v.sut != "noop"));
    let live = r.report.equivalence.iter().filter(|e| !e.equivalent).count();
    assert_eq!(live, 7);
    assert!(r.report.equivalence.iter().filter(|e| !e.equivalent).all(|e| e.probes_used >= 1));
}

#[test]
fn random_baseline_uses_two_cases_per_pair() {
    let cfg = small(5);
    let r = run(&cfg);
    let rt = r.report.rt_baseline.clone().unwrap();
    assert_eq!(rt.pairs, r.log.random_baseline.len());
    assert_eq!(rt.pairs, 8 * cfg.datasets);
    for p in &r.log.random_baseline {
        // The second case runs only when the first did not already fail.
        assert_eq!(p.second.is_some(), p.first == mtlr_core::harness::StatusKind::Ok);
        assert_eq!(p.failed, p.first != mtlr_core::harness::StatusKind::Ok || p.second != Some(mtlr_core::harness::StatusKind::Ok));
    }
    assert_eq!(r.seconds.len(), cfg.datasets);
}

#[test]
fn reference_and_faults_get_the_expected_signals() {
    let r = run(&small(6));
    let cell = |s: &str, mr| r.report.cell(s, mr).unwrap().tally;
    assert!(MrId::ALL.iter().all(|&mr| cell("reference", mr).violated == 0));
    assert!(MrId::ALL.iter().all(|&mr| cell("null-output", mr).source_failed == 12));
    assert!(MrId::ALL.iter().all(|&mr| cell("infinite-loop", mr).source_failed == 12));
    assert!(cell("column-order", MrId::Mr5_2).violated > 0);
    // Negating the whole output commutes with every linear map except the shifts.
    assert!(cell("negated-output", MrId::Mr4_1).violated > 0);
    assert_eq!(cell("negated-output", MrId::Mr3_1).violated, 0);
    let det = r.report.detection.iter().find(|d| d.sut == "null-output").unwrap();
    assert!(det.detected && det.violated_by.is_empty());
}

#[test]
fn zero_survived_pairs_give_undefined_ratios() {
    let cfg = CampaignConfig { datasets: 4, suts: SutSpec::faults(&[Fault::NullOutput]), probes: 0, ..CampaignConfig::default() };
    let r = run(&cfg);
    assert!(r.report.per_mr.iter().all(|s| s.ratio_of_violation.is_none() && s.mt_extended == Some(1.0)));
}

#[test]
fn constrained_campaign_marks_intercept_relations_inapplicable() {
    let cfg = CampaignConfig { form: Form::Constrained, datasets: 5, ..small(7) };
    let r = run(&cfg);
    for v in &r.log.verdicts {
        let restricted = matches!(v.mr, MrId::Mr1_2 | MrId::Mr4_1 | MrId::Mr4_2);
        assert_eq!(restricted, matches!(v.verdict, Verdict::Inapplicable), "{} {}", v.sut, v.mr);
    }
    assert!(r.sources.iter().all(|g| !g.ds.has_intercept()));
}

#[test]
fn sink_sees_every_item_and_outputs_are_written() {
    let cfg = small(8);
    let mut seen = 0;
    let r = run_campaign_with(&cfg, |item| {
        seen += item.verdicts.len();
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, r.log.verdicts.len());

    let dir = tempfile::tempdir().unwrap();
    write_outputs(&r, &cfg, dir.path()).unwrap();
    for f in ["report.json", "verdicts.json", "timing.json", "mtgs.json", "report.txt", "faults.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let csv = dir.path().join("datasets").join("dataset-0000.csv");
    let (ds, sidecar) = mtlr_core::Dataset::load(&csv, true).unwrap();
    assert_eq!(ds, r.sources[0].ds);
    assert!(sidecar.is_some());

    let log: VerdictLog = serde_json::from_slice(&std::fs::read(dir.path().join("verdicts.json")).unwrap()).unwrap();
    assert_eq!(log, r.log);
    let mtgs: Vec<mtlr_core::mr::MtgRecord> = serde_json::from_slice(&std::fs::read(dir.path().join("mtgs.json")).unwrap()).unwrap();
    assert_eq!(mtgs, r.mtgs);
    assert!(mtgs.iter().filter(|m| m.mr == MrId::Mr1_1).all(|m| m.followup_ref.ends_with("@sut-output")));
}

#[test]
fn worker_count_does_not_change_the_log() {
    let one = run(&CampaignConfig { workers: 1, ..small(9) });
    let many = run(&CampaignConfig { workers: 4, ..small(9) });
    assert_eq!(serde_json::to_string(&one.log).unwrap(), serde_json::to_string(&many.log).unwrap());
    assert_eq!(one.report, many.report);
}

#[test]
fn different_seeds_draw_different_datasets() {
    let a = run(&CampaignConfig { datasets: 3, suts: vec![SutSpec::Reference], ..CampaignConfig::default() });
    let b = run(&CampaignConfig { seed: 1, datasets: 3, suts: vec![SutSpec::Reference], ..CampaignConfig::default() });
    assert_ne!(a.sources[0].ds, b.sources[0].ds);
}

#[test]
fn unfiltered_noop_satisfies_everything() {
    // Filtering disabled so the equivalent fault is actually run.
    let cfg = CampaignConfig { datasets: 10, suts: SutSpec::faults(&[Fault::Noop]), probes: 0, ..CampaignConfig::default() };
    let r = run(&cfg);
    assert!(r.log.verdicts.iter().all(|v| matches!(v.verdict, Verdict::Satisfied(_))));
    assert!(r.report.per_mr.iter().all(|s| s.ratio_of_violation == Some(0.0)));
    assert_eq!(r.report.rt_baseline.unwrap().extended_ratio, Some(0.0));
}

#[test]
fn column_order_is_caught_by_variable_swap() {
    let cfg =
        CampaignConfig { datasets: 10, suts: SutSpec::faults(&[Fault::ColumnOrder]), mrs: vec![MrId::Mr5_2], ..CampaignConfig::default() };
    let r = run(&cfg);
    assert!(r.report.mr(MrId::Mr5_2).unwrap().ratio_of_violation.unwrap() > 0.0);
}
