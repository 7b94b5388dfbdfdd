use std::fs;
use std::path::Path;

use trunctest::checks::{in_regime, monotone_in_n, region_map};
use trunctest::instance::{build_instance, InstanceKind};
use trunctest::manifest::{calibrate_all, calibrate_kind, CalibrationManifest, ManifestEntry, NullCell, MANIFEST_FILE};
use trunctest::report::emit_report;
use trunctest::sweep::{run_sweep, run_sweep_with, wilson_half_width, Cell, SweepOptions, SweepSpec, RESULTS_FILE, VERDICTS_FILE};
use trunctest_core::hardinstance::calibrate_hard_instance;
use trunctest_core::rng::derive_seed;
use trunctest_core::sampling::RejectionSampler;
use trunctest_core::testers::{test_learn_then_test_with, MeanEstimator, TesterConfig, TesterKind};

fn default_manifest(path: &Path) {
    let entries = TesterKind::ALL
        .into_iter()
        .map(|k| ManifestEntry { tester: k, c_n: k.default_c_n(), c_thr: k.default_c_thr(), accept_rates: vec![], null_grid: vec![] })
        .collect();
    CalibrationManifest { base_seed: 0, trials: 0, entries }.save(path).unwrap();
}

fn small_spec(out: &Path) -> SweepSpec {
    let cell = |instance, tester, eps| Cell { d: 4, alpha: 0.25, eps, instance, tester, n_ladder: vec![40, 80, 160] };
    SweepSpec {
        grid: vec![
            cell(InstanceKind::NullTail, TesterKind::UnknownTrunc, 0.05),
            cell(InstanceKind::AltTail, TesterKind::KnownTrunc, 0.05),
            cell(InstanceKind::AltFull, TesterKind::LearnThenTest, 0.0),
        ],
        trials: 30,
        base_seed: 11,
        output_dir: out.to_path_buf(),
    }
}

fn read(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

#[test]
fn interrupted_sweep_resumes_to_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join(MANIFEST_FILE);
    default_manifest(&manifest);

    let whole = small_spec(&dir.path().join("whole"));
    run_sweep(&whole, &manifest).unwrap();

    let parts = small_spec(&dir.path().join("parts"));
    let partial = run_sweep_with(&parts, &manifest, SweepOptions { stop_after_blocks: Some(4) }).unwrap();
    assert_eq!(partial.iter().map(|c| c.points.len()).sum::<usize>(), 4);
    // A block whose verdicts landed without its aggregate row.
    let verdicts = parts.output_dir.join(VERDICTS_FILE);
    let mut text = fs::read_to_string(&verdicts).unwrap();
    text.push_str("UnknownTrunc,4,0.25,0.05,999,1,0.0,0.0,ACCEPT\n");
    fs::write(&verdicts, text).unwrap();
    run_sweep_with(&parts, &manifest, SweepOptions { stop_after_blocks: Some(2) }).unwrap();
    let curves = run_sweep(&parts, &manifest).unwrap();

    assert_eq!(curves.iter().map(|c| c.points.len()).sum::<usize>(), 9);
    for f in [RESULTS_FILE, VERDICTS_FILE] {
        assert_eq!(read(&whole.output_dir.join(f)), read(&parts.output_dir.join(f)), "{f}");
    }
}

#[test]
fn resume_refuses_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join(MANIFEST_FILE);
    default_manifest(&manifest);
    let spec = small_spec(&dir.path().join("out"));
    run_sweep_with(&spec, &manifest, SweepOptions { stop_after_blocks: Some(1) }).unwrap();
    let mut other = spec.clone();
    other.base_seed += 1;
    assert!(run_sweep(&other, &manifest).is_err());
}

#[test]
fn out_of_domain_cells_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(&dir.path().join("out"));
    spec.grid[1].alpha = 0.5;
    assert!(spec.validate().is_err());
}

#[test]
fn sweep_without_manifest_fails() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(&dir.path().join("out"));
    let err = run_sweep(&spec, &dir.path().join(MANIFEST_FILE)).unwrap_err();
    assert!(err.to_string().contains("calibrate"), "{err}");
}

#[test]
fn single_cell_hundred_trials() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join(MANIFEST_FILE);
    default_manifest(&manifest);
    let spec = SweepSpec {
        grid: vec![Cell {
            d: 8,
            alpha: 0.5,
            eps: 0.01,
            instance: InstanceKind::AltTail,
            tester: TesterKind::UnknownTrunc,
            n_ladder: vec![50, 100, 200, 400],
        }],
        trials: 100,
        base_seed: 3,
        output_dir: dir.path().join("out"),
    };
    spec.validate_for_acceptance().unwrap();
    let curves = run_sweep(&spec, &manifest).unwrap();
    assert_eq!(curves.len(), 1);
    let points = &curves[0].points;
    assert_eq!(points.iter().map(|p| p.n).collect::<Vec<_>>(), vec![50, 100, 200, 400]);
    for p in points {
        assert_eq!(p.trials, 100);
        assert_eq!(p.half_width, wilson_half_width(p.successes, 100));
    }
    let files = emit_report(&curves, &spec.output_dir).unwrap();
    assert_eq!(files.plots.len(), 1);
    let verdict_lines = fs::read_to_string(spec.output_dir.join(VERDICTS_FILE)).unwrap().lines().count();
    assert_eq!(verdict_lines, 1 + 4 * 100);
}

fn ltt_rates(d: usize, n: usize, estimator: MeanEstimator, trials: usize) -> (f64, f64) {
    let h = calibrate_hard_instance(0.1).unwrap();
    let rate = |kind: InstanceKind, want_accept: bool| {
        let inst = build_instance(kind, d, h.alpha, 0.1, 5).unwrap();
        let source = RejectionSampler::new(inst.spec);
        let hits = (0..trials)
            .filter(|&t| {
                let cfg = TesterConfig::with_defaults(TesterKind::LearnThenTest, h.alpha, derive_seed(17, t as u64));
                let v = test_learn_then_test_with(&source, d, &cfg, n, estimator).unwrap();
                (v.decision.name() == "ACCEPT") == want_accept
            })
            .count();
        hits as f64 / trials as f64
    };
    (rate(InstanceKind::NullTail, true), rate(InstanceKind::Hard, false))
}

#[test]
fn learn_then_test_needs_order_d_samples() {
    let h = calibrate_hard_instance(0.1).unwrap();
    let d = 32;
    let n = ((d as f64).sqrt() / (h.alpha * h.alpha)).ceil() as usize;
    let (null_ok, hard_ok) = ltt_rates(d, n, MeanEstimator::TailCorrected, 100);
    assert!(null_ok.min(hard_ok) <= 0.6, "n={n}: {null_ok} {hard_ok}");

    let cfg = TesterConfig::with_defaults(TesterKind::LearnThenTest, h.alpha, 0);
    let (null_ok, hard_ok) = ltt_rates(d, cfg.sample_size(TesterKind::LearnThenTest, d), MeanEstimator::TailCorrected, 100);
    assert!(null_ok.min(hard_ok) >= 0.7, "{null_ok} {hard_ok}");
}

#[test]
fn coordinate_median_is_fooled_by_the_tail() {
    let h = calibrate_hard_instance(0.1).unwrap();
    let d = 16;
    let cfg = TesterConfig::with_defaults(TesterKind::LearnThenTest, h.alpha, 0);
    let (null_ok, hard_ok) = ltt_rates(d, cfg.sample_size(TesterKind::LearnThenTest, d), MeanEstimator::CoordinateMedian, 100);
    assert!(null_ok.min(hard_ok) <= 0.6, "{null_ok} {hard_ok}");
}

#[test]
fn untruncated_calibration_respects_chebyshev() {
    // Var of the normalized statistic is about 1 under N(0, I), so Chebyshev
    // puts the 80% quantile below √5.
    let grid = [NullCell { d: 16, alpha: 0.25, eps: 0.0, instance: InstanceKind::NullFull }];
    let e = calibrate_kind(TesterKind::UnknownTrunc, &grid, 200, 4).unwrap();
    assert!(e.c_thr <= 3.0, "{}", e.c_thr);
    assert!(e.accept_rates[0] >= 0.8);
}

#[test]
fn default_sweep_reproduces_the_region_map() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join(MANIFEST_FILE);
    calibrate_all(200, 1).unwrap().save(&manifest).unwrap();
    let spec = SweepSpec::default_phase_transition(dir.path().join("out"), 1);
    let curves = run_sweep(&spec, &manifest).unwrap();
    for r in region_map(&curves) {
        assert!(r.holds, "{} / {}: expected {}, got {}", r.regime, r.knowledge, r.label, r.evidence);
    }
    for c in curves.iter().filter(|c| in_regime(c)) {
        assert!(monotone_in_n(c), "cell {} not monotone: {:?}", c.cell_index, c.points);
    }
}
