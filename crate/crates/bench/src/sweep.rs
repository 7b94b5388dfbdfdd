//! Power-curve sweeps.
//!
//! Work is split into blocks, one per (cell, n). Trials inside a block run on
//! the rayon pool; a block's verdict rows and its aggregate row are appended
//! to `verdicts.csv` and `results.csv` only once the whole block is done, so
//! a restarted sweep skips the completed prefix and finishes with the same
//! bytes as an uninterrupted one.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use trunctest_core::hardinstance::calibrate_hard_instance;
use trunctest_core::rng::derive_seed;
use trunctest_core::sampling::RejectionSampler;
use trunctest_core::testers::{
    test_known_truncation_with_n, test_learn_then_test_with, test_unknown_truncation_with_n,
    MeanEstimator, TestVerdict, TesterConfig, TesterKind,
};

use crate::error::IoContext;
use crate::instance::{build_instance, Instance, InstanceKind};
use crate::manifest::{CalibrationManifest, ManifestEntry};
use crate::report::{write_results_header, ResultRow};
use crate::{BenchError, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const VERDICTS_FILE: &str = "verdicts.csv";

/// Trials required of any cell feeding an acceptance criterion.
pub const ACCEPTANCE_MIN_TRIALS: usize = 100;

const WILSON_Z: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub d: usize,
    pub alpha: f64,
    pub eps: f64,
    pub instance: InstanceKind,
    pub tester: TesterKind,
    pub n_ladder: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: Vec<Cell>,
    pub trials: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

impl SweepSpec {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        for (i, c) in self.grid.iter().enumerate() {
            if c.n_ladder.is_empty() {
                return bad(format!("cell {i}: empty n_ladder"));
            }
            if c.n_ladder.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("cell {i}: n_ladder must be strictly increasing"));
            }
            if c.n_ladder[0] == 0 {
                return bad(format!("cell {i}: n must be positive"));
            }
            if c.d == 0 {
                return bad(format!("cell {i}: d must be positive"));
            }
            let probe = TesterConfig { alpha: c.alpha, c_n: 1.0, c_thr: 1.0, seed: 0 };
            if let Err(e) = probe.validate(c.tester) {
                return bad(format!("cell {i}: {e}"));
            }
        }
        Ok(())
    }

    /// Validation plus the trial floor for acceptance-grade runs.
    pub fn validate_for_acceptance(&self) -> Result<()> {
        self.validate()?;
        if self.trials < ACCEPTANCE_MIN_TRIALS {
            return Err(BenchError::InvalidSpec(format!(
                "acceptance runs need at least {ACCEPTANCE_MIN_TRIALS} trials per cell"
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 (first 16 characters) of the grid, trial count, base seed
    /// and manifest constants. The output directory is excluded.
    pub fn config_hash(&self, manifest: &CalibrationManifest) -> Result<String> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            grid: &'a [Cell],
            trials: usize,
            base_seed: u64,
            constants: Vec<(&'static str, f64, f64)>,
        }
        let constants = manifest.entries.iter().map(|e| (e.tester.name(), e.c_n, e.c_thr)).collect();
        let bytes = serde_json::to_vec(&Hashed {
            grid: &self.grid,
            trials: self.trials,
            base_seed: self.base_seed,
            constants,
        })?;
        Ok(hex::encode(Sha256::digest(&bytes))[..16].to_string())
    }

    /// Desk-scale layout of the three regimes at d = 16, each with the
    /// unknown-set and known-set testers, over ladders around each tester's
    /// standard n.
    ///
    /// | regime | ε     | α                | instances |
    /// |--------|-------|------------------|-----------|
    /// | small truncation | 0.005 | 0.25   | null_tail, alt_tail |
    /// | near accuracy    | 0.1   | hard α | null_tail, null_hard_set, hard |
    /// | beyond accuracy  | 0.2   | 0.08   | null_hard_set, hard_at_alpha |
    pub fn default_phase_transition(output_dir: PathBuf, base_seed: u64) -> Self {
        let d = 16;
        let hard = calibrate_hard_instance(0.1).expect("eps in range");
        let ladder = |kind: TesterKind, alpha: f64| {
            let n = TesterConfig { alpha, c_n: kind.default_c_n(), c_thr: 1.0, seed: 0 }.sample_size(kind, d);
            vec![n / 4, n / 2, n, 2 * n]
        };
        let cell = |alpha: f64, eps: f64, instance, tester| Cell {
            d,
            alpha,
            eps,
            instance,
            tester,
            n_ladder: ladder(tester, alpha),
        };
        use InstanceKind::*;
        use TesterKind::*;
        let grid = vec![
            cell(0.25, 0.005, NullTail, UnknownTrunc),
            cell(0.25, 0.005, AltTail, UnknownTrunc),
            cell(0.25, 0.005, NullTail, KnownTrunc),
            cell(0.25, 0.005, AltTail, KnownTrunc),
            cell(hard.alpha, 0.1, NullTail, UnknownTrunc),
            cell(hard.alpha, 0.1, Hard, UnknownTrunc),
            cell(hard.alpha, 0.1, NullTail, LearnThenTest),
            cell(hard.alpha, 0.1, Hard, LearnThenTest),
            cell(hard.alpha, 0.1, NullHardSet, KnownTrunc),
            cell(hard.alpha, 0.1, Hard, KnownTrunc),
            cell(0.08, 0.2, HardAtAlpha, UnknownTrunc),
            cell(0.08, 0.2, NullHardSet, KnownTrunc),
            cell(0.08, 0.2, HardAtAlpha, KnownTrunc),
        ];
        Self { grid, trials: 100, base_seed, output_dir }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    /// Wilson 95% half-width.
    pub half_width: f64,
    pub threshold: f64,
}

impl RatePoint {
    pub fn new(n: usize, trials: usize, successes: usize, threshold: f64) -> Self {
        Self {
            n,
            trials,
            successes,
            rate: successes as f64 / trials as f64,
            half_width: wilson_half_width(successes, trials),
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub cell_index: usize,
    pub cell: Cell,
    pub c_n: f64,
    pub c_thr: f64,
    pub base_seed: u64,
    pub cell_seed: u64,
    pub config_hash: String,
    pub points: Vec<RatePoint>,
}

pub fn wilson_half_width(successes: usize, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()
}

/// One row of `verdicts.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub tester: String,
    pub d: usize,
    pub alpha: f64,
    pub eps: f64,
    pub n: usize,
    pub seed: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub decision: String,
}

pub fn cell_seed(base_seed: u64, cell_index: usize) -> u64 {
    derive_seed(base_seed, cell_index as u64)
}

/// Seed of trial `trial` at ladder position `n_index`.
pub fn trial_seed(cell_seed: u64, n_index: usize, trial: usize) -> u64 {
    derive_seed(derive_seed(cell_seed, n_index as u64 + 1), trial as u64)
}

/// A cell's instance and, for the known-set tester, its centering vector.
pub struct PreparedCell {
    pub instance: Instance,
    pub mu_s_null: Option<Vec<f64>>,
}

pub fn prepare_cell(cell: &Cell, cell_seed: u64) -> Result<PreparedCell> {
    let instance = build_instance(cell.instance, cell.d, cell.alpha, cell.eps, derive_seed(cell_seed, 0))?;
    let mu_s_null = match cell.tester {
        TesterKind::KnownTrunc => Some(instance.null_mean(cell.alpha, derive_seed(cell_seed, u64::MAX))?),
        _ => None,
    };
    Ok(PreparedCell { instance, mu_s_null })
}

pub fn run_trial(cell: &Cell, prepared: &PreparedCell, cfg: &TesterConfig, n: usize) -> Result<TestVerdict> {
    let source = RejectionSampler::new(prepared.instance.spec.clone());
    let v = match cell.tester {
        TesterKind::UnknownTrunc => test_unknown_truncation_with_n(&source, cell.d, cfg, n)?,
        TesterKind::KnownTrunc => test_known_truncation_with_n(
            &source,
            prepared.instance.set(),
            cell.d,
            cfg,
            prepared.mu_s_null.as_deref().expect("prepared for the known-set tester"),
            n,
        )?,
        TesterKind::LearnThenTest => {
            test_learn_then_test_with(&source, cell.d, cfg, n, MeanEstimator::default())?
        }
    };
    Ok(v)
}

/// Runs every trial of one block and returns the verdicts in trial order.
pub fn run_block(
    cell: &Cell,
    prepared: &PreparedCell,
    entry: &ManifestEntry,
    cell_seed: u64,
    n_index: usize,
    trials: usize,
) -> Result<Vec<(u64, TestVerdict)>> {
    let n = cell.n_ladder[n_index];
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(cell_seed, n_index, t);
            let cfg = TesterConfig { alpha: cell.alpha, c_n: entry.c_n, c_thr: entry.c_thr, seed };
            run_trial(cell, prepared, &cfg, n).map(|v| (seed, v))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Stop after this many newly completed blocks (simulates an interruption).
    pub stop_after_blocks: Option<usize>,
}

/// Runs (or resumes) a sweep. Requires the calibration manifest at
/// `manifest_path`.
pub fn run_sweep(spec: &SweepSpec, manifest_path: &Path) -> Result<Vec<PowerCurve>> {
    run_sweep_with(spec, manifest_path, SweepOptions::default())
}

pub fn run_sweep_with(spec: &SweepSpec, manifest_path: &Path, opts: SweepOptions) -> Result<Vec<PowerCurve>> {
    spec.validate()?;
    let manifest = CalibrationManifest::load(manifest_path)?;
    let hash = spec.config_hash(&manifest)?;
    let out = &spec.output_dir;
    fs::create_dir_all(out).at(out)?;
    let results_path = out.join(RESULTS_FILE);
    let verdicts_path = out.join(VERDICTS_FILE);

    let blocks: Vec<(usize, usize)> = spec
        .grid
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.n_ladder.len()).map(move |ni| (ci, ni)))
        .collect();

    let done = completed_rows(&results_path, spec, &hash, &blocks)?;
    let trials_done = done * spec.trials;
    truncate_verdicts(&verdicts_path, trials_done)?;
    if done == 0 {
        let mut w = csv::Writer::from_writer(File::create(&results_path).at(&results_path)?);
        write_results_header(&mut w)?;
        w.flush().at(&results_path)?;
    }

    let mut prepared: Option<(usize, PreparedCell)> = None;
    for (newly, &(ci, ni)) in blocks[done..].iter().enumerate() {
        if opts.stop_after_blocks.is_some_and(|k| newly >= k) {
            break;
        }
        let cell = &spec.grid[ci];
        let seed = cell_seed(spec.base_seed, ci);
        if prepared.as_ref().is_none_or(|(i, _)| *i != ci) {
            prepared = Some((ci, prepare_cell(cell, seed)?));
        }
        let prep = &prepared.as_ref().expect("just set").1;
        let entry = manifest.entry(cell.tester)?;
        let verdicts = run_block(cell, prep, entry, seed, ni, spec.trials)?;

        append_verdicts(&verdicts_path, cell, cell.n_ladder[ni], &verdicts)?;
        let successes = verdicts.iter().filter(|(_, v)| cell.instance.is_success(v.decision)).count();
        let row = ResultRow::new(
            ci,
            cell,
            entry,
            spec.base_seed,
            seed,
            &hash,
            RatePoint::new(cell.n_ladder[ni], spec.trials, successes, verdicts[0].1.threshold),
        );
        let file = OpenOptions::new().append(true).open(&results_path).at(&results_path)?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        w.serialize(&row)?;
        w.flush().at(&results_path)?;
    }
    crate::report::parse_results_csv(&results_path)
}

/// Number of blocks already in `results.csv`, checked against the expected
/// block order and config hash.
fn completed_rows(path: &Path, spec: &SweepSpec, hash: &str, blocks: &[(usize, usize)]) -> Result<usize> {
    if !path.exists() {
        return Ok(0);
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut count = 0;
    for row in r.deserialize::<ResultRow>() {
        let row = row?;
        let Some(&(ci, ni)) = blocks.get(count) else {
            return Err(BenchError::Malformed("more result rows than blocks".into()));
        };
        if row.config_hash != hash {
            return Err(BenchError::InvalidSpec(format!(
                "{} belongs to config {}, not {hash}",
                path.display(),
                row.config_hash
            )));
        }
        if row.cell != ci || row.n != spec.grid[ci].n_ladder[ni] {
            return Err(BenchError::Malformed(format!("row {count} is out of block order")));
        }
        count += 1;
    }
    Ok(count)
}

/// Keeps the header and the first `rows` verdict rows, dropping any block
/// that was written without its aggregate row.
fn truncate_verdicts(path: &Path, rows: usize) -> Result<()> {
    if rows == 0 || !path.exists() {
        let mut w = csv::Writer::from_writer(File::create(path).at(path)?);
        w.write_record(["tester", "d", "alpha", "eps", "n", "seed", "statistic", "threshold", "decision"])?;
        w.flush().at(path)?;
        return Ok(());
    }
    let text = fs::read_to_string(path).at(path)?;
    let keep: String = text.split_inclusive('\n').take(rows + 1).collect();
    fs::write(path, keep).at(path)
}

fn append_verdicts(path: &PathBuf, cell: &Cell, n: usize, verdicts: &[(u64, TestVerdict)]) -> Result<()> {
    let file = OpenOptions::new().append(true).open(path).at(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
    for (seed, v) in verdicts {
        w.serialize(VerdictRow {
            tester: v.tester.name().into(),
            d: cell.d,
            alpha: cell.alpha,
            eps: cell.eps,
            n,
            seed: *seed,
            statistic: v.statistic,
            threshold: v.threshold,
            decision: v.decision.name().into(),
        })?;
    }
    w.flush().at(path)?;
    let mut inner = w.into_inner().map_err(|e| BenchError::Io { path: path.clone(), source: e.into_error() })?;
    inner.flush().at(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_reference_values() {
        // 50/100: z/(1 + z²/n)·√(0.0025 + z²/40000)
        let hw = wilson_half_width(50, 100);
        assert!((hw - 0.096_168_469_634).abs() < 1e-10, "{hw}");
        assert!(wilson_half_width(0, 100) > 0.0);
        assert_eq!(wilson_half_width(0, 0), 0.0);
    }

    #[test]
    fn ladder_validation() {
        let mut spec = SweepSpec::default_phase_transition("unused".into(), 1);
        spec.validate().unwrap();
        spec.validate_for_acceptance().unwrap();
        spec.grid[0].n_ladder = vec![10, 10];
        assert!(spec.validate().is_err());
        spec.grid[0].n_ladder = vec![10, 20];
        spec.trials = 50;
        assert!(spec.validate().is_ok());
        assert!(spec.validate_for_acceptance().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let m = CalibrationManifest { base_seed: 0, trials: 1, entries: vec![] };
        let a = SweepSpec::default_phase_transition("a".into(), 5);
        let b = SweepSpec::default_phase_transition("b".into(), 5);
        let c = SweepSpec::default_phase_transition("a".into(), 6);
        assert_eq!(a.config_hash(&m).unwrap(), b.config_hash(&m).unwrap());
        assert_ne!(a.config_hash(&m).unwrap(), c.config_hash(&m).unwrap());
    }
}
