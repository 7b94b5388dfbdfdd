//! Calibration manifest: the per-tester constants every sweep runs with.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trunctest_core::rng::derive_seed;
use trunctest_core::testers::{
    normalized_statistic, select_threshold, NullInstance, TesterConfig, TesterKind,
    CALIBRATION_ACCEPT_RATE,
};

use crate::error::IoContext;
use crate::instance::{build_instance, InstanceKind};
use crate::{BenchError, Result};

pub const MANIFEST_FILE: &str = "calibration.json";

/// One completeness instance of a calibration grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullCell {
    pub d: usize,
    pub alpha: f64,
    pub eps: f64,
    pub instance: InstanceKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub tester: TesterKind,
    pub c_n: f64,
    pub c_thr: f64,
    /// ACCEPT rate at `c_thr`, per grid instance.
    pub accept_rates: Vec<f64>,
    pub null_grid: Vec<NullCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationManifest {
    pub base_seed: u64,
    pub trials: usize,
    pub entries: Vec<ManifestEntry>,
}

impl CalibrationManifest {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(BenchError::ManifestMissing(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).at(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).at(dir)?;
        }
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").at(path)
    }

    pub fn entry(&self, kind: TesterKind) -> Result<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.tester == kind)
            .ok_or(BenchError::ManifestEntry(kind.name()))
    }

    pub fn config(&self, kind: TesterKind, alpha: f64, seed: u64) -> Result<TesterConfig> {
        let e = self.entry(kind)?;
        Ok(TesterConfig { alpha, c_n: e.c_n, c_thr: e.c_thr, seed })
    }
}

/// Completeness grids used by `trunctest calibrate`.
pub fn default_null_grid(kind: TesterKind) -> Vec<NullCell> {
    let cell = |d, alpha, eps, instance| NullCell { d, alpha, eps, instance };
    match kind {
        TesterKind::UnknownTrunc => vec![
            cell(16, 0.25, 0.0, InstanceKind::NullFull),
            cell(16, 0.25, 0.005, InstanceKind::NullTail),
            cell(64, 0.25, 0.005, InstanceKind::NullTail),
        ],
        TesterKind::KnownTrunc => vec![
            cell(16, 0.2, 0.0, InstanceKind::NullFull),
            cell(16, 0.2, 0.3, InstanceKind::NullTail),
            cell(16, 0.2, 0.1, InstanceKind::NullHardSet),
        ],
        TesterKind::LearnThenTest => vec![
            cell(16, 0.2, 0.0, InstanceKind::NullFull),
            cell(16, 0.2, 0.1, InstanceKind::NullTail),
        ],
    }
}

/// Normalized statistics for every (grid instance, trial), seeded exactly as
/// [`trunctest_core::testers::calibrate_constants`] seeds them.
pub fn null_statistics(
    kind: TesterKind,
    grid: &[NullCell],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let c_n = kind.default_c_n();
    grid.iter()
        .enumerate()
        .map(|(i, cell)| {
            let inst_seed = derive_seed(base_seed, i as u64);
            let inst = build_instance(cell.instance, cell.d, cell.alpha, cell.eps, derive_seed(inst_seed, 0))?;
            let centre = match kind {
                TesterKind::KnownTrunc => Some(inst.null_mean(cell.alpha, inst_seed)?),
                _ => None,
            };
            let null = NullInstance::new(inst.spec, cell.alpha);
            (0..trials)
                .into_par_iter()
                .map(|t| {
                    normalized_statistic(kind, &null, c_n, centre.as_deref(), derive_seed(inst_seed, t as u64 + 1))
                        .map_err(BenchError::from)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect()
}

/// Calibrates one tester on `grid`.
///
/// The learn-then-test baseline keeps its fixed α/2 rule (`c_thr = 0.5`); the
/// calibration only confirms that rule reaches the required ACCEPT rate.
pub fn calibrate_kind(kind: TesterKind, grid: &[NullCell], trials: usize, base_seed: u64) -> Result<ManifestEntry> {
    let stats = null_statistics(kind, grid, trials, base_seed)?;
    let c_thr = match kind {
        TesterKind::LearnThenTest => {
            let c = kind.default_c_thr();
            let ok = stats.iter().all(|s| accept_rate(s, c) >= CALIBRATION_ACCEPT_RATE);
            if !ok {
                return Err(trunctest_core::Error::Calibration(
                    "the alpha/2 rule misses the ACCEPT target on the null grid".into(),
                )
                .into());
            }
            c
        }
        _ => select_threshold(&stats)?,
    };
    Ok(ManifestEntry {
        tester: kind,
        c_n: kind.default_c_n(),
        c_thr,
        accept_rates: stats.iter().map(|s| accept_rate(s, c_thr)).collect(),
        null_grid: grid.to_vec(),
    })
}

fn accept_rate(stats: &[f64], c: f64) -> f64 {
    stats.iter().filter(|s| **s <= c).count() as f64 / stats.len() as f64
}

pub fn calibrate_all(trials: usize, base_seed: u64) -> Result<CalibrationManifest> {
    let entries = TesterKind::ALL
        .into_iter()
        .enumerate()
        .map(|(i, kind)| calibrate_kind(kind, &default_null_grid(kind), trials, derive_seed(base_seed, 1000 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationManifest { base_seed, trials, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use trunctest_core::testers::calibrate_constants;

    #[test]
    fn parallel_calibration_matches_core() {
        let grid = [NullCell { d: 4, alpha: 0.5, eps: 0.01, instance: InstanceKind::NullTail }];
        let entry = calibrate_kind(TesterKind::UnknownTrunc, &grid, 40, 9).unwrap();
        let inst_seed = derive_seed(9, 0);
        let inst = build_instance(InstanceKind::NullTail, 4, 0.5, 0.01, derive_seed(inst_seed, 0)).unwrap();
        let core =
            calibrate_constants(TesterKind::UnknownTrunc, &[NullInstance::new(inst.spec, 0.5)], 40, 9)
                .unwrap();
        assert_eq!(entry.c_thr, core.c_thr);
    }

    #[test]
    fn missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let err = CalibrationManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap_err();
        assert!(matches!(err, BenchError::ManifestMissing(_)));
    }

    #[test]
    fn misuse_grid_fails() {
        let grid = [NullCell { d: 8, alpha: 0.5, eps: 0.0, instance: InstanceKind::AltFull }];
        assert!(calibrate_kind(TesterKind::UnknownTrunc, &grid, 30, 1).is_err());
        assert!(calibrate_kind(TesterKind::UnknownTrunc, &[], 30, 1).is_err());
    }
}
