//! `results.csv`, `summary.json` and per-curve plot data.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trunctest_core::testers::TesterKind;

use crate::error::IoContext;
use crate::instance::InstanceKind;
use crate::manifest::ManifestEntry;
use crate::sweep::{Cell, PowerCurve, RatePoint, RESULTS_FILE};
use crate::{BenchError, Result, COMMIT_PLACEHOLDER};

pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_DIR: &str = "plots";

/// One row of `results.csv`: a (cell, n) aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell: usize,
    pub d: usize,
    pub alpha: f64,
    pub eps: f64,
    pub instance: InstanceKind,
    pub tester: TesterKind,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub half_width: f64,
    pub threshold: f64,
    pub c_n: f64,
    pub c_thr: f64,
    pub base_seed: u64,
    pub cell_seed: u64,
    pub commit: String,
    pub config_hash: String,
}

const RESULT_COLUMNS: [&str; 18] = [
    "cell", "d", "alpha", "eps", "instance", "tester", "n", "trials", "successes", "rate",
    "half_width", "threshold", "c_n", "c_thr", "base_seed", "cell_seed", "commit", "config_hash",
];

impl ResultRow {
    pub fn new(
        cell_index: usize,
        cell: &Cell,
        entry: &ManifestEntry,
        base_seed: u64,
        cell_seed: u64,
        config_hash: &str,
        point: RatePoint,
    ) -> Self {
        Self {
            cell: cell_index,
            d: cell.d,
            alpha: cell.alpha,
            eps: cell.eps,
            instance: cell.instance,
            tester: cell.tester,
            n: point.n,
            trials: point.trials,
            successes: point.successes,
            rate: point.rate,
            half_width: point.half_width,
            threshold: point.threshold,
            c_n: entry.c_n,
            c_thr: entry.c_thr,
            base_seed,
            cell_seed,
            commit: COMMIT_PLACEHOLDER.into(),
            config_hash: config_hash.into(),
        }
    }

    fn point(&self) -> RatePoint {
        RatePoint {
            n: self.n,
            trials: self.trials,
            successes: self.successes,
            rate: self.rate,
            half_width: self.half_width,
            threshold: self.threshold,
        }
    }
}

pub(crate) fn write_results_header<W: Write>(w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record(RESULT_COLUMNS)?;
    Ok(())
}

fn curve_rows(curve: &PowerCurve) -> impl Iterator<Item = ResultRow> + '_ {
    curve.points.iter().map(move |p| ResultRow {
        cell: curve.cell_index,
        d: curve.cell.d,
        alpha: curve.cell.alpha,
        eps: curve.cell.eps,
        instance: curve.cell.instance,
        tester: curve.cell.tester,
        n: p.n,
        trials: p.trials,
        successes: p.successes,
        rate: p.rate,
        half_width: p.half_width,
        threshold: p.threshold,
        c_n: curve.c_n,
        c_thr: curve.c_thr,
        base_seed: curve.base_seed,
        cell_seed: curve.cell_seed,
        commit: COMMIT_PLACEHOLDER.into(),
        config_hash: curve.config_hash.clone(),
    })
}

pub fn write_results_csv(curves: &[PowerCurve], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(File::create(path).at(path)?);
    write_results_header(&mut w)?;
    for c in curves {
        for row in curve_rows(c) {
            w.serialize(row)?;
        }
    }
    w.flush().at(path)
}

/// Groups consecutive rows of one cell back into power curves.
pub fn parse_results_csv(path: &Path) -> Result<Vec<PowerCurve>> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        return Err(BenchError::Malformed(format!("{}: unexpected header", path.display())));
    }
    let mut curves: Vec<PowerCurve> = Vec::new();
    for row in r.deserialize::<ResultRow>() {
        let row = row?;
        match curves.last_mut() {
            Some(c) if c.cell_index == row.cell => {
                c.cell.n_ladder.push(row.n);
                c.points.push(row.point());
            }
            _ => curves.push(PowerCurve {
                cell_index: row.cell,
                cell: Cell {
                    d: row.d,
                    alpha: row.alpha,
                    eps: row.eps,
                    instance: row.instance,
                    tester: row.tester,
                    n_ladder: vec![row.n],
                },
                c_n: row.c_n,
                c_thr: row.c_thr,
                base_seed: row.base_seed,
                cell_seed: row.cell_seed,
                config_hash: row.config_hash.clone(),
                points: vec![row.point()],
            }),
        }
    }
    Ok(curves)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub commit: String,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub tester: TesterKind,
    pub instance: InstanceKind,
    pub d: usize,
    pub alpha: f64,
    pub eps: f64,
    pub c_n: f64,
    pub c_thr: f64,
    pub base_seed: u64,
    pub cell_seed: u64,
    pub config_hash: String,
    pub points: Vec<RatePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn plot_file_name(curve: &PowerCurve) -> String {
    format!(
        "curve_{:03}_{}_{}_d{}.dat",
        curve.cell_index,
        curve.cell.tester.name(),
        curve.cell.instance.name(),
        curve.cell.d
    )
}

/// Writes `results.csv`, `summary.json`, and `plots/<curve>.dat` (columns
/// `n rate half_width`) under `out_dir`. Nothing is written for empty input.
pub fn emit_report(curves: &[PowerCurve], out_dir: &Path) -> Result<ReportFiles> {
    if curves.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    let plot_dir = out_dir.join(PLOT_DIR);
    fs::create_dir_all(&plot_dir).at(&plot_dir)?;

    let results = out_dir.join(RESULTS_FILE);
    write_results_csv(curves, &results)?;

    let summary = Summary {
        commit: COMMIT_PLACEHOLDER.into(),
        cells: curves
            .iter()
            .map(|c| CellSummary {
                cell: c.cell_index,
                tester: c.cell.tester,
                instance: c.cell.instance,
                d: c.cell.d,
                alpha: c.cell.alpha,
                eps: c.cell.eps,
                c_n: c.c_n,
                c_thr: c.c_thr,
                base_seed: c.base_seed,
                cell_seed: c.cell_seed,
                config_hash: c.config_hash.clone(),
                points: c.points.clone(),
            })
            .collect(),
    };
    let summary_path = out_dir.join(SUMMARY_FILE);
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n").at(&summary_path)?;

    let mut plots = Vec::with_capacity(curves.len());
    for c in curves {
        let path = plot_dir.join(plot_file_name(c));
        let mut text = String::from("# n\trate\thalf_width\n");
        for p in &c.points {
            text.push_str(&format!("{}\t{}\t{}\n", p.n, p.rate, p.half_width));
        }
        fs::write(&path, text).at(&path)?;
        plots.push(path);
    }
    Ok(ReportFiles { results, summary: summary_path, plots })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve() -> PowerCurve {
        PowerCurve {
            cell_index: 0,
            cell: Cell {
                d: 4,
                alpha: 0.3,
                eps: 0.01,
                instance: InstanceKind::AltTail,
                tester: TesterKind::UnknownTrunc,
                n_ladder: vec![10, 20],
            },
            c_n: 40.0,
            c_thr: 1.5,
            base_seed: 7,
            cell_seed: 99,
            config_hash: "abc".into(),
            points: vec![RatePoint::new(10, 100, 37, 0.1), RatePoint::new(20, 100, 81, 1.0 / 3.0)],
        }
    }

    #[test]
    fn single_curve_report_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&[curve()], dir.path()).unwrap();
        assert_eq!(files.plots.len(), 1);
        assert!(files.summary.exists());
        assert_eq!(parse_results_csv(&files.results).unwrap(), vec![curve()]);
        let summary: Summary =
            serde_json::from_str(&fs::read_to_string(&files.summary).unwrap()).unwrap();
        assert_eq!(summary.cells[0].points, curve().points);
        let plot = fs::read_to_string(&files.plots[0]).unwrap();
        assert_eq!(plot.lines().count(), 3);
        assert!(plot.starts_with("# n\trate\thalf_width"));
    }

    #[test]
    fn empty_report_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(matches!(emit_report(&[], &out), Err(BenchError::EmptyReport)));
        assert!(!out.exists());
    }
}
