//! Result files: comma-separated tables, JSON summaries and plot data.
//!
//! Rendering is separate from writing so the bytes of a run can be compared
//! directly. Files are written to a temporary name and renamed into place.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::estimators::EnsembleEstimate;
use crate::experiments::{RangeReport, SurvivalReport};
use crate::ks_limit::SupEstimate;
use crate::mdm::MdmRow;
use crate::oracle::ExactTable;

/// One row of the common long table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub quantity: String,
    pub n: u64,
    pub value: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub provenance: String,
}

impl TableRow {
    pub fn from_estimate(e: &EnsembleEstimate) -> Self {
        Self {
            quantity: e.label.clone(),
            n: e.n,
            value: e.value,
            stderr: e.stderr,
            replicas: e.replicas,
            provenance: "mc".into(),
        }
    }
}

pub fn exact_rows(table: &ExactTable) -> Vec<TableRow> {
    table
        .rows
        .iter()
        .map(|r| TableRow {
            quantity: r.quantity.id().into(),
            n: r.n,
            value: r.value.to_f64(),
            stderr: 0.0,
            replicas: 0,
            provenance: "exact".into(),
        })
        .collect()
}

pub fn survival_rows(report: &SurvivalReport) -> Vec<TableRow> {
    report.survival.iter().map(TableRow::from_estimate).collect()
}

pub fn range_rows(report: &RangeReport) -> Vec<TableRow> {
    report
        .mean_range
        .iter()
        .chain(&report.ratio)
        .chain(&report.over_n)
        .chain(&report.full_range_over_n)
        .map(TableRow::from_estimate)
        .collect()
}

fn render<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e.to_string())
}

/// `quantity,n,value,stderr,replicas,provenance`.
pub fn render_table(rows: &[TableRow]) -> Result<String> {
    if rows.is_empty() {
        return Ok("quantity,n,value,stderr,replicas,provenance\n".into());
    }
    render(rows)
}

#[derive(Serialize)]
struct MdmCsvRow {
    n: u64,
    survival_estimate: f64,
    survival_stderr: f64,
    mean_range1: f64,
    range1_stderr: f64,
    full_range_over_n: Option<f64>,
    return_freq: Option<f64>,
    return_stderr: Option<f64>,
    replicas: u64,
}

/// The MdM ensemble table; empty cells where a column does not apply.
pub fn render_mdm_table(rows: &[MdmRow]) -> Result<String> {
    let out: Vec<MdmCsvRow> = rows
        .iter()
        .map(|r| MdmCsvRow {
            n: r.n,
            survival_estimate: r.survival,
            survival_stderr: r.survival_stderr,
            mean_range1: r.mean_range1,
            range1_stderr: r.range1_stderr,
            full_range_over_n: (!r.full_range_over_n.is_nan()).then_some(r.full_range_over_n),
            return_freq: r.return_freq,
            return_stderr: r.return_stderr,
            replicas: r.replicas,
        })
        .collect();
    render(&out)
}

#[derive(Serialize)]
struct KsCsvRow {
    estimator_id: String,
    m: u64,
    replicas: u64,
    sup_mean: f64,
    sup_stderr: f64,
    supminf_mean: f64,
    supminf_stderr: f64,
}

/// One row per (estimator, m); extrapolated records carry an
/// `/extrapolated` suffix on the estimator id.
pub fn render_ks_table(estimates: &[SupEstimate]) -> Result<String> {
    let rows: Vec<KsCsvRow> = estimates
        .iter()
        .map(|e| KsCsvRow {
            estimator_id: if e.extrapolated {
                format!("{}/extrapolated", e.estimator.id())
            } else {
                e.estimator.id().to_string()
            },
            m: e.m,
            replicas: e.replicas,
            sup_mean: e.sup_mean,
            sup_stderr: e.sup_stderr,
            supminf_mean: e.supminf_mean,
            supminf_stderr: e.supminf_stderr,
        })
        .collect();
    render(&rows)
}

#[derive(Serialize)]
struct PlotRow {
    x: f64,
    y: f64,
    yerr: f64,
}

/// `x,y,yerr` columns.
pub fn render_plot_data(points: &[(f64, f64, f64)]) -> Result<String> {
    let rows: Vec<PlotRow> = points.iter().map(|&(x, y, yerr)| PlotRow { x, y, yerr }).collect();
    if rows.is_empty() {
        return Ok("x,y,yerr\n".into());
    }
    render(&rows)
}

pub fn plot_points(estimates: &[EnsembleEstimate]) -> Vec<(f64, f64, f64)> {
    estimates.iter().map(|e| (e.n as f64, e.value, e.stderr)).collect()
}

pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| io::Error::other(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| io::Error::other("output path has no file name"))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// An output directory collecting the files of one run.
#[derive(Debug, Clone)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        write_atomic(&path, contents.as_bytes())?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{exact_rwrs, DEFAULT_BUDGET};
    use crate::samplers::{SceneryDist, WalkIncrementDist};

    #[test]
    fn exact_table_has_provenance_and_zero_error() {
        let t = exact_rwrs(2, &WalkIncrementDist::Simple, &SceneryDist::Rademacher, DEFAULT_BUDGET).unwrap();
        let csv = render_table(&exact_rows(&t)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("quantity,n,value,stderr,replicas,provenance"));
        assert!(csv.contains("mean_range,2,2.5,0.0,0,exact"));
        assert!(csv.contains("survival,2,0.5,0.0,0,exact"));
    }

    #[test]
    fn mdm_table_columns() {
        let row = MdmRow {
            n: 3,
            survival: 0.5,
            survival_stderr: 0.1,
            mean_range1: 2.0,
            range1_stderr: 0.2,
            full_range_over_n: f64::NAN,
            full_range_over_n_stderr: f64::NAN,
            return_freq: None,
            return_stderr: None,
            return_hits: 0,
            replicas: 10,
        };
        let csv = render_mdm_table(&[row]).unwrap();
        assert_eq!(
            csv,
            "n,survival_estimate,survival_stderr,mean_range1,range1_stderr,full_range_over_n,return_freq,return_stderr,replicas\n3,0.5,0.1,2.0,0.2,,,,10\n"
        );
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path().join("run")).unwrap();
        let p = out.write("a.csv", "x\n").unwrap();
        out.write("a.csv", "y\n").unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "y\n");
        let leftovers: Vec<_> = fs::read_dir(out.root()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        assert_eq!(render_plot_data(&[(1.0, 2.0, 0.5)]).unwrap(), "x,y,yerr\n1.0,2.0,0.5\n");
    }
}
