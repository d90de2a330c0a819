//! CSV tables (header row, UTF-8, LF endings), gnuplot data files and the
//! plain-text scan report.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::born::{COL_NORM_ERROR, COL_OVERLAP, COL_POINTER, COL_RHO01, COL_THRESHOLD};
use crate::dynamics::TimeSeries;
use crate::error::Result;
use crate::macro_obs::{EvidenceRow, MacroVerdict};
use crate::scaling::{extrapolate_limit, ScalingReport};

pub const SIMULATE_COLUMNS: [&str; 6] = [
    "t",
    COL_POINTER,
    COL_THRESHOLD,
    COL_RHO01,
    COL_OVERLAP,
    COL_NORM_ERROR,
];

pub const SCAN_COLUMNS: [&str; 8] = [
    "n",
    "seed",
    "time_avg_D",
    "p_hat",
    "abs_error",
    "mixture_distance",
    "tail_variation",
    "wall_time_s",
];

pub const EVIDENCE_COLUMNS: [&str; 4] = ["n", "k", "trial", "deviation"];

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

/// Shortest round-trip decimal; NaN for undefined values.
fn num(x: f64) -> String {
    format!("{x}")
}

fn simulate_rows(series: &TimeSeries) -> Result<Vec<[f64; 6]>> {
    let cols: Vec<&[f64]> = SIMULATE_COLUMNS[1..]
        .iter()
        .map(|c| series.values(c))
        .collect::<Result<_>>()?;
    Ok(series
        .times()
        .iter()
        .enumerate()
        .map(|(i, &t)| [t, cols[0][i], cols[1][i], cols[2][i], cols[3][i], cols[4][i]])
        .collect())
}

pub fn write_simulate_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SIMULATE_COLUMNS)?;
    for row in simulate_rows(series)? {
        w.write_record(row.iter().map(|&x| num(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_simulate_dat(path: &Path, series: &TimeSeries) -> Result<()> {
    let rows: Vec<Vec<f64>> = simulate_rows(series)?.iter().map(|r| r.to_vec()).collect();
    write_dat(path, &SIMULATE_COLUMNS, &rows)
}

/// `record_timing` off leaves wall_time_s empty so reruns are byte-identical.
pub fn write_scan_csv(path: &Path, report: &ScalingReport, record_timing: bool) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SCAN_COLUMNS)?;
    for r in &report.rows {
        let wall = if record_timing {
            num(r.wall_time_s)
        } else {
            String::new()
        };
        w.write_record([
            r.n.to_string(),
            r.seed.to_string(),
            num(r.time_avg_d),
            num(r.p_hat),
            num(r.abs_error),
            num(r.mixture_distance),
            num(r.tail_variation),
            wall,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-n medians for plotting.
pub fn write_scan_dat(path: &Path, report: &ScalingReport) -> Result<()> {
    let cols = ["n", "median_time_avg_D", "median_p_hat", "median_abs_error", "median_mixture_distance"];
    let rows: Vec<Vec<f64>> = report
        .summary
        .iter()
        .map(|s| vec![s.n as f64, s.time_avg_d, s.p_hat, s.abs_error, s.mixture_distance])
        .collect();
    write_dat(path, &cols, &rows)
}

pub fn write_evidence_csv(path: &Path, rows: &[EvidenceRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(EVIDENCE_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.trial.to_string(),
            num(r.deviation),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Whitespace-separated columns with a `#` header line.
pub fn write_dat(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {}", columns.join(" "))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| num(x)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn scan_report_text(report: &ScalingReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# scan report");
    let _ = writeln!(
        s,
        "# model assumptions: the time-averaged branch overlap decays exponentially in n,"
    );
    let _ = writeln!(
        s,
        "# and p(n) = p_inf * (1 - P[Bin(n, 1/2) < ceil(theta n)]); limits are extrapolations"
    );
    let _ = writeln!(s, "# under these ansatzes, not measurements.");
    let _ = writeln!(s, "target |c1|^2 = {}", report.target);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>4} {:>14} {:>12} {:>12} {:>16} {:>5} {:>7}",
        "n", "median_D", "median_p", "abs_error", "mixture_dist", "used", "flagged"
    );
    for r in &report.summary {
        let _ = writeln!(
            s,
            "{:>4} {:>14.6e} {:>12.6} {:>12.3e} {:>16.3e} {:>5} {:>7}",
            r.n, r.time_avg_d, r.p_hat, r.abs_error, r.mixture_distance, r.used, r.flagged
        );
    }
    for r in report.flagged() {
        let _ = writeln!(
            s,
            "flagged: n = {} seed = {} tail_variation = {:.3e}",
            r.n, r.seed, r.tail_variation
        );
    }
    let _ = writeln!(s);
    match &report.fit {
        Ok(fit) => {
            let _ = writeln!(
                s,
                "overlap fit: ln D = {:.6} {:+.6} n  (rate stderr {:.2e}, r^2 = {:.6}, {} points)",
                fit.intercept, fit.rate, fit.rate_stderr, fit.r2, fit.points
            );
        }
        Err(why) => {
            let _ = writeln!(s, "overlap fit: none ({why})");
        }
    }
    match extrapolate_limit(report) {
        Ok(ex) => {
            let _ = writeln!(s, "D_inf = {} +/- {:.3e}", ex.d_inf, ex.d_inf_uncertainty);
            let _ = writeln!(s, "p_inf = {:.6} +/- {:.3e}", ex.p_inf, ex.p_inf_uncertainty);
        }
        Err(e) => {
            let _ = writeln!(s, "extrapolation: {e}");
        }
    }
    s
}

pub fn macro_report_text(verdict: &MacroVerdict) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "family: {}", verdict.family);
    let _ = writeln!(s, "{:>4} {:>14} {:>14} {:>7}", "n", "max_dev", "allowed", "within");
    for r in &verdict.schedule {
        let _ = writeln!(
            s,
            "{:>4} {:>14.6e} {:>14.6e} {:>7}",
            r.n, r.max_deviation, r.allowed, r.within
        );
    }
    let _ = writeln!(
        s,
        "verdict: {}",
        if verdict.pass { "macroscopic" } else { "not macroscopic" }
    );
    s
}
