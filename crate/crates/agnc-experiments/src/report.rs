//! Trial rows, nearest-rank percentiles, and CSV reporting.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written report parses back to bit-identical values and the summary file
//! can be re-derived exactly from the rows.

use adaptive_gnc::gnc::GncStage;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("summary file does not match the rows it was derived from")]
    SummaryMismatch,
}

/// Nearest-rank percentile: the smallest element with at least `p` percent
/// of the sample at or below it. Returns an element of the input, never an
/// interpolation.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty() && (0.0..=100.0).contains(&p));
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// One linear-regression trial result.
#[derive(Debug, Clone, PartialEq)]
pub struct LinregRow {
    pub method: String,
    pub rate: f64,
    pub trial: usize,
    /// Parameter-error norm against the generating truth.
    pub error: f64,
    pub iterations: usize,
    pub success: bool,
    pub time_s: f64,
    /// `time_s / iterations`; NaN when no iteration ran.
    pub time_per_iter_s: f64,
}

/// One alignment trial result.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpRow {
    pub method: String,
    pub difficulty: String,
    pub overlap: f64,
    pub trial: usize,
    pub rot_err_deg: f64,
    pub trans_err_cm: f64,
    pub init_rot_deg: f64,
    pub init_trans_cm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub success: bool,
    /// Zero initial perturbation: the success predicate is vacuous, the
    /// trial is excluded from success-rate summaries.
    pub degenerate: bool,
    pub time_s: f64,
    /// `time_s / iterations`; NaN when no iteration ran.
    pub time_per_iter_s: f64,
}

pub const LINREG_HEADER: &str = "method,rate,trial,error,iterations,success,time_s,time_per_iter_s";
pub const ICP_HEADER: &str = "method,difficulty,overlap,trial,rot_err_deg,trans_err_cm,init_rot_deg,init_trans_cm,iterations,converged,success,degenerate,time_s,time_per_iter_s";

/// Columns ignored by the determinism comparison (wall-clock noise).
pub const TIMING_COLUMNS: &[&str] = &["time_s", "time_per_iter_s"];

impl LinregRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.rate,
            self.trial,
            self.error,
            self.iterations,
            self.success,
            self.time_s,
            self.time_per_iter_s
        )
    }

    fn from_csv(fields: &[&str]) -> Option<LinregRow> {
        if fields.len() != 8 {
            return None;
        }
        Some(LinregRow {
            method: fields[0].to_string(),
            rate: fields[1].parse().ok()?,
            trial: fields[2].parse().ok()?,
            error: fields[3].parse().ok()?,
            iterations: fields[4].parse().ok()?,
            success: fields[5].parse().ok()?,
            time_s: fields[6].parse().ok()?,
            time_per_iter_s: fields[7].parse().ok()?,
        })
    }
}

impl IcpRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.difficulty,
            self.overlap,
            self.trial,
            self.rot_err_deg,
            self.trans_err_cm,
            self.init_rot_deg,
            self.init_trans_cm,
            self.iterations,
            self.converged,
            self.success,
            self.degenerate,
            self.time_s,
            self.time_per_iter_s
        )
    }

    fn from_csv(fields: &[&str]) -> Option<IcpRow> {
        if fields.len() != 14 {
            return None;
        }
        Some(IcpRow {
            method: fields[0].to_string(),
            difficulty: fields[1].to_string(),
            overlap: fields[2].parse().ok()?,
            trial: fields[3].parse().ok()?,
            rot_err_deg: fields[4].parse().ok()?,
            trans_err_cm: fields[5].parse().ok()?,
            init_rot_deg: fields[6].parse().ok()?,
            init_trans_cm: fields[7].parse().ok()?,
            iterations: fields[8].parse().ok()?,
            converged: fields[9].parse().ok()?,
            success: fields[10].parse().ok()?,
            degenerate: fields[11].parse().ok()?,
            time_s: fields[12].parse().ok()?,
            time_per_iter_s: fields[13].parse().ok()?,
        })
    }
}

/// Per-(method, rate) percentile summary of the regression benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct LinregSummary {
    pub method: String,
    pub rate: f64,
    pub p50: f64,
    pub p75: f64,
    pub p90: f64,
    pub success_rate: f64,
    pub median_iterations: f64,
}

/// Per-(method, difficulty) summary of the alignment benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpSummary {
    pub method: String,
    pub difficulty: String,
    pub rot_p50: f64,
    pub rot_p75: f64,
    pub rot_p90: f64,
    pub trans_p50: f64,
    pub trans_p75: f64,
    pub trans_p90: f64,
    /// Successes over non-degenerate trials.
    pub success_rate: f64,
    pub convergence_rate: f64,
    pub median_iterations: f64,
}

pub fn summarize_linreg(rows: &[LinregRow]) -> Vec<LinregSummary> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for row in rows {
        let key = (row.method.clone(), row.rate);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, rate)| {
            let group: Vec<&LinregRow> = rows
                .iter()
                .filter(|r| r.method == method && r.rate == rate)
                .collect();
            let errors: Vec<f64> = group.iter().map(|r| r.error).collect();
            let iters: Vec<f64> = group.iter().map(|r| r.iterations as f64).collect();
            let successes = group.iter().filter(|r| r.success).count();
            LinregSummary {
                method,
                rate,
                p50: percentile(&errors, 50.0),
                p75: percentile(&errors, 75.0),
                p90: percentile(&errors, 90.0),
                success_rate: successes as f64 / group.len() as f64,
                median_iterations: percentile(&iters, 50.0),
            }
        })
        .collect()
}

pub fn summarize_icp(rows: &[IcpRow]) -> Vec<IcpSummary> {
    let mut keys: Vec<(String, String)> = Vec::new();
    for row in rows {
        let key = (row.method.clone(), row.difficulty.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, difficulty)| {
            let group: Vec<&IcpRow> = rows
                .iter()
                .filter(|r| r.method == method && r.difficulty == difficulty)
                .collect();
            let rot: Vec<f64> = group.iter().map(|r| r.rot_err_deg).collect();
            let trans: Vec<f64> = group.iter().map(|r| r.trans_err_cm).collect();
            let iters: Vec<f64> = group.iter().map(|r| r.iterations as f64).collect();
            let eligible: Vec<&&IcpRow> = group.iter().filter(|r| !r.degenerate).collect();
            let successes = eligible.iter().filter(|r| r.success).count();
            let converged = group.iter().filter(|r| r.converged).count();
            IcpSummary {
                method,
                difficulty,
                rot_p50: percentile(&rot, 50.0),
                rot_p75: percentile(&rot, 75.0),
                rot_p90: percentile(&rot, 90.0),
                trans_p50: percentile(&trans, 50.0),
                trans_p75: percentile(&trans, 75.0),
                trans_p90: percentile(&trans, 90.0),
                success_rate: if eligible.is_empty() {
                    0.0
                } else {
                    successes as f64 / eligible.len() as f64
                },
                convergence_rate: converged as f64 / group.len() as f64,
                median_iterations: percentile(&iters, 50.0),
            }
        })
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_lines(path: &Path, header: &str, lines: &[String]) -> Result<(), ReportError> {
    let mut file =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    writeln!(file, "{header}").map_err(io_err(path))?;
    for line in lines {
        writeln!(file, "{line}").map_err(io_err(path))?;
    }
    Ok(())
}

/// GNC stage-log rows: one per (condition, trial, outer iteration, stage).
pub struct StageLogRow {
    pub method: String,
    pub condition: String,
    pub trial: usize,
    pub outer_iter: usize,
    pub stage: GncStage,
}

pub const STAGES_HEADER: &str = "method,condition,trial,outer_iter,stage,mu,f,objective,inliers";

pub fn write_stages(path: &Path, rows: &[StageLogRow]) -> Result<(), ReportError> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.method,
                r.condition,
                r.trial,
                r.outer_iter,
                r.stage.stage,
                r.stage.mu,
                r.stage.f.map(|f| f.to_string()).unwrap_or_default(),
                r.stage.objective,
                r.stage.inlier_count
            )
        })
        .collect();
    write_lines(path, STAGES_HEADER, &lines)
}

pub struct LinregReport {
    pub rows: Vec<LinregRow>,
}

impl LinregReport {
    pub fn summaries(&self) -> Vec<LinregSummary> {
        summarize_linreg(&self.rows)
    }

    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lines: Vec<String> = self.rows.iter().map(LinregRow::to_csv).collect();
        write_lines(&dir.join("rows.csv"), LINREG_HEADER, &lines)?;
        let summary_lines: Vec<String> = self
            .summaries()
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{},{}",
                    s.method, s.rate, s.p50, s.p75, s.p90, s.success_rate, s.median_iterations
                )
            })
            .collect();
        write_lines(
            &dir.join("summary.csv"),
            "method,rate,p50,p75,p90,success_rate,median_iterations",
            &summary_lines,
        )
    }

    /// Load rows and verify the stored summary still matches them exactly.
    pub fn load(dir: &Path) -> Result<LinregReport, ReportError> {
        let rows_path = dir.join("rows.csv");
        let rows = read_rows(&rows_path, LINREG_HEADER, LinregRow::from_csv)?;
        let report = LinregReport { rows };
        let summary_path = dir.join("summary.csv");
        if summary_path.exists() {
            let stored = std::fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
            let recomputed: Vec<String> = report
                .summaries()
                .iter()
                .map(|s| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        s.method, s.rate, s.p50, s.p75, s.p90, s.success_rate, s.median_iterations
                    )
                })
                .collect();
            let stored_lines: Vec<&str> = stored.lines().skip(1).collect();
            if stored_lines != recomputed {
                return Err(ReportError::SummaryMismatch);
            }
        }
        Ok(report)
    }
}

pub struct IcpReport {
    pub rows: Vec<IcpRow>,
}

impl IcpReport {
    pub fn summaries(&self) -> Vec<IcpSummary> {
        summarize_icp(&self.rows)
    }

    pub fn write(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let lines: Vec<String> = self.rows.iter().map(IcpRow::to_csv).collect();
        write_lines(&dir.join("rows.csv"), ICP_HEADER, &lines)?;
        let summary_lines: Vec<String> = self
            .summaries()
            .iter()
            .map(|s| {
                format!(
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    s.method,
                    s.difficulty,
                    s.rot_p50,
                    s.rot_p75,
                    s.rot_p90,
                    s.trans_p50,
                    s.trans_p75,
                    s.trans_p90,
                    s.success_rate,
                    s.convergence_rate,
                    s.median_iterations
                )
            })
            .collect();
        write_lines(
            &dir.join("summary.csv"),
            "method,difficulty,rot_p50,rot_p75,rot_p90,trans_p50,trans_p75,trans_p90,success_rate,convergence_rate,median_iterations",
            &summary_lines,
        )
    }

    /// Load rows and verify the stored summary still matches them exactly.
    pub fn load(dir: &Path) -> Result<IcpReport, ReportError> {
        let rows = read_rows(&dir.join("rows.csv"), ICP_HEADER, IcpRow::from_csv)?;
        let report = IcpReport { rows };
        let summary_path = dir.join("summary.csv");
        if summary_path.exists() {
            let stored = std::fs::read_to_string(&summary_path).map_err(io_err(&summary_path))?;
            let recomputed: Vec<String> = report
                .summaries()
                .iter()
                .map(|s| {
                    format!(
                        "{},{},{},{},{},{},{},{},{},{},{}",
                        s.method,
                        s.difficulty,
                        s.rot_p50,
                        s.rot_p75,
                        s.rot_p90,
                        s.trans_p50,
                        s.trans_p75,
                        s.trans_p90,
                        s.success_rate,
                        s.convergence_rate,
                        s.median_iterations
                    )
                })
                .collect();
            let stored_lines: Vec<&str> = stored.lines().skip(1).collect();
            if stored_lines != recomputed {
                return Err(ReportError::SummaryMismatch);
            }
        }
        Ok(report)
    }
}

fn read_rows<T>(
    path: &Path,
    expected_header: &str,
    parse: fn(&[&str]) -> Option<T>,
) -> Result<Vec<T>, ReportError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line_no == 0 {
            if line != expected_header {
                return Err(ReportError::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let row = parse(&fields).ok_or_else(|| ReportError::Parse {
            path: path.display().to_string(),
            line: line_no + 1,
            message: "malformed row".into(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Strip the timing columns out of a CSV text for determinism comparison.
pub fn strip_timing_columns(csv: &str) -> String {
    let mut lines = csv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let names: Vec<&str> = header.split(',').collect();
    let keep: Vec<usize> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| !TIMING_COLUMNS.contains(n))
        .map(|(i, _)| i)
        .collect();
    let mut out = String::new();
    let project = |line: &str, out: &mut String| {
        let fields: Vec<&str> = line.split(',').collect();
        let projected: Vec<&str> = keep.iter().filter_map(|&i| fields.get(i).copied()).collect();
        out.push_str(&projected.join(","));
        out.push('\n');
    };
    project(header, &mut out);
    for line in lines {
        project(line, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_sort_based_oracle() {
        let values = vec![5.0, 1.0, 9.0, 3.0, 7.0];
        // Sorted: 1 3 5 7 9. Nearest rank: ceil(p/100 * 5).
        assert_eq!(percentile(&values, 50.0), 5.0);
        assert_eq!(percentile(&values, 75.0), 7.0);
        assert_eq!(percentile(&values, 90.0), 9.0);
        assert_eq!(percentile(&values, 100.0), 9.0);
        assert_eq!(percentile(&values, 1.0), 1.0);

        // Against an independent implementation on random data.
        let data: Vec<f64> = (0..97).map(|i| ((i * 31) % 89) as f64 * 0.37).collect();
        for p in [10.0, 25.0, 50.0, 75.0, 90.0, 99.0] {
            let mut sorted = data.clone();
            sorted.sort_by(f64::total_cmp);
            let idx = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
            let expected = sorted[idx.max(1) - 1];
            assert_eq!(percentile(&data, p), expected, "p = {p}");
        }
    }

    fn sample_rows() -> Vec<LinregRow> {
        (0..10)
            .map(|trial| LinregRow {
                method: if trial % 2 == 0 { "welsch" } else { "gnc-amb" }.into(),
                rate: 0.4,
                trial,
                error: 0.001 * (trial as f64 + 1.0) / 3.0,
                iterations: trial + 1,
                success: true,
                time_s: 0.5 + trial as f64,
                time_per_iter_s: (0.5 + trial as f64) / (trial + 1) as f64,
            })
            .collect()
    }

    #[test]
    fn linreg_report_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let report = LinregReport {
            rows: sample_rows(),
        };
        report.write(dir.path()).unwrap();
        let loaded = LinregReport::load(dir.path()).unwrap();
        assert_eq!(loaded.rows, report.rows);
        assert_eq!(loaded.summaries(), report.summaries());
    }

    #[test]
    fn tampered_summary_is_rejected_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let report = LinregReport {
            rows: sample_rows(),
        };
        report.write(dir.path()).unwrap();
        let summary_path = dir.path().join("summary.csv");
        let mut text = std::fs::read_to_string(&summary_path).unwrap();
        text = text.replace("welsch", "welsch2");
        std::fs::write(&summary_path, text).unwrap();
        assert!(matches!(
            LinregReport::load(dir.path()),
            Err(ReportError::SummaryMismatch)
        ));
    }

    #[test]
    fn timing_columns_are_stripped() {
        let csv = "method,rate,time_s,time_per_iter_s\nwelsch,0.2,0.123,0.01\n";
        let stripped = strip_timing_columns(csv);
        assert_eq!(stripped, "method,rate\nwelsch,0.2\n");
    }

    #[test]
    fn stage_log_serializes_with_empty_shape_for_classical_rules() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stages.csv");
        let rows = vec![
            StageLogRow {
                method: "agnc".into(),
                condition: "rate=0.8".into(),
                trial: 2,
                outer_iter: 0,
                stage: GncStage {
                    stage: 0,
                    mu: 4e7,
                    f: Some(1.9999999),
                    objective: 123.5,
                    inlier_count: 1800,
                },
            },
            StageLogRow {
                method: "gnc-tls".into(),
                condition: "rate=0.8".into(),
                trial: 2,
                outer_iter: 0,
                stage: GncStage {
                    stage: 1,
                    mu: 0.02,
                    f: None,
                    objective: 88.25,
                    inlier_count: 40,
                },
            },
        ];
        write_stages(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], STAGES_HEADER);
        assert_eq!(lines[1].split(',').count(), 9);
        // The shape column is empty, not NaN, for mu-only rules.
        assert_eq!(lines[2].split(',').nth(6), Some(""));
        assert_eq!(lines[2].split(',').nth(5), Some("0.02"));
    }

    #[test]
    fn icp_summary_excludes_degenerate_trials_from_success_rate() {
        let base = IcpRow {
            method: "gnc-amb".into(),
            difficulty: "easy".into(),
            overlap: 0.7,
            trial: 0,
            rot_err_deg: 0.1,
            trans_err_cm: 1.0,
            init_rot_deg: 5.0,
            init_trans_cm: 10.0,
            iterations: 8,
            converged: true,
            success: true,
            degenerate: false,
            time_s: 0.1,
            time_per_iter_s: 0.0125,
        };
        let rows = vec![
            base.clone(),
            IcpRow {
                trial: 1,
                success: false,
                degenerate: true,
                ..base.clone()
            },
        ];
        let summary = summarize_icp(&rows);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].success_rate, 1.0);
        assert_eq!(summary[0].convergence_rate, 1.0);
    }
}
