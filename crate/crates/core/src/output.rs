//! Output files for one ensemble.
//!
//! | file              | contents                                              |
//! |-------------------|-------------------------------------------------------|
//! | `trajectories.csv`| `k,run,agent,stage,x,r_true,r_hat` for recorded runs  |
//! | `error.csv`       | `k,mean_error_norm,bound,stderr`                      |
//! | `agent_error.csv` | `k,agent,mean_error`                                  |
//! | `analysis.txt`    | `key = value` analysis report                         |
//! | `summary.txt`     | `key = value` ensemble results                        |
//! | `scenario.cfg`    | the resolved scenario, reloadable                     |
//! | `overlay.gp`      | gnuplot script drawing error against bound            |
//!
//! Agents and stages are 1-indexed. Floats use Rust's shortest round-trip
//! formatting, so parsing a file reproduces the values bit for bit.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::AnalysisReport;
use crate::error::{Error, Result};
use crate::monte_carlo::Ensemble;
use crate::scenario::Scenario;

pub const TRAJECTORY_HEADER: &str = "k,run,agent,stage,x,r_true,r_hat";
pub const ERROR_HEADER: &str = "k,mean_error_norm,bound,stderr";
pub const AGENT_ERROR_HEADER: &str = "k,agent,mean_error";

const OVERLAY: &str = r#"# gnuplot -p overlay.gp
set datafile separator ","
set logscale y
set xlabel "k"
set ylabel "tracking error"
plot "error.csv" using 1:2 skip 1 with lines title "ensemble mean error", \
     "error.csv" using 1:3 skip 1 with lines dashtype 2 title "bound", \
     "error.csv" using 1:($2+3*$4) skip 1 with lines lc rgb "gray" title "error + 3 stderr"
"#;

/// One row of `trajectories.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub k: usize,
    pub run: usize,
    pub agent: usize,
    pub stage: usize,
    pub x: f64,
    pub r_true: f64,
    pub r_hat: f64,
}

/// One row of `error.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub k: usize,
    pub mean_error_norm: f64,
    pub bound: f64,
    pub stderr: f64,
}

pub fn trajectory_rows(ensemble: &Ensemble) -> Vec<TrajectoryRow> {
    let mut rows = Vec::new();
    for record in &ensemble.trajectories {
        let Some(states) = record.states.as_ref() else { continue };
        for (k, agents) in states.iter().enumerate() {
            for (i, stages) in agents.iter().enumerate() {
                for (x, &p) in stages.iter().zip(&ensemble.recorded_stages) {
                    rows.push(TrajectoryRow {
                        k,
                        run: record.run,
                        agent: i + 1,
                        stage: p + 1,
                        x: *x,
                        r_true: record.r_true[k][i],
                        r_hat: record.r_hat[k][i],
                    });
                }
            }
        }
    }
    rows
}

pub fn error_rows(ensemble: &Ensemble, bound: f64) -> Vec<ErrorRow> {
    ensemble
        .error_norm
        .iter()
        .zip(&ensemble.stderr)
        .enumerate()
        .map(|(k, (&e, &s))| ErrorRow {
            k,
            mean_error_norm: e,
            bound,
            stderr: s,
        })
        .collect()
}

pub fn render_analysis(scenario: &Scenario, report: &AnalysisReport) -> String {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    let w = &mut out;
    let v = &report.validity;
    let _ = writeln!(w, "valid = {}", v.is_valid());
    let _ = writeln!(w, "d_max = {}", v.d_max);
    for c in &v.checks {
        let _ = writeln!(
            w,
            "check.{} = {} {} in ({}, {})",
            c.name,
            if c.passed { "pass" } else { "fail" },
            c.value,
            c.lower,
            c.upper
        );
    }
    let b = &report.bound;
    let _ = writeln!(w, "stages = {}", scenario.gains.n_stages);
    let _ = writeln!(w, "lambda2 = {}", b.lambda2);
    let _ = writeln!(w, "ratio = {}", b.ratio);
    let _ = writeln!(w, "r_tilde_norm = {}", b.r_tilde_norm);
    let _ = writeln!(w, "bound = {}", b.bound);
    let _ = writeln!(w, "steady_error = {}", b.steady_error);
    let s = &report.steady;
    let _ = writeln!(w, "r_star = {}", join(&s.r_star));
    let _ = writeln!(w, "r_bar_star = {}", s.r_bar);
    for (p, x) in s.x_star.iter().enumerate() {
        let _ = writeln!(w, "x_star.{} = {}", p + 1, join(x));
    }
    let _ = writeln!(w, "spectral_radius = {}", report.spectral_radius);
    out
}

pub fn render_summary(scenario: &Scenario, report: &AnalysisReport, ensemble: &Ensemble) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "mode = {}", ensemble.mode);
    let _ = writeln!(w, "runs = {}", ensemble.runs);
    let _ = writeln!(w, "horizon = {}", ensemble.horizon);
    let _ = writeln!(w, "seed = {}", scenario.seed);
    let _ = writeln!(w, "valid = {}", report.validity.is_valid());
    let _ = writeln!(w, "bound = {}", report.bound.bound);
    if let (Some(e), Some(s)) = (ensemble.error_norm.last(), ensemble.stderr.last()) {
        let k = ensemble.horizon;
        let _ = writeln!(w, "final_error = {e}");
        let _ = writeln!(w, "final_stderr = {s}");
        let _ = writeln!(w, "tail_mean_error = {}", ensemble.tail_mean_error(k - k / 10));
        let holds = e.is_finite() && *e <= report.bound.bound + 3.0 * s;
        let _ = writeln!(w, "bound_holds = {holds}");
        let bias = ensemble.estimate_bias(k);
        let _ = writeln!(
            w,
            "final_estimate_bias = {}",
            bias.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
        );
    }
    out
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

pub fn write_outputs(scenario: &Scenario, report: &AnalysisReport, ensemble: &Ensemble, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut f = create(dir, "trajectories.csv")?;
    writeln!(f, "{TRAJECTORY_HEADER}")?;
    for r in trajectory_rows(ensemble) {
        writeln!(f, "{},{},{},{},{},{},{}", r.k, r.run, r.agent, r.stage, r.x, r.r_true, r.r_hat)?;
    }
    f.flush()?;

    let mut f = create(dir, "error.csv")?;
    writeln!(f, "{ERROR_HEADER}")?;
    for r in error_rows(ensemble, report.bound.bound) {
        writeln!(f, "{},{},{},{}", r.k, r.mean_error_norm, r.bound, r.stderr)?;
    }
    f.flush()?;

    let mut f = create(dir, "agent_error.csv")?;
    writeln!(f, "{AGENT_ERROR_HEADER}")?;
    if ensemble.runs > 0 {
        for (k, row) in ensemble.mean_agent_error.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                writeln!(f, "{},{},{}", k, i + 1, e)?;
            }
        }
    }
    f.flush()?;

    std::fs::write(dir.join("analysis.txt"), render_analysis(scenario, report))?;
    std::fs::write(dir.join("summary.txt"), render_summary(scenario, report, ensemble))?;
    std::fs::write(dir.join("scenario.cfg"), scenario.to_config_text())?;
    std::fs::write(dir.join("overlay.gp"), OVERLAY)?;
    Ok(())
}

fn csv_fields<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(Error::Parse { line: 1, field: "header".into(), message: format!("expected `{header}`") }),
    }
    Ok(lines.map(|(i, l)| (i + 1, l.split(',').collect())))
}

fn field<T: std::str::FromStr>(fields: &[&str], idx: usize, line: usize, name: &str) -> Result<T> {
    fields
        .get(idx)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse { line, field: name.into(), message: "missing or malformed value".into() })
}

pub fn parse_trajectories(text: &str) -> Result<Vec<TrajectoryRow>> {
    csv_fields(text, TRAJECTORY_HEADER)?
        .map(|(line, f)| {
            Ok(TrajectoryRow {
                k: field(&f, 0, line, "k")?,
                run: field(&f, 1, line, "run")?,
                agent: field(&f, 2, line, "agent")?,
                stage: field(&f, 3, line, "stage")?,
                x: field(&f, 4, line, "x")?,
                r_true: field(&f, 5, line, "r_true")?,
                r_hat: field(&f, 6, line, "r_hat")?,
            })
        })
        .collect()
}

pub fn parse_errors(text: &str) -> Result<Vec<ErrorRow>> {
    csv_fields(text, ERROR_HEADER)?
        .map(|(line, f)| {
            Ok(ErrorRow {
                k: field(&f, 0, line, "k")?,
                mean_error_norm: field(&f, 1, line, "mean_error_norm")?,
                bound: field(&f, 2, line, "bound")?,
                stderr: field(&f, 3, line, "stderr")?,
            })
        })
        .collect()
}

/// Parses `key = value` lines, ignoring blanks and `#` comments.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| {
            let l = l.split('#').next()?.trim();
            let (k, v) = l.split_once('=')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}
