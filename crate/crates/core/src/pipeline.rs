//! Orchestration: solve → profile → classify → verify, per subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use toml::Value;

use crate::classifier::{
    classify, classify_with_solution, verify_sandwich, ClassificationReport, Theorem, Verdict,
};
use crate::config::{ConfigError, RunConfig};
use crate::model::{check_c2_envelope, default_lattice};
use crate::oracle::{compare_solutions, direct_integrate};
use crate::report::{node_table, render_report, sweep_table, ReportParts, SolveSummary, SweepRow};
use crate::solver::{audit_apriori_bounds, picard_solve, SolutionPair, SolverError};
use crate::transforms::IntegralProfile;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_OVERFLOW: i32 = 3;
pub const EXIT_HYPOTHESES_NOT_MET: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Classify,
    CheckEnvelope,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Classify => "classify",
            Command::CheckEnvelope => "check-envelope",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

/// Result of one run before anything is written to disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: String,
    /// Per-node table, or the sweep summary for `sweep`.
    pub csv: Option<String>,
    pub classification: Option<ClassificationReport<f64>>,
    /// Converged solution, or the last iterate when the cap was hit.
    pub solution: Option<SolutionPair<f64>>,
    pub sweep_rows: Vec<SweepRow>,
}

/// Runs `command` without touching the file system.
pub fn execute(cfg: &RunConfig, command: Command) -> Result<RunOutcome, ConfigError> {
    match command {
        Command::Solve => solve(cfg),
        Command::Classify => classify_only(cfg),
        Command::CheckEnvelope => check_envelope(cfg),
        Command::Sweep => sweep(cfg),
    }
}

/// [`execute`], then writes the CSV and report to the configured paths.
pub fn run(cfg: &RunConfig, command: Command) -> Result<RunOutcome, PipelineError> {
    let outcome = execute(cfg, command)?;
    write_outputs(cfg, &outcome)?;
    Ok(outcome)
}

fn write_file(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_outputs(cfg: &RunConfig, outcome: &RunOutcome) -> Result<(), PipelineError> {
    if let (Some(path), Some(csv)) = (&cfg.output.csv_path, &outcome.csv) {
        write_file(path, csv)?;
    }
    if let Some(path) = &cfg.output.report_path {
        write_file(path, &outcome.report)?;
    }
    Ok(())
}

fn solve(cfg: &RunConfig) -> Result<RunOutcome, ConfigError> {
    let spec = cfg.problem_spec()?;
    let grid = cfg.grid()?;
    let iteration = cfg.iteration()?;
    let solved = picard_solve(&spec, grid.clone(), &iteration);

    let oracle = match &solved {
        Ok(sol) => Some(
            direct_integrate(&spec, grid.clone())
                .map_err(|e| e.to_string())
                .and_then(|o| compare_solutions(sol, &o).map_err(|e| e.to_string())),
        ),
        _ => None,
    };

    let profile = IntegralProfile::build(&spec, grid.clone(), &cfg.tail_policy());
    let classification = profile
        .as_ref()
        .ok()
        .map(|p| classify_with_solution(&spec, p, Some(solved.as_ref())));

    let (solution, summary, solve_code) = match solved {
        Ok(sol) => {
            let s = summarize(&sol, "converged");
            (Some(sol), s, EXIT_SUCCESS)
        }
        Err(SolverError::NotConverged(partial)) => {
            let s = summarize(&partial, "not converged (last iterate shown)");
            (Some(*partial), s, EXIT_NOT_CONVERGED)
        }
        Err(e @ SolverError::Overflow { .. }) => {
            let s = SolveSummary {
                status: e.to_string(),
                iterations: match e {
                    SolverError::Overflow { iteration, .. } => iteration,
                    _ => 0,
                },
                last_delta: None,
                r_max: grid.r_max(),
                u_end: None,
                v_end: None,
            };
            (None, s, EXIT_OVERFLOW)
        }
        Err(e) => {
            return Err(crate::config::ConfigError::Validation {
                field: "problem".into(),
                reason: e.to_string(),
            })
        }
    };

    let bounds = match (&profile, &solution) {
        (Ok(p), Some(sol)) => Some(audit_apriori_bounds(sol, p, &spec)),
        _ => None,
    };
    let bounded_path = classification
        .as_ref()
        .and_then(|c| c.theorem)
        .is_some_and(|t| matches!(t, Theorem::T4 | Theorem::T5i | Theorem::T5ii));
    let sandwich = match (&profile, &solution) {
        (Ok(p), Some(sol)) if bounded_path => Some(verify_sandwich(sol, p, &spec)),
        _ => None,
    };

    let exit_code = if solve_code != EXIT_SUCCESS {
        solve_code
    } else {
        hypothesis_code(classification.as_ref())
    };
    let csv = node_table(&grid, solution.as_ref(), profile.as_ref().ok(), &spec);
    let report = render_report(&ReportParts {
        command: Command::Solve.name(),
        normalized_config: cfg.emit(),
        exit_code,
        solve: Some(summary),
        oracle,
        profile_error: profile.as_ref().err().map(|e| e.to_string()),
        classification: classification.as_ref(),
        bounds: bounds.as_ref(),
        sandwich: sandwich.as_ref(),
        ..Default::default()
    });
    Ok(RunOutcome {
        exit_code,
        report,
        csv: Some(csv),
        classification,
        solution,
        sweep_rows: Vec::new(),
    })
}

fn summarize(sol: &SolutionPair<f64>, status: &str) -> SolveSummary {
    SolveSummary {
        status: status.to_string(),
        iterations: sol.iterations,
        last_delta: sol.sup_delta_history.last().copied(),
        r_max: sol.grid().r_max(),
        u_end: Some(sol.u.last()),
        v_end: Some(sol.v.last()),
    }
}

/// A profile that cannot be built leaves the hypotheses unchecked.
fn hypothesis_code(c: Option<&ClassificationReport<f64>>) -> i32 {
    match c {
        Some(c) if c.verdict != Verdict::HypothesesNotMet => EXIT_SUCCESS,
        _ => EXIT_HYPOTHESES_NOT_MET,
    }
}

fn classify_only(cfg: &RunConfig) -> Result<RunOutcome, ConfigError> {
    let spec = cfg.problem_spec()?;
    let grid = cfg.grid()?;
    let profile = IntegralProfile::build(&spec, grid.clone(), &cfg.tail_policy());
    let classification = profile.as_ref().ok().map(|p| classify(&spec, p));
    let exit_code = hypothesis_code(classification.as_ref());
    let csv = node_table(&grid, None, profile.as_ref().ok(), &spec);
    let report = render_report(&ReportParts {
        command: Command::Classify.name(),
        normalized_config: cfg.emit(),
        exit_code,
        profile_error: profile.as_ref().err().map(|e| e.to_string()),
        classification: classification.as_ref(),
        ..Default::default()
    });
    Ok(RunOutcome {
        exit_code,
        report,
        csv: Some(csv),
        classification,
        solution: None,
        sweep_rows: Vec::new(),
    })
}

fn check_envelope(cfg: &RunConfig) -> Result<RunOutcome, ConfigError> {
    let spec = cfg.problem_spec()?;
    let env = check_c2_envelope(&spec.nonlin, &default_lattice()).map_err(|e| {
        ConfigError::Validation {
            field: "nonlinearity".into(),
            reason: e.to_string(),
        }
    })?;
    let exit_code = if env.holds {
        EXIT_SUCCESS
    } else {
        EXIT_HYPOTHESES_NOT_MET
    };
    let report = render_report(&ReportParts {
        command: Command::CheckEnvelope.name(),
        normalized_config: cfg.emit(),
        exit_code,
        envelope: Some(&env),
        ..Default::default()
    });
    Ok(RunOutcome {
        exit_code,
        report,
        csv: None,
        classification: None,
        solution: None,
        sweep_rows: Vec::new(),
    })
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn sweep_cell(cfg: &RunConfig, index: usize, cell: &[(String, Value)]) -> SweepRow {
    let values = cell.iter().map(|(_, v)| value_text(v)).collect();
    let failed = |code: i32, message: String| SweepRow {
        cell: index,
        values: cell.iter().map(|(_, v)| value_text(v)).collect(),
        exit_code: code,
        verdict: None,
        theorem: None,
        iterations: None,
        u_end: None,
        v_end: None,
        message,
    };
    let cell_cfg = match cfg.with_overrides(cell) {
        Ok(c) => c,
        Err(e) => return failed(EXIT_CONFIG, e.to_string()),
    };
    match solve(&cell_cfg) {
        Ok(out) => {
            let class = out.classification.as_ref();
            let message = match out.exit_code {
                EXIT_OVERFLOW => "overflow inside the domain".to_string(),
                EXIT_NOT_CONVERGED => "iteration cap reached".to_string(),
                _ => class
                    .map(|c| c.warnings.len())
                    .filter(|&n| n > 0)
                    .map(|n| format!("{n} warnings"))
                    .unwrap_or_default(),
            };
            SweepRow {
                cell: index,
                values,
                exit_code: out.exit_code,
                verdict: class.map(|c| c.verdict.to_string()),
                theorem: class.and_then(|c| c.theorem).map(|t| t.to_string()),
                iterations: out.solution.as_ref().map(|s| s.iterations),
                u_end: out.solution.as_ref().map(|s| s.u.last()),
                v_end: out.solution.as_ref().map(|s| s.v.last()),
                message,
            }
        }
        Err(e) => failed(EXIT_CONFIG, e.to_string()),
    }
}

/// Runs every cell concurrently; rows come back in cell order. The sweep
/// itself exits 0 once every cell has run, and each row carries its own code.
fn sweep(cfg: &RunConfig) -> Result<RunOutcome, ConfigError> {
    let cells = cfg.sweep_cells();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| sweep_cell(cfg, i, cell))
        .collect();
    let axes: Vec<String> = cfg.sweep.iter().map(|a| a.key.clone()).collect();
    let csv = sweep_table(&axes, &rows);
    let mut report = format!("ko-radial sweep\ncells: {}\n\n", rows.len());
    for r in &rows {
        let cell: Vec<String> = axes
            .iter()
            .zip(&r.values)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        report.push_str(&format!(
            "cell {}: {} -> exit {}, {} {}\n",
            r.cell,
            cell.join(" "),
            r.exit_code,
            r.verdict.as_deref().unwrap_or("-"),
            r.theorem.as_deref().unwrap_or(""),
        ));
    }
    report.push_str("\n# normalized configuration\n");
    report.push_str(&cfg.emit());
    Ok(RunOutcome {
        exit_code: EXIT_SUCCESS,
        report,
        csv: Some(csv),
        classification: None,
        solution: None,
        sweep_rows: rows,
    })
}
