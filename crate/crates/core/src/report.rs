//! CSV tables and the plain-text run report.

use std::fmt::Write as _;

use crate::classifier::{ClassificationReport, EvidenceValue, SandwichReport};
use crate::grid::RadialGrid;
use crate::model::{Component, EnvelopeReport, ProblemSpec};
use crate::oracle::Comparison;
use crate::solver::{ko_upper_bounds, BoundsReport, SolutionPair};
use crate::transforms::IntegralProfile;

/// Column order of the per-node table.
pub const CSV_COLUMNS: [&str; 14] = [
    "r",
    "u",
    "v",
    "du",
    "dv",
    "P1",
    "P2",
    "Plower",
    "Qlower",
    "Pbar1",
    "Pbar2",
    "zinv_bound",
    "ko_bound_u",
    "ko_bound_v",
];

/// 17 significant digits, or an empty cell.
pub fn fmt_num(x: Option<f64>) -> String {
    match x {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for row in rows {
        w.write_record(row).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8 fields")
}

/// One row per grid node. Columns without data (no solution, no profile,
/// bound unavailable) are left empty.
pub fn node_table(
    grid: &RadialGrid<f64>,
    sol: Option<&SolutionPair<f64>>,
    profile: Option<&IntegralProfile<f64>>,
    spec: &ProblemSpec<f64>,
) -> String {
    let ko = profile.map(|p| Component::BOTH.map(|c| ko_upper_bounds(p, spec, c)));
    let rows: Vec<Vec<String>> = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let s = |f: fn(&SolutionPair<f64>) -> &[f64]| sol.map(|s| f(s)[k]);
            let mut row = vec![
                Some(r),
                s(|s| s.u.values()),
                s(|s| s.v.values()),
                s(|s| s.du.values()),
                s(|s| s.dv.values()),
            ];
            match profile {
                Some(p) => row.extend([
                    Some(p.p[0].values()[k]),
                    Some(p.p[1].values()[k]),
                    Some(p.lower[0].values()[k]),
                    Some(p.lower[1].values()[k]),
                    p.pbar[0].get(k),
                    p.pbar[1].get(k),
                    p.zinv_bound.get(k),
                ]),
                None => row.extend([None; 7]),
            }
            match &ko {
                Some([u, v]) => row.extend([u[k], v[k]]),
                None => row.extend([None; 2]),
            }
            row.into_iter().map(fmt_num).collect()
        })
        .collect();
    let header: Vec<String> = CSV_COLUMNS.iter().map(|s| s.to_string()).collect();
    csv_text(&header, &rows)
}

/// Summary table of a sweep, one row per cell in cell order.
pub fn sweep_table(axes: &[String], rows: &[SweepRow]) -> String {
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(axes.iter().cloned());
    header.extend(
        [
            "exit_code",
            "verdict",
            "theorem",
            "iterations",
            "u_rmax",
            "v_rmax",
            "message",
        ]
        .map(String::from),
    );
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut out = vec![r.cell.to_string()];
            out.extend(r.values.iter().cloned());
            out.extend([
                r.exit_code.to_string(),
                r.verdict.clone().unwrap_or_default(),
                r.theorem.clone().unwrap_or_default(),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                fmt_num(r.u_end),
                fmt_num(r.v_end),
                r.message.clone(),
            ]);
            out
        })
        .collect();
    csv_text(&header, &body)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: usize,
    /// Axis values as written in the config.
    pub values: Vec<String>,
    pub exit_code: i32,
    pub verdict: Option<String>,
    pub theorem: Option<String>,
    pub iterations: Option<usize>,
    pub u_end: Option<f64>,
    pub v_end: Option<f64>,
    pub message: String,
}

/// Everything a report can mention; absent parts are skipped.
#[derive(Default)]
pub struct ReportParts<'a> {
    pub command: &'a str,
    pub normalized_config: String,
    pub exit_code: i32,
    pub envelope: Option<&'a EnvelopeReport<f64>>,
    pub solve: Option<SolveSummary>,
    pub oracle: Option<Result<Comparison<f64>, String>>,
    pub profile_error: Option<String>,
    pub classification: Option<&'a ClassificationReport<f64>>,
    pub bounds: Option<&'a BoundsReport<f64>>,
    pub sandwich: Option<&'a SandwichReport<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub status: String,
    pub iterations: usize,
    pub last_delta: Option<f64>,
    pub r_max: f64,
    pub u_end: Option<f64>,
    pub v_end: Option<f64>,
}

/// Human-readable report. The normalized configuration is embedded at the
/// end, so a report can be fed back as a config after cutting the header.
pub fn render_report(parts: &ReportParts<'_>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ko-radial {}", parts.command);
    let _ = writeln!(out, "exit code: {}", parts.exit_code);

    if let Some(env) = parts.envelope {
        let (c, t, s) = env.worst_at;
        let _ = writeln!(out, "\n[growth envelope]");
        let _ = writeln!(out, "holds: {}", env.holds);
        let _ = writeln!(
            out,
            "worst ratio: {:.6e} (f{} at t = {t}, s = {s})",
            env.worst_ratio,
            c.label()
        );
    }

    if let Some(s) = &parts.solve {
        let _ = writeln!(out, "\n[solve]");
        let _ = writeln!(out, "status: {}", s.status);
        let _ = writeln!(out, "iterations: {}", s.iterations);
        if let Some(d) = s.last_delta {
            let _ = writeln!(out, "last sup change: {d:.3e}");
        }
        if let (Some(u), Some(v)) = (s.u_end, s.v_end) {
            let _ = writeln!(out, "u({r}) = {u:.10e}, v({r}) = {v:.10e}", r = s.r_max);
        }
    }
    match &parts.oracle {
        Some(Ok(c)) => {
            let _ = writeln!(out, "\n[direct integration]");
            let _ = writeln!(
                out,
                "sup |diff| = {:.3e}, sup rel = {:.3e} at r = {:.6}",
                c.sup_abs, c.sup_rel, c.argmax_radius
            );
        }
        Some(Err(e)) => {
            let _ = writeln!(out, "\n[direct integration]\nfailed: {e}");
        }
        None => {}
    }
    if let Some(e) = &parts.profile_error {
        let _ = writeln!(out, "\n[profile]\nfailed: {e}");
    }

    if let Some(rep) = parts.classification {
        let _ = writeln!(out, "\n[classification]");
        let _ = writeln!(out, "verdict: {}", rep.verdict);
        match rep.theorem {
            Some(t) => {
                let _ = writeln!(out, "path: {t}");
            }
            None => {
                let _ = writeln!(out, "path: none (no theorem applies)");
            }
        }
        for e in &rep.evidence {
            let v = match &e.value {
                EvidenceValue::Limit(l) => l.summary(),
                EvidenceValue::Flag(b) => b.to_string(),
                EvidenceValue::Number(x) => format!("{x:.6e}"),
            };
            let _ = writeln!(out, "  {}: {v}", e.criterion);
        }
        for w in &rep.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }

    if let Some(b) = parts.bounds {
        let _ = writeln!(out, "\n[a priori bounds]");
        for c in &b.checks {
            let _ = writeln!(
                out,
                "  {:<28} {}  max violation {:.3e} at r = {:.6}, unavailable at {} nodes",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.max_violation,
                c.worst_radius,
                c.unavailable
            );
        }
    }
    if let Some(s) = parts.sandwich {
        let _ = writeln!(out, "\n[bound chains]");
        for c in &s.chains {
            let _ = writeln!(
                out,
                "  component {}: lower {} ({:.3e}), upper {} ({:.3e}), vacuous {}, unavailable {}",
                c.component.label(),
                if c.lower_passed { "pass" } else { "FAIL" },
                c.lower_max_violation,
                if c.upper_passed { "pass" } else { "FAIL" },
                c.upper_max_violation,
                c.vacuous,
                c.unavailable
            );
        }
    }

    let _ = writeln!(out, "\n# normalized configuration");
    out.push_str(&parts.normalized_config);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};
    use crate::model::{power_pair, WeightFn};
    use crate::transforms::TailPolicy;
    use std::sync::Arc;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(Some(1.0)), "1.0000000000000000e0");
        assert_eq!(fmt_num(None), "");
        let x = 0.1f64 + 0.2;
        assert_eq!(fmt_num(Some(x)).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn table_shape_without_solution() {
        let spec = ProblemSpec::new(
            3,
            1.0,
            1.0,
            [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
            power_pair(1.0, 1.0).unwrap(),
        )
        .unwrap();
        let g = Arc::new(make_grid(1.0, 16, Grading::Uniform).unwrap());
        let policy = TailPolicy {
            doublings: 6,
            ..TailPolicy::for_grid_cells(16)
        };
        let prof = IntegralProfile::build(&spec, g.clone(), &policy).unwrap();
        let text = node_table(&g, None, Some(&prof), &spec);
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines.len(), 17 + 1 + 1);
        assert!(lines[1].starts_with("0.0000000000000000e0,,,,,"));
        assert!(!text.contains('\r'));
    }
}
