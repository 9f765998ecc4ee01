use serde::{Deserialize, Serialize};
use thiserror::Error;

use exactsr::solver::{SearchStats, Solution, SolverError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("report has no results")]
    Empty,
    #[error("cannot serialize report: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

/// Everything needed to rerun an experiment, plus its results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: ConfigEcho,
    pub dataset: DatasetSummary,
    pub results: Vec<ResultRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub data: Option<String>,
    pub gen: Option<String>,
    pub target: String,
    pub rows: Option<usize>,
    pub noise: Option<f64>,
    pub data_seed: Option<u64>,
    pub epsilon_percent: Vec<f64>,
    pub depth: usize,
    pub ops: String,
    pub op_cap: u32,
    pub max_constants: usize,
    pub const_box: f64,
    pub time_limit: f64,
    pub node_limit: Option<u64>,
    pub seed: u64,
    pub objective: String,
    pub cert_budget: usize,
    pub threads: usize,
    pub prune: bool,
}

impl ConfigEcho {
    /// Flags that reproduce the run (after the subcommand name).
    pub fn to_argv(&self) -> Vec<String> {
        let mut a = Vec::new();
        let mut push = |k: &str, v: String| {
            a.push(format!("--{k}"));
            a.push(v);
        };
        if let Some(d) = &self.data {
            push("data", d.clone());
            push("target", self.target.clone());
        }
        if let Some(g) = &self.gen {
            push("gen", g.clone());
        }
        if let Some(r) = self.rows {
            push("rows", r.to_string());
        }
        if let Some(n) = self.noise {
            push("noise", n.to_string());
        }
        if let Some(s) = self.data_seed {
            push("data-seed", s.to_string());
        }
        push(
            "epsilon",
            self.epsilon_percent.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        );
        push("depth", self.depth.to_string());
        push("ops", self.ops.clone());
        push("op-cap", self.op_cap.to_string());
        push("max-constants", self.max_constants.to_string());
        push("const-box", self.const_box.to_string());
        push("time-limit", self.time_limit.to_string());
        if let Some(n) = self.node_limit {
            push("node-limit", n.to_string());
        }
        push("seed", self.seed.to_string());
        push("objective", self.objective.clone());
        push("cert-budget", self.cert_budget.to_string());
        push("threads", self.threads.to_string());
        if !self.prune {
            a.push("--no-prune".into());
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub variables: Vec<String>,
    pub target: String,
    pub observations: usize,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsEcho {
    pub nodes_explored: u64,
    pub pruned_bound: u64,
    pub pruned_dominated: u64,
    pub pruned_infeasible: u64,
    pub duplicates: u64,
    pub structures_fitted: u64,
    pub certified_rejections: u64,
    pub heuristic_rejections: u64,
    pub limit_hit: bool,
}

impl From<&SearchStats> for StatsEcho {
    fn from(s: &SearchStats) -> Self {
        StatsEcho {
            nodes_explored: s.nodes_explored,
            pruned_bound: s.pruned_bound,
            pruned_dominated: s.pruned_dominated,
            pruned_infeasible: s.pruned_infeasible,
            duplicates: s.duplicates,
            structures_fitted: s.structures_fitted,
            certified_rejections: s.certified_rejections,
            heuristic_rejections: s.heuristic_rejections,
            limit_hit: s.limit_hit,
        }
    }
}

/// One solve. `status` is `feasible`, `no-feasible-model` or `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub epsilon_percent: f64,
    pub epsilon: f64,
    pub status: String,
    pub expression: Option<String>,
    pub structure_key: Option<String>,
    pub complexity: Option<usize>,
    pub objective_value: Option<f64>,
    pub residual: Option<f64>,
    pub rms_error_percent: Option<f64>,
    pub constants: Vec<f64>,
    pub certificate: Option<String>,
    pub stats: Option<StatsEcho>,
    pub error: Option<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ResultRow {
    pub fn from_outcome(
        epsilon_percent: f64,
        epsilon: f64,
        n: usize,
        names: &[String],
        outcome: &Result<Solution, SolverError>,
    ) -> Self {
        let rms = |r: f64| finite(100.0 * (r / n as f64).sqrt());
        let mut row = ResultRow {
            epsilon_percent,
            epsilon,
            status: String::new(),
            expression: None,
            structure_key: None,
            complexity: None,
            objective_value: None,
            residual: None,
            rms_error_percent: None,
            constants: Vec::new(),
            certificate: None,
            stats: None,
            error: None,
        };
        match outcome {
            Ok(s) => {
                row.status = "feasible".into();
                row.expression = Some(exactsr::text::render(&s.expression, names));
                row.structure_key = Some(s.structure_key.clone());
                row.complexity = Some(s.complexity);
                row.objective_value = finite(s.objective_value);
                row.residual = finite(s.residual);
                row.rms_error_percent = rms(s.residual);
                row.constants = s.constants.clone();
                row.certificate = Some(s.certificate.name().into());
                row.stats = Some((&s.stats).into());
            }
            Err(SolverError::NoFeasibleModel { best_residual, stats }) => {
                row.status = "no-feasible-model".into();
                row.residual = best_residual.and_then(finite);
                row.rms_error_percent = best_residual.and_then(rms);
                row.stats = Some(stats.as_ref().into());
                row.error = Some(outcome.as_ref().unwrap_err().to_string());
            }
            Err(e) => {
                row.status = "error".into();
                row.error = Some(e.to_string());
            }
        }
        row
    }

    pub fn is_feasible(&self) -> bool {
        self.status == "feasible"
    }
}

/// Outcome of comparing the search with exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub exhaustive: ResultRow,
    pub agree: bool,
}

fn json_bytes(report: &RunReport) -> Result<Vec<u8>, ReportError> {
    let mut out = serde_json::to_vec_pretty(report).map_err(|e| ReportError::Json(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
}

/// Grid with one column per error bound.
fn text_grid(report: &RunReport) -> String {
    let mut rows: Vec<(String, Vec<String>)> = vec![
        (
            "max rel. error".into(),
            report.results.iter().map(|r| format!("{}%", r.epsilon_percent)).collect(),
        ),
        (
            "model".into(),
            report
                .results
                .iter()
                .map(|r| r.expression.clone().unwrap_or_else(|| r.status.clone()))
                .collect(),
        ),
        ("complexity".into(), report.results.iter().map(|r| fmt_opt(&r.complexity)).collect()),
        (
            "rms error".into(),
            report
                .results
                .iter()
                .map(|r| r.rms_error_percent.map_or("-".into(), |v| format!("{v:.4}%")))
                .collect(),
        ),
        ("certificate".into(), report.results.iter().map(|r| fmt_opt(&r.certificate)).collect()),
        (
            "nodes explored".into(),
            report
                .results
                .iter()
                .map(|r| r.stats.as_ref().map_or("-".into(), |s| s.nodes_explored.to_string()))
                .collect(),
        ),
    ];
    if let Some(o) = &report.oracle {
        rows.push((
            "exhaustive".into(),
            vec![format!(
                "{} (complexity {}) {}",
                o.exhaustive.expression.clone().unwrap_or_else(|| o.exhaustive.status.clone()),
                fmt_opt(&o.exhaustive.complexity),
                if o.agree { "agrees" } else { "DISAGREES" }
            )],
        ));
    }
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let cols = report.results.len();
    let col_w: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|(_, v)| v.get(c)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = format!(
        "dataset: {} ({} observations, target {}; inputs {})\n",
        report.dataset.provenance,
        report.dataset.observations,
        report.dataset.target,
        report.dataset.variables.join(", ")
    );
    for (label, vals) in &rows {
        let mut line = format!("{label:<label_w$}");
        for (c, v) in vals.iter().enumerate() {
            let w = if vals.len() == cols { col_w[c] } else { 0 };
            line.push_str(&format!(" | {v:<w$}"));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Serializes a report. Reports without results are refused.
pub fn emit_report(report: &RunReport, format: Format) -> Result<Vec<u8>, ReportError> {
    if report.results.is_empty() {
        return Err(ReportError::Empty);
    }
    match format {
        Format::Json => json_bytes(report),
        Format::Text => Ok(text_grid(report).into_bytes()),
    }
}

pub fn parse_report(bytes: &[u8]) -> Result<RunReport, serde_json::Error> {
    serde_json::from_slice(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use exactsr::solver::SolverError;

    #[test]
    fn infeasible_row_keeps_stats_and_drops_non_finite_values() {
        let err: Result<Solution, SolverError> = Err(SolverError::NoFeasibleModel {
            best_residual: Some(f64::INFINITY),
            stats: Box::default(),
        });
        let row = ResultRow::from_outcome(2.0, 0.0032, 8, &["x".into()], &err);
        assert_eq!(row.status, "no-feasible-model");
        assert_eq!(row.residual, None);
        assert!(row.stats.is_some());
        assert!(!row.is_feasible());
    }

    #[test]
    fn argv_echo_marks_disabled_pruning() {
        let cfg = ConfigEcho {
            data: Some("d.csv".into()),
            gen: None,
            target: "y".into(),
            rows: None,
            noise: None,
            data_seed: None,
            epsilon_percent: vec![2.0, 5.5],
            depth: 2,
            ops: "+,*".into(),
            op_cap: 3,
            max_constants: 1,
            const_box: 100.0,
            time_limit: 60.0,
            node_limit: Some(10),
            seed: 1,
            objective: "node-count".into(),
            cert_budget: 0,
            threads: 1,
            prune: false,
        };
        let argv = cfg.to_argv();
        let joined = argv.join(" ");
        assert!(joined.starts_with("--data d.csv --target y"));
        assert!(joined.contains("--epsilon 2,5.5"));
        assert!(joined.contains("--node-limit 10"));
        assert_eq!(argv.last().map(String::as_str), Some("--no-prune"));
    }
}
