//! Command-line front end: argument parsing, dataset selection and
//! reporting around the `exactsr` solver.

pub mod args;
pub mod report;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use clap::Parser;

use exactsr::data::{synth_kepler, synth_pendulum, Dataset};
use exactsr::grammar::Objective;
use exactsr::solver::{enumerate_exhaustive, epsilon_from_percent, sweep, SolverConfig, SolverError};
use exactsr::OperatorSet;

use args::{Cli, Command, DataArgs, GenArgs, ObjectiveArg, Preset, RunArgs};
use report::{emit_report, ConfigEcho, DatasetSummary, Format, OracleCheck, ResultRow, RunReport, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ORACLE_MISMATCH: i32 = 3;

pub const DEFAULT_SOLVE_EPSILON: &[f64] = &[2.0];
pub const DEFAULT_SWEEP_EPSILON: &[f64] = &[2.0, 5.0, 10.0, 20.0, 30.0, 50.0];

/// Parses `argv` (program name first) and runs, writing to the process
/// streams. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => run_gen(&a, out),
        Command::Solve(a) => run_search("solve", &a, DEFAULT_SOLVE_EPSILON, out),
        Command::Sweep(a) => run_search("sweep", &a, DEFAULT_SWEEP_EPSILON, out),
        Command::Oracle(a) => run_search("oracle", &a, DEFAULT_SOLVE_EPSILON, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn generate(preset: Preset, rows: Option<usize>, noise: Option<f64>, seed: Option<u64>) -> Result<Dataset, String> {
    let rows = rows.unwrap_or(preset.default_rows());
    let noise = noise.unwrap_or(preset.default_noise());
    let seed = seed.unwrap_or(preset.default_data_seed());
    match preset {
        Preset::Kepler => synth_kepler(rows, noise, seed),
        Preset::Pendulum => synth_pendulum(rows, noise, seed),
    }
    .map_err(|e| e.to_string())
}

fn run_gen(a: &GenArgs, out: &mut dyn Write) -> Result<i32, String> {
    let ds = generate(a.gen, a.rows, a.noise, a.data_seed)?;
    match &a.out {
        Some(path) => ds.save_csv(path).map_err(|e| e.to_string())?,
        None => ds.write_csv(&mut *out).map_err(|e| e.to_string())?,
    }
    Ok(EXIT_OK)
}

/// Dataset plus the preset it came from, if any.
fn load_dataset(a: &DataArgs) -> Result<(Dataset, Option<Preset>), String> {
    if let Some(path) = &a.data {
        let target = a
            .target
            .as_deref()
            .ok_or_else(|| format!("--target is required with --data {}", path.display()))?;
        let ds = Dataset::load_csv(path, target).map_err(|e| {
            let msg = e.to_string();
            let shown = path.display().to_string();
            if msg.contains(&shown) {
                msg
            } else {
                format!("{shown}: {msg}")
            }
        })?;
        return Ok((ds, None));
    }
    let preset = a.gen.unwrap_or(Preset::Kepler);
    let ds = generate(preset, a.rows, a.noise, a.data_seed)?;
    if let Some(t) = &a.target {
        if t != preset.target() {
            return Err(format!("preset {} has target {}, not {t}", preset.name(), preset.target()));
        }
    }
    Ok((ds, Some(preset)))
}

/// Parses a comma-separated list of positive, ascending percentages.
pub fn parse_epsilon_list(s: &str) -> Result<Vec<f64>, String> {
    let vals = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.trim_end_matches('%').parse::<f64>().map_err(|_| format!("invalid error bound `{t}`")))
        .collect::<Result<Vec<_>, _>>()?;
    if vals.is_empty() {
        return Err("empty error-bound list".into());
    }
    if let Some(v) = vals.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(format!("error bounds must be positive, got {v}"));
    }
    if vals.windows(2).any(|w| w[0] > w[1]) {
        return Err("error bounds must be in ascending order".into());
    }
    Ok(vals)
}

fn build_config(a: &RunArgs, preset: Option<Preset>) -> Result<(SolverConfig, String), String> {
    let ops_list = a
        .ops
        .clone()
        .unwrap_or_else(|| preset.unwrap_or(Preset::Kepler).default_ops().to_string());
    let operators = OperatorSet::parse(&ops_list, a.op_cap).map_err(|e| e.to_string())?;
    if !(a.time_limit > 0.0 && a.time_limit.is_finite()) {
        return Err(format!("time limit must be positive, got {}", a.time_limit));
    }
    let cfg = SolverConfig {
        depth: a.depth,
        operators,
        objective: match a.objective {
            ObjectiveArg::NodeCount => Objective::NodeCount,
            ObjectiveArg::Weighted => Objective::Weighted,
        },
        const_box: a.const_box,
        max_constants: Some(a.max_constants),
        time_limit: Duration::from_secs_f64(a.time_limit),
        node_limit: a.node_limit,
        seed: a.seed,
        prune: !a.no_prune,
        threads: a.threads,
        cert_budget: a.cert_budget,
        ..SolverConfig::new(1.0)
    };
    cfg.validate().map_err(|e| e.to_string())?;
    Ok((cfg, ops_list))
}

fn config_echo(a: &RunArgs, preset: Option<Preset>, ds: &Dataset, eps: &[f64], ops: &str) -> ConfigEcho {
    ConfigEcho {
        data: a.data.data.as_ref().map(|p| p.display().to_string()),
        gen: preset.map(|p| p.name().to_string()),
        target: ds.target_name().to_string(),
        rows: preset.map(|p| a.data.rows.unwrap_or(p.default_rows())),
        noise: preset.map(|p| a.data.noise.unwrap_or(p.default_noise())),
        data_seed: preset.map(|p| a.data.data_seed.unwrap_or(p.default_data_seed())),
        epsilon_percent: eps.to_vec(),
        depth: a.depth,
        ops: ops.to_string(),
        op_cap: a.op_cap,
        max_constants: a.max_constants,
        const_box: a.const_box,
        time_limit: a.time_limit,
        node_limit: a.node_limit,
        seed: a.seed,
        objective: match a.objective {
            ObjectiveArg::NodeCount => Objective::NodeCount.name().to_string(),
            ObjectiveArg::Weighted => Objective::Weighted.name().to_string(),
        },
        cert_budget: a.cert_budget,
        threads: a.threads,
        prune: !a.no_prune,
    }
}

/// Runs a search subcommand and returns the report alongside its exit code.
pub fn build_report(command: &str, a: &RunArgs, default_eps: &[f64]) -> Result<(RunReport, i32), String> {
    let eps_pct = match &a.epsilon {
        Some(s) => parse_epsilon_list(s)?,
        None => default_eps.to_vec(),
    };
    if command != "sweep" && eps_pct.len() != 1 {
        return Err(format!("{command} takes a single error bound; use sweep for a list"));
    }
    let (ds, preset) = load_dataset(&a.data)?;
    let (cfg, ops) = build_config(a, preset)?;
    let n = ds.len();
    let eps: Vec<f64> = eps_pct.iter().map(|&p| epsilon_from_percent(p, n)).collect();
    let outcomes = sweep(&ds, &cfg, &eps).map_err(|e| e.to_string())?;
    let names = ds.variable_names();
    let results: Vec<ResultRow> = eps_pct
        .iter()
        .zip(&outcomes)
        .map(|(&p, (e, o))| ResultRow::from_outcome(p, *e, n, names, o))
        .collect();
    let mut code = if results.iter().all(ResultRow::is_feasible) { EXIT_OK } else { EXIT_INFEASIBLE };
    if let Some(row) = results.iter().find(|r| r.status == "error") {
        return Err(row.error.clone().unwrap_or_default());
    }
    let mut oracle = None;
    if command == "oracle" {
        let cfg1 = SolverConfig { epsilon: eps[0], ..cfg.clone() };
        let ex = enumerate_exhaustive(&ds, &cfg1);
        if let Err(e @ (SolverError::TooLarge { .. } | SolverError::InvalidConfig(_))) = &ex {
            return Err(e.to_string());
        }
        let ex_row = ResultRow::from_outcome(eps_pct[0], eps[0], n, names, &ex);
        let agree = oracle_agrees(&results[0], &ex_row);
        if !agree {
            code = EXIT_ORACLE_MISMATCH;
        }
        oracle = Some(OracleCheck { exhaustive: ex_row, agree });
    }
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: a.seed,
        config: config_echo(a, preset, &ds, &eps_pct, &ops),
        dataset: DatasetSummary {
            variables: names.to_vec(),
            target: ds.target_name().to_string(),
            observations: n,
            provenance: ds.provenance().to_string(),
        },
        results,
        oracle,
    };
    Ok((report, code))
}

/// Both infeasible, or both feasible with the same objective value.
pub fn oracle_agrees(search: &ResultRow, exhaustive: &ResultRow) -> bool {
    match (search.is_feasible(), exhaustive.is_feasible()) {
        (false, false) => true,
        (true, true) => search.objective_value == exhaustive.objective_value,
        _ => false,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_search(command: &str, a: &RunArgs, default_eps: &[f64], out: &mut dyn Write) -> Result<i32, String> {
    let (report, code) = build_report(command, a, default_eps)?;
    let text = emit_report(&report, Format::Text).map_err(|e| e.to_string())?;
    let json = emit_report(&report, Format::Json).map_err(|e| e.to_string())?;
    match a.json.as_deref() {
        Some(p) if p == Path::new("-") => out.write_all(&json).map_err(|e| e.to_string())?,
        Some(p) => {
            write_file(p, &json)?;
            out.write_all(&text).map_err(|e| e.to_string())?;
        }
        None => out.write_all(&text).map_err(|e| e.to_string())?,
    }
    Ok(code)
}
