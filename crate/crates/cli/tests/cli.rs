use exactsr_cli::report::{emit_report, parse_report, Format, ReportError};
use exactsr_cli::{parse_epsilon_list, run_with, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("exactsr").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const FAST: &[&str] = &["--gen", "pendulum", "--depth", "2", "--epsilon", "5"];

#[test]
fn missing_data_file_names_the_path() {
    let (code, _, err) = run(&["solve", "--data", "does/not/exist.csv", "--target", "y"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("does/not/exist.csv"), "{err}");
}

#[test]
fn data_requires_target() {
    let (code, _, err) = run(&["solve", "--data", "x.csv"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--target"));
}

#[test]
fn help_documents_the_tolerance_mapping() {
    let (code, out, _) = run(&["solve", "--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("root-mean-square relative error"));
    assert!(out.contains("n (p/100)^2"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = run(&["solve", "--bogus"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(!err.is_empty());
}

#[test]
fn epsilon_lists_must_be_positive_and_ascending() {
    assert_eq!(parse_epsilon_list("2, 5,10%").unwrap(), vec![2.0, 5.0, 10.0]);
    assert!(parse_epsilon_list("5,2").is_err());
    assert!(parse_epsilon_list("0").is_err());
    assert!(parse_epsilon_list("").is_err());
    assert!(parse_epsilon_list("abc").is_err());
    let (code, _, err) = run(&["sweep", "--gen", "pendulum", "--epsilon", "5,1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("ascending"));
}

#[test]
fn solve_rejects_a_list() {
    let (code, _, _) = run(&["solve", "--epsilon", "1,2"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn json_round_trips_and_reproduces_from_config() {
    let mut args = vec!["solve", "--json", "-"];
    args.extend_from_slice(FAST);
    let (code, out, _) = run(&args);
    assert_eq!(code, EXIT_OK);
    let report = parse_report(out.as_bytes()).unwrap();
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.results.len(), 1);
    let again = emit_report(&report, Format::Json).unwrap();
    assert_eq!(parse_report(&again).unwrap(), report);
    assert_eq!(String::from_utf8(again).unwrap(), out);

    let mut replay = vec!["solve".to_string(), "--json".into(), "-".into()];
    replay.extend(report.config.to_argv());
    let replay: Vec<&str> = replay.iter().map(String::as_str).collect();
    let (code2, out2, _) = run(&replay);
    assert_eq!(code2, EXIT_OK);
    assert_eq!(out2, out);
}

#[test]
fn text_report_has_one_column_per_tolerance() {
    let (code, out, _) = run(&["sweep", "--gen", "pendulum", "--depth", "2", "--epsilon", "2,5"]);
    assert_eq!(code, EXIT_OK);
    let header = out.lines().find(|l| l.starts_with("max rel. error")).unwrap();
    assert_eq!(header.matches('|').count(), 2);
    assert!(header.contains("2%") && header.contains("5%"));
}

#[test]
fn single_result_gives_single_column() {
    let (_, out, _) = run(&["solve", "--gen", "pendulum", "--depth", "2", "--epsilon", "5"]);
    let header = out.lines().find(|l| l.starts_with("max rel. error")).unwrap();
    assert_eq!(header.matches('|').count(), 1);
}

#[test]
fn empty_report_is_refused() {
    let mut args = vec!["solve", "--json", "-"];
    args.extend_from_slice(FAST);
    let (_, out, _) = run(&args);
    let mut report = parse_report(out.as_bytes()).unwrap();
    report.results.clear();
    assert_eq!(emit_report(&report, Format::Text), Err(ReportError::Empty));
    assert_eq!(emit_report(&report, Format::Json), Err(ReportError::Empty));
}

#[test]
fn infeasible_tolerance_exits_with_two() {
    let (code, out, _) = run(&["solve", "--gen", "kepler", "--depth", "1", "--ops", "+", "--epsilon", "0.01"]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(out.contains("no-feasible-model"));
}

#[test]
fn oracle_agrees_on_a_small_grammar() {
    let (code, out, _) = run(&["oracle", "--depth", "2", "--ops", "+,*", "--max-constants", "1", "--epsilon", "30"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("agrees"));
}

#[test]
fn gen_writes_a_loadable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let p = path.to_str().unwrap();
    let (code, _, _) = run(&["gen", "--gen", "kepler", "--rows", "5", "--out", p]);
    assert_eq!(code, EXIT_OK);
    let ds = exactsr::data::Dataset::load_csv(&path, "d").unwrap();
    assert_eq!(ds.len(), 5);
    let (code, out, _) = run(&["solve", "--data", p, "--target", "d", "--epsilon", "50", "--depth", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("5 observations"));

    let (code, stdout_csv, _) = run(&["gen", "--gen", "kepler", "--rows", "5"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(stdout_csv, std::fs::read_to_string(&path).unwrap());
}

#[test]
fn json_file_output_keeps_text_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let mut args = vec!["solve", "--json", path.to_str().unwrap()];
    args.extend_from_slice(FAST);
    let (code, out, _) = run(&args);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("max rel. error"));
    let report = parse_report(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report.command, "solve");
    assert_eq!(report.config.gen.as_deref(), Some("pendulum"));
    assert_eq!(report.config.ops, "+,-,*,sqrt,cbrt");
}
