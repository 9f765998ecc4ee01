//! Replays the checked-in fuzz seeds through the same checks the fuzz
//! targets make.

use std::fs;
use std::path::PathBuf;

use exactsr::data::Dataset;
use exactsr::text::{parse, render};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.display().to_string(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn expression_seeds_render_to_a_fixed_point() {
    let names: Vec<String> = ["tau", "M", "m"].iter().map(|s| s.to_string()).collect();
    let mut parsed = 0;
    for (name, bytes) in seeds("parse_expr") {
        let Ok(s) = std::str::from_utf8(&bytes) else { continue };
        if let Ok(e) = parse(s, &names) {
            parsed += 1;
            let shown = render(&e, &names);
            let again = parse(&shown, &names).unwrap_or_else(|err| panic!("{name}: {shown}: {err}"));
            assert_eq!(render(&again, &names), shown, "{name}");
        }
    }
    assert!(parsed > 0);
}

#[test]
fn csv_seeds_round_trip_or_fail_cleanly() {
    let mut loaded = 0;
    for (name, bytes) in seeds("csv_dataset") {
        if let Ok(ds) = Dataset::from_reader(bytes.as_slice(), "y") {
            loaded += 1;
            let mut out = Vec::new();
            ds.write_csv(&mut out).unwrap();
            let back = Dataset::from_reader(out.as_slice(), "y").unwrap();
            assert_eq!(back.x(), ds.x(), "{name}");
            assert_eq!(back.y(), ds.y(), "{name}");
        }
    }
    assert_eq!(loaded, 1);
}
