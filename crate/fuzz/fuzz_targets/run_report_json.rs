#![no_main]

use exactsr_cli::report::{emit_report, parse_report, Format};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = parse_report(data) {
        let _ = emit_report(&report, Format::Text);
        if let Ok(json) = emit_report(&report, Format::Json) {
            assert_eq!(parse_report(&json).expect("reparse"), report);
        }
    }
});
