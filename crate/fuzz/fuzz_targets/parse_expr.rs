#![no_main]

use exactsr::text::{parse, render};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let names: Vec<String> = ["tau", "M", "m"].iter().map(|s| s.to_string()).collect();
    if let Ok(s) = core::str::from_utf8(data) {
        if let Ok(e) = parse(s, &names) {
            let shown = render(&e, &names);
            let again = parse(&shown, &names).expect("rendered text must parse");
            assert_eq!(render(&again, &names), shown);
        }
    }
});
