#![no_main]

use exactsr::data::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::from_reader(data, "y") {
        assert!(!ds.is_empty());
        assert!(ds.y().iter().all(|v| v.is_finite() && *v != 0.0));
        let mut out = Vec::new();
        ds.write_csv(&mut out).expect("write");
        let back = Dataset::from_reader(out.as_slice(), "y").expect("reload");
        assert_eq!(back.y(), ds.y());
        assert_eq!(back.x(), ds.x());
    }
});
