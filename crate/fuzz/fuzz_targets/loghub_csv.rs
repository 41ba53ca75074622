#![no_main]

use libfuzzer_sys::fuzz_target;
use strata_eval::parse_loghub;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = parse_loghub(data, "fuzz") {
        assert_eq!(corpus.lines.len(), corpus.labels.len());
    }
});
