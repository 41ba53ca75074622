#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use strata_core::preprocess::{Preprocessor, Scratch};
use strata_core::TopicConfig;

static PRE: OnceLock<Preprocessor> = OnceLock::new();

fuzz_target!(|line: &str| {
    let pre = PRE.get_or_init(|| Preprocessor::new(&TopicConfig::default()).unwrap());
    let encoded = pre.encode_line(line).ok();
    let mut scratch = Scratch::default();
    let streamed = pre.with_encoded(line, &mut scratch, |tokens, hashes| {
        (tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>(), hashes.to_vec())
    });
    match (encoded, streamed) {
        (Some(e), Some((tokens, hashes))) => {
            assert_eq!(e.tokens, tokens);
            assert_eq!(e.hashes, hashes);
        }
        (None, None) => {}
        _ => panic!("encode_line and with_encoded disagree on {line:?}"),
    }
});
