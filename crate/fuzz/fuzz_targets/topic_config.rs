#![no_main]

use libfuzzer_sys::fuzz_target;
use strata_core::preprocess::Preprocessor;
use strata_service::parse_topic_config;

fuzz_target!(|text: &str| {
    if let Ok(config) = parse_topic_config(text) {
        Preprocessor::new(&config).expect("validated config compiles");
    }
});
