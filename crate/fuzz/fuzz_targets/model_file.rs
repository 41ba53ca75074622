#![no_main]

use libfuzzer_sys::fuzz_target;
use strata_core::model::{deserialize, serialize, structurally_equal};

fuzz_target!(|data: &[u8]| {
    let Ok(model) = deserialize(data) else { return };
    let bytes = serialize(&model);
    let back = deserialize(&bytes).expect("serialized model reloads");
    assert!(structurally_equal(&model, &back));
    assert_eq!(serialize(&back), bytes);
});
