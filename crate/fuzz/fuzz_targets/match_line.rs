#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use strata_core::preprocess::Preprocessor;
use strata_core::{match_log, match_or_insert, rebuild_index, train_lines, ParseModel, TopicConfig, TrainOptions};

fn model() -> &'static ParseModel {
    static MODEL: OnceLock<ParseModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let lines = [
            "Receiving block blk_1 src: /10.0.0.1:50010 dest: /10.0.0.2:50010",
            "Receiving block blk_2 src: /10.0.0.3:50010 dest: /10.0.0.4:50010",
            "PacketResponder 1 for block blk_1 terminating",
            "PacketResponder 0 for block blk_2 terminating",
            "Deleting block blk_3 file /data/blk_3",
        ];
        train_lines("fuzz", &TopicConfig::default(), &lines, TrainOptions::default())
            .unwrap()
            .model
    })
}

static PRE: OnceLock<Preprocessor> = OnceLock::new();

fuzz_target!(|line: &str| {
    let pre = PRE.get_or_init(|| Preprocessor::new(&TopicConfig::default()).unwrap());
    let Ok(log) = pre.encode_line(line) else { return };
    let mut model = model().clone();
    let mut index = rebuild_index(&model, TopicConfig::default().prefix_k);
    let before = match_log(&log, &index);
    let result = match_or_insert(&log, &mut model, &mut index).unwrap();
    assert_eq!(before.is_some(), result.matched);
    model.validate().unwrap();
    let again = match_log(&log, &index).expect("inserted log matches");
    assert_eq!(again.node_id, result.node_id);
});
