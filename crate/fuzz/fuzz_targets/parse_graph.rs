#![no_main]

use libfuzzer_sys::fuzz_target;
use mapn_core::io::{parse_graph, serialize_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_graph(text) {
        let again = parse_graph(&serialize_model(&model)).expect("serialized model parses");
        assert_eq!(again, model);
    }
});
