#![no_main]

use libfuzzer_sys::fuzz_target;
use mapn_core::fixtures::{energy_metric, time_metric};
use mapn_core::io::parse_constraints;
use mapn_core::metrics::MetricSet;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let metrics = MetricSet::new(vec![time_metric(), energy_metric()]).expect("fixed metrics");
    let targets = ["big".to_string(), "little".to_string()];
    if let Ok(cfg) = parse_constraints(text, &metrics, &targets) {
        assert!(cfg.check(&metrics, targets.len()).is_ok());
    }
});
