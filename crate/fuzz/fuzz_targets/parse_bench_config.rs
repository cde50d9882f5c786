#![no_main]

use libfuzzer_sys::fuzz_target;
use vicinity::bench::BenchConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // parse + semantic validation must never panic on hostile configs
        let _ = BenchConfig::from_json(text);
    }
});
