#![no_main]

use libfuzzer_sys::fuzz_target;
use vicinity::GraphIndex;

fuzz_target!(|data: &[u8]| {
    if let Ok(index) = GraphIndex::from_bytes(data) {
        // accepted index files round-trip bit-exactly, and a structurally
        // valid index must answer filtered scans without panicking
        assert_eq!(index.to_bytes(), data);
        if !index.is_empty() {
            let rate = index.max_rate();
            let _ = index.filtered_neighbors(0, rate, index.max_degree(), |_| false);
        }
    }
});
