#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(lists) = vicinity::io::parse_ivecs(data) {
        assert_eq!(vicinity::io::ivecs_to_bytes(&lists), data);
    }
});
