#![no_main]

use libfuzzer_sys::fuzz_target;

// The fvecs encoding is canonical: any accepted input must re-serialize to
// the identical bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(dataset) = vicinity::io::parse_fvecs(data) {
        assert_eq!(vicinity::io::fvecs_to_bytes(&dataset), data);
    }
});
