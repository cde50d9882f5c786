#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((model, codes)) = vicinity::code_store_from_bytes(data) {
        assert_eq!(
            vicinity::code_store_to_bytes(&model, &codes).unwrap(),
            data
        );
        // decoding any stored code must stay in bounds and finite
        if !codes.is_empty() {
            let decoded = model.decode(codes.code(0)).unwrap();
            assert!(decoded.iter().all(|v| v.is_finite()));
        }
    }
});
