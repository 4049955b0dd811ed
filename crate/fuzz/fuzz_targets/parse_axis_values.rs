#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(values) = dkrx::harness::parse_axis_values(s) {
            // Accepted ranges must be finite and reasonably sized.
            assert!(values.iter().all(|v| !v.is_nan()));
        }
    }
});
