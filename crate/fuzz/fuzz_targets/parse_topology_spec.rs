#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(spec) = dkrx::topology::parse_topology_spec(s) {
            // Realizing the spec for a small array must never panic either.
            let _ = spec.build(16);
        }
    }
});
