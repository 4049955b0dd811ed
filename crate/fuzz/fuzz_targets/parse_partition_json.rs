#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = dkrx::topology::parse_partition_json(data) {
        for m in [1usize, 4, 16, 128] {
            let _ = spec.build(m);
        }
    }
});
