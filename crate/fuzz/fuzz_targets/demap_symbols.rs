#![no_main]

use dkrx::modem::{demap_symbols, BITS_PER_SYMBOL};
use dkrx::numerics::{C64, CVector};
use libfuzzer_sys::fuzz_target;

// Hard decisions must be defined for arbitrary soft input, including
// non-finite values, and always emit 4 bits per symbol.
fuzz_target!(|data: &[u8]| {
    let floats: Vec<f64> = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let symbols: Vec<C64> = floats.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
    let n = symbols.len();
    let bits = demap_symbols(&CVector::from_vec(symbols));
    assert_eq!(bits.len(), n * BITS_PER_SYMBOL);
    assert!(bits.iter().all(|&b| b <= 1));
});
