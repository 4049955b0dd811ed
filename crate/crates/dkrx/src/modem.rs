//! 16-QAM mapping/demapping with natural binary-coded ordering, plus
//! bit-error-rate accounting.
//!
//! Per 4-bit group `b3 b2 b1 b0` (stream order), the in-phase level comes
//! from `(b3 b2)` and the quadrature level from `(b1 b0)` via
//! `00 -> -3, 01 -> -1, 10 -> +1, 11 -> +3`, scaled by `1/sqrt(10)` so the
//! constellation has unit average energy. Natural ordering is kept on
//! purpose even though Gray labeling would lower the BER slightly.

use crate::error::{Error, Result};
use crate::numerics::{C64, CVector};

/// Bits carried by one 16-QAM symbol.
pub const BITS_PER_SYMBOL: usize = 4;

const LEVELS: [f64; 4] = [-3.0, -1.0, 1.0, 3.0];

fn scale() -> f64 {
    1.0 / 10f64.sqrt()
}

/// Constellation point for a natural-binary symbol index in `0..16`.
pub fn constellation_point(index: usize) -> C64 {
    debug_assert!(index < 16);
    let i_level = LEVELS[(index >> 2) & 0b11];
    let q_level = LEVELS[index & 0b11];
    C64::new(i_level * scale(), q_level * scale())
}

fn validate_bits(bits: &[u8]) -> Result<()> {
    if let Some(&b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::invalid(format!("bits must be 0 or 1, got {b}")));
    }
    Ok(())
}

/// Maps a bit stream (4 bits per symbol) onto unit-energy 16-QAM symbols.
pub fn map_bits(bits: &[u8]) -> Result<CVector> {
    validate_bits(bits)?;
    if bits.is_empty() || bits.len() % BITS_PER_SYMBOL != 0 {
        return Err(Error::invalid(format!(
            "bit count must be a positive multiple of 4, got {}",
            bits.len()
        )));
    }
    let symbols = bits
        .chunks_exact(BITS_PER_SYMBOL)
        .map(|g| {
            let index =
                ((g[0] as usize) << 3) | ((g[1] as usize) << 2) | ((g[2] as usize) << 1) | g[3] as usize;
            constellation_point(index)
        })
        .collect::<Vec<_>>();
    Ok(CVector::from_vec(symbols))
}

/// Hard-decides each soft symbol to the nearest constellation point and
/// returns the corresponding bits.
///
/// Ties in the (measure-zero) equidistant case resolve to the highest
/// natural-binary index among the nearest points, so the all-zero soft input
/// decides `1010`. Non-finite inputs fall back to index 0.
pub fn demap_symbols(soft: &CVector) -> Vec<u8> {
    let mut bits = Vec::with_capacity(soft.len() * BITS_PER_SYMBOL);
    for z in soft.iter() {
        let index = nearest_index(*z);
        bits.push(((index >> 3) & 1) as u8);
        bits.push(((index >> 2) & 1) as u8);
        bits.push(((index >> 1) & 1) as u8);
        bits.push((index & 1) as u8);
    }
    bits
}

fn nearest_index(z: C64) -> usize {
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for index in 0..16 {
        let p = constellation_point(index);
        let d2 = (z - p).norm_sqr();
        if d2 <= best_d2 {
            best_d2 = d2;
            best = index;
        }
    }
    best
}

/// Fraction of differing positions between two equal-length bit streams.
pub fn bit_error_rate(tx: &[u8], rx: &[u8]) -> Result<f64> {
    if tx.is_empty() || tx.len() != rx.len() {
        return Err(Error::invalid(format!(
            "bit_error_rate needs equal nonzero lengths, got {} and {}",
            tx.len(),
            rx.len()
        )));
    }
    let errors = count_bit_errors(tx, rx);
    Ok(errors as f64 / tx.len() as f64)
}

/// Number of differing positions (lengths must already match).
pub fn count_bit_errors(tx: &[u8], rx: &[u8]) -> usize {
    tx.iter().zip(rx.iter()).filter(|(a, b)| a != b).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn corner_points() {
        let s = map_bits(&[0, 0, 0, 0]).unwrap();
        let expected = C64::new(-3.0, -3.0) / 10f64.sqrt();
        assert!((s[0] - expected).norm() < 1e-15);
        let s = map_bits(&[1, 1, 1, 1]).unwrap();
        let expected = C64::new(3.0, 3.0) / 10f64.sqrt();
        assert!((s[0] - expected).norm() < 1e-15);
    }

    #[test]
    fn unit_average_energy() {
        // Sum over the 16 points: 2*(9+1)*4/16/10 = 1 exactly up to rounding.
        let mean: f64 = (0..16)
            .map(|i| constellation_point(i).norm_sqr())
            .sum::<f64>()
            / 16.0;
        assert!((mean - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_bit_streams_rejected() {
        assert!(map_bits(&[0, 1, 0]).is_err());
        assert!(map_bits(&[]).is_err());
        assert!(map_bits(&[0, 1, 2, 0]).is_err());
    }

    #[test]
    fn exact_point_demaps_to_its_bits() {
        let soft = CVector::from_vec(vec![C64::new(-3.0, -3.0) / 10f64.sqrt()]);
        assert_eq!(demap_symbols(&soft), vec![0, 0, 0, 0]);
    }

    #[test]
    fn origin_tie_breaks_to_1010() {
        let soft = CVector::from_vec(vec![C64::new(0.0, 0.0)]);
        assert_eq!(demap_symbols(&soft), vec![1, 0, 1, 0]);
    }

    #[test]
    fn noiseless_round_trip_all_patterns() {
        for index in 0..16u8 {
            let bits = [(index >> 3) & 1, (index >> 2) & 1, (index >> 1) & 1, index & 1];
            let s = map_bits(&bits).unwrap();
            assert_eq!(demap_symbols(&s), bits.to_vec(), "pattern {index:04b}");
        }
    }

    #[test]
    fn constellation_symmetric_about_axes() {
        // The 16-point set is closed under negation and conjugation.
        let points: Vec<C64> = (0..16).map(constellation_point).collect();
        let contains = |z: C64| points.iter().any(|p| (p - z).norm() < 1e-12);
        for &p in &points {
            assert!(contains(-p));
            assert!(contains(p.conj()));
        }
    }

    #[test]
    fn ber_basic_cases() {
        assert_eq!(bit_error_rate(&[0, 1, 1, 0], &[0, 1, 1, 0]).unwrap(), 0.0);
        assert_eq!(bit_error_rate(&[0, 0, 0, 0], &[1, 1, 1, 1]).unwrap(), 1.0);
        assert_eq!(bit_error_rate(&[0, 0, 1, 1], &[0, 1, 1, 0]).unwrap(), 0.5);
        assert!(bit_error_rate(&[], &[]).is_err());
        assert!(bit_error_rate(&[0], &[0, 1]).is_err());
    }

    proptest! {
        #[test]
        fn map_demap_round_trip(nibbles in proptest::collection::vec(0u8..16, 1..16)) {
            let bits: Vec<u8> = nibbles
                .iter()
                .flat_map(|&n| [(n >> 3) & 1, (n >> 2) & 1, (n >> 1) & 1, n & 1])
                .collect();
            let s = map_bits(&bits).unwrap();
            prop_assert_eq!(demap_symbols(&s), bits);
        }

        #[test]
        fn ber_symmetric(pair in proptest::collection::vec((0u8..2, 0u8..2), 1..64)) {
            let (tx, rx): (Vec<u8>, Vec<u8>) = pair.into_iter().unzip();
            let a = bit_error_rate(&tx, &rx).unwrap();
            let b = bit_error_rate(&rx, &tx).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
