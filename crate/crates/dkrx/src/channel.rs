//! Block-fading channel generation for stationary and spatially
//! non-stationary (visibility-masked) regimes.
//!
//! In the non-stationary regime each antenna sees only `D` of the `K` users:
//! its visibility mask has exactly `D` ones, drawn by rejection from i.i.d.
//! fair bits, and the masked channel entries are exactly zero.

use std::io::Write;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{draw_bits, sample_cn_scalar, C64, CMatrix, CVector, RngStream};

/// Per-antenna indicator of which users contribute energy (the diagonal of
/// the antenna's visibility matrix). Always holds exactly `d` ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMask {
    bits: Vec<u8>,
}

impl VisibilityMask {
    /// Wraps an explicit 0/1 bit pattern.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("visibility mask: empty bit pattern"));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("visibility mask: bits must be 0 or 1"));
        }
        Ok(VisibilityMask { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn k(&self) -> usize {
        self.bits.len()
    }

    /// Number of visible users (the mask's trace).
    pub fn d(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn is_visible(&self, k: usize) -> bool {
        self.bits[k] == 1
    }
}

/// One block-fading channel draw: the `M x K` gain matrix together with the
/// per-antenna masks that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    h: CMatrix,
    masks: Vec<VisibilityMask>,
    d: usize,
}

impl ChannelRealization {
    /// Builds a realization from explicit parts, checking the mask/matrix
    /// consistency invariants: one `K`-bit mask per antenna, a common trace
    /// `D` across masks, and exact zeros wherever a mask bit is cleared.
    pub fn from_parts(h: CMatrix, masks: Vec<VisibilityMask>) -> Result<Self> {
        let (m, k) = (h.nrows(), h.ncols());
        check_dims(m, k)?;
        if masks.len() != m {
            return Err(Error::invalid(format!(
                "from_parts: {} masks for {m} antennas",
                masks.len()
            )));
        }
        let d = masks[0].d();
        for (row, mask) in masks.iter().enumerate() {
            if mask.k() != k {
                return Err(Error::invalid(format!(
                    "from_parts: mask {row} has {} bits, expected {k}",
                    mask.k()
                )));
            }
            if mask.d() != d {
                return Err(Error::invalid(
                    "from_parts: all masks must share the same trace D",
                ));
            }
            for col in 0..k {
                if !mask.is_visible(col) && h[(row, col)] != C64::new(0.0, 0.0) {
                    return Err(Error::invalid(format!(
                        "from_parts: H[{row},{col}] nonzero under a cleared mask bit"
                    )));
                }
                if !h[(row, col)].re.is_finite() || !h[(row, col)].im.is_finite() {
                    return Err(Error::invalid(format!(
                        "from_parts: H[{row},{col}] is not finite"
                    )));
                }
            }
        }
        Ok(ChannelRealization { h, masks, d })
    }

    /// Full-visibility realization from a raw gain matrix.
    pub fn from_matrix(h: CMatrix) -> Result<Self> {
        let k = h.ncols();
        let masks = vec![VisibilityMask { bits: vec![1; k] }; h.nrows()];
        Self::from_parts(h, masks)
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn masks(&self) -> &[VisibilityMask] {
        &self.masks
    }

    /// Antennas (= processing nodes).
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    /// Users.
    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    /// Effective users visible per antenna.
    pub fn d(&self) -> usize {
        self.d
    }

    /// The channel row of antenna `m` as a K-vector (`h_m`).
    pub fn row(&self, m: usize) -> CVector {
        self.h.row(m).transpose()
    }

    /// Squared l2 norm of row `m`.
    pub fn row_norm_sq(&self, m: usize) -> f64 {
        self.h.row(m).iter().map(|z| z.norm_sqr()).sum()
    }

    /// Rescales every row to unit l2 norm. Used by the bound-verification
    /// code, which needs a constant per-node relaxation scalar.
    ///
    /// Fails if any row is identically zero.
    pub fn normalize_rows(&self) -> Result<ChannelRealization> {
        let mut h = self.h.clone();
        for m in 0..h.nrows() {
            let norm = self.row_norm_sq(m).sqrt();
            if norm == 0.0 {
                return Err(Error::invalid(format!(
                    "normalize_rows: row {m} has zero norm"
                )));
            }
            for k in 0..h.ncols() {
                h[(m, k)] /= norm;
            }
        }
        Ok(ChannelRealization {
            h,
            masks: self.masks.clone(),
            d: self.d,
        })
    }

    /// Debug dump: CSV rows `m,k,re,im,visible` (1-based m and k).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "m,k,re,im,visible")?;
        for m in 0..self.m() {
            for k in 0..self.k() {
                let z = self.h[(m, k)];
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    m + 1,
                    k + 1,
                    z.re,
                    z.im,
                    self.masks[m].bits[k]
                )?;
            }
        }
        Ok(())
    }
}

fn check_dims(m: usize, k: usize) -> Result<()> {
    if m == 0 || k == 0 {
        return Err(Error::invalid(format!(
            "channel dimensions must be positive, got M={m}, K={k}"
        )));
    }
    Ok(())
}

/// Stationary channel: every antenna sees every user; all entries i.i.d.
/// CN(0,1). Entries are drawn row by row, user index ascending.
pub fn generate_stationary(m: usize, k: usize, stream: RngStream) -> Result<ChannelRealization> {
    check_dims(m, k)?;
    let mut rng = stream.rng();
    Ok(generate_nonstationary_with(&mut rng, m, k, k))
}

/// Draws one visibility mask with exactly `d` of `k` bits set, uniformly over
/// the `C(k, d)` possibilities.
///
/// Sampling is by rejection: draw `k` i.i.d. fair bits and accept when their
/// sum is `d` (i.i.d. Bernoulli(1/2) conditioned on the sum is uniform over
/// that set). `d == k` is forced and consumes no randomness, which also keeps
/// the full-visibility channel bitwise identical to the stationary generator.
pub fn generate_visibility_mask(k: usize, d: usize, stream: RngStream) -> Result<VisibilityMask> {
    validate_mask_args(k, d)?;
    let mut rng = stream.rng();
    Ok(draw_mask(&mut rng, k, d))
}

fn validate_mask_args(k: usize, d: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("visibility mask: K must be positive"));
    }
    if d == 0 || d > k {
        return Err(Error::invalid(format!(
            "visibility mask: D must satisfy 1 <= D <= K, got D={d}, K={k}"
        )));
    }
    Ok(())
}

fn draw_mask(rng: &mut ChaCha8Rng, k: usize, d: usize) -> VisibilityMask {
    if d == k {
        return VisibilityMask { bits: vec![1; k] };
    }
    loop {
        let bits = draw_bits(rng, k);
        let ones: usize = bits.iter().map(|&b| b as usize).sum();
        if ones == d {
            return VisibilityMask { bits };
        }
    }
}

/// Non-stationary channel: per antenna, an independent mask with exactly `d`
/// ones; visible entries CN(0,1), masked entries exactly zero.
///
/// Stream consumption order per antenna: mask bits first, then the visible
/// gains in ascending user index.
pub fn generate_nonstationary(
    m: usize,
    k: usize,
    d: usize,
    stream: RngStream,
) -> Result<ChannelRealization> {
    check_dims(m, k)?;
    validate_mask_args(k, d)?;
    let mut rng = stream.rng();
    Ok(generate_nonstationary_with(&mut rng, m, k, d))
}

fn generate_nonstationary_with(
    rng: &mut ChaCha8Rng,
    m: usize,
    k: usize,
    d: usize,
) -> ChannelRealization {
    let mut h = CMatrix::zeros(m, k);
    let mut masks = Vec::with_capacity(m);
    for row in 0..m {
        let mask = draw_mask(rng, k, d);
        for col in 0..k {
            if mask.bits[col] == 1 {
                h[(row, col)] = sample_cn_scalar(rng, 1.0);
            }
        }
        masks.push(mask);
    }
    ChannelRealization { h, masks, d }
}

/// Channel draw addressed by an already-positioned generator (the harness
/// shares one stream per trial). `d == k` selects the stationary model.
pub fn generate_with(rng: &mut ChaCha8Rng, m: usize, k: usize, d: usize) -> ChannelRealization {
    generate_nonstationary_with(rng, m, k, d)
}
