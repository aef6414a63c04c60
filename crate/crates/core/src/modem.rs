//! Gray-mapped square QAM: bit-to-symbol mapping, hard slicing, demapping.
//!
//! Symbols live on the unnormalized odd-integer lattice: each axis takes
//! levels `±1, ±3, …, ±(M−1)` with `M = 2^m` levels per dimension. A symbol
//! carries `2m` bits, the first `m` selecting the in-phase level and the last
//! `m` the quadrature level, each axis independently binary-reflected Gray
//! coded so that neighboring levels differ in one bit. The all-zeros label
//! maps to the most positive level (`0…0 → +(M−1)`), which for 4-QAM gives
//! the usual sign mapping `0 → +1`, `1 → −1` on each axis.
//!
//! Scaling to a target symbol power is the caller's job (a single real
//! multiplier); everything here stays on the integer lattice.

use num_complex::Complex64;

use crate::scenario::QamScheme;
use crate::{Error, Result};

/// Decodes a binary-reflected Gray code.
fn gray_decode(mut g: u32) -> u32 {
    g ^= g >> 1;
    g ^= g >> 2;
    g ^= g >> 4;
    g
}

/// Encodes to binary-reflected Gray code.
fn gray_encode(v: u32) -> u32 {
    v ^ (v >> 1)
}

/// The amplitude levels of one axis in ascending order:
/// `−(M−1), …, −1, +1, …, +(M−1)`.
pub fn axis_levels(scheme: QamScheme) -> Vec<i32> {
    let m_levels = scheme.levels() as i32;
    (0..m_levels).map(|j| 2 * j - (m_levels - 1)).collect()
}

/// Level selected by `m` bits (MSB first) on one axis.
fn bits_to_level(bits: &[u8], scheme: QamScheme) -> i32 {
    let mut g = 0u32;
    for &b in bits {
        g = (g << 1) | b as u32;
    }
    let v = gray_decode(g);
    let m_levels = scheme.levels() as i32;
    (m_levels - 1) - 2 * v as i32
}

/// Bits (MSB first) encoding a lattice level on one axis.
fn level_to_bits(level: i32, scheme: QamScheme, out: &mut Vec<u8>) {
    let m_levels = scheme.levels() as i32;
    let v = ((m_levels - 1 - level) / 2) as u32;
    let g = gray_encode(v);
    for i in (0..scheme.m()).rev() {
        out.push(((g >> i) & 1) as u8);
    }
}

/// Maps a bit sequence onto lattice QAM symbols, `2m` bits per symbol: the
/// first `m` bits pick the in-phase level, the last `m` the quadrature level.
pub fn map_bits(bits: &[u8], scheme: QamScheme) -> Result<Vec<Complex64>> {
    let per_symbol = scheme.bits_per_symbol() as usize;
    if bits.is_empty() {
        return Err(Error::EmptyInput { context: "bit sequence" });
    }
    if bits.len() % per_symbol != 0 {
        return Err(Error::BitCount { expected_multiple: per_symbol, got: bits.len() });
    }
    if let Some(idx) = bits.iter().position(|&b| b > 1) {
        return Err(Error::InvalidBit { index: idx, got: bits[idx] });
    }
    let m = scheme.m() as usize;
    Ok(bits
        .chunks_exact(per_symbol)
        .map(|chunk| {
            let re = bits_to_level(&chunk[..m], scheme);
            let im = bits_to_level(&chunk[m..], scheme);
            Complex64::new(re as f64, im as f64)
        })
        .collect())
}

fn slice_axis(x: f64, scheme: QamScheme) -> i32 {
    assert!(x.is_finite(), "slicer input must be finite, got {x}");
    let m_levels = scheme.levels() as i64;
    let hi = (m_levels - 1) as f64;
    // Index of the level at or below x (level of index j is 2j−(M−1)).
    let below = ((x + hi) / 2.0).floor() as i64;
    let j0 = below.clamp(0, m_levels - 1);
    let j1 = (below + 1).clamp(0, m_levels - 1);
    let l0 = (2 * j0 - (m_levels - 1)) as i32;
    let l1 = (2 * j1 - (m_levels - 1)) as i32;
    let d0 = (x - l0 as f64).abs();
    let d1 = (x - l1 as f64).abs();
    if d0 < d1 {
        l0
    } else if d1 < d0 {
        l1
    } else if l0.abs() != l1.abs() {
        // Equidistant: prefer the smaller amplitude...
        if l0.abs() < l1.abs() {
            l0
        } else {
            l1
        }
    } else {
        // ...and at the ±1 midpoint, the positive level.
        l0.max(l1)
    }
}

/// Hard decision: the nearest lattice point in Euclidean distance, per axis.
/// Equidistant inputs resolve toward the smaller amplitude, then toward the
/// positive level. Panics on non-finite input — upstream gain normalization
/// must reject degenerate gains before slicing.
pub fn slice(y: Complex64, scheme: QamScheme) -> Complex64 {
    Complex64::new(slice_axis(y.re, scheme) as f64, slice_axis(y.im, scheme) as f64)
}

fn axis_level_checked(x: f64, scheme: QamScheme) -> Result<i32> {
    let rounded = x.round();
    let hi = (scheme.levels() as i32 - 1) as f64;
    let off_lattice = (x - rounded).abs() > 1e-9
        || rounded.abs() > hi
        || (rounded as i64).rem_euclid(2) != 1;
    if off_lattice {
        return Err(Error::OffLattice {
            value: Complex64::new(x, 0.0),
            scheme: scheme.label(),
        });
    }
    Ok(rounded as i32)
}

/// Recovers the bits of one lattice symbol. Exact inverse of [`map_bits`] on
/// constellation points; anything off the lattice is an error.
pub fn demap_symbol(s: Complex64, scheme: QamScheme) -> Result<Vec<u8>> {
    let re = axis_level_checked(s.re, scheme)
        .map_err(|_| Error::OffLattice { value: s, scheme: scheme.label() })?;
    let im = axis_level_checked(s.im, scheme)
        .map_err(|_| Error::OffLattice { value: s, scheme: scheme.label() })?;
    let mut out = Vec::with_capacity(scheme.bits_per_symbol() as usize);
    level_to_bits(re, scheme, &mut out);
    level_to_bits(im, scheme, &mut out);
    Ok(out)
}

/// Demaps a whole block after removing the amplitude scale (`amp` is the
/// multiplier that was applied to the unit lattice).
pub fn demap_block(symbols: &[Complex64], scheme: QamScheme, amp: f64) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(symbols.len() * scheme.bits_per_symbol() as usize);
    for &s in symbols {
        out.extend(demap_symbol(s / amp, scheme)?);
    }
    Ok(out)
}

/// Every constellation point, in bit-pattern order.
pub fn constellation(scheme: QamScheme) -> Vec<Complex64> {
    let per_symbol = scheme.bits_per_symbol();
    (0..scheme.points())
        .map(|pattern| {
            let bits: Vec<u8> =
                (0..per_symbol).rev().map(|i| ((pattern >> i) & 1) as u8).collect();
            map_bits(&bits, scheme).unwrap()[0]
        })
        .collect()
}
