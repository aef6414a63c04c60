//! Multipath MIMO channel generation.
//!
//! Each transmit/receive antenna pair `(i, j)` gets an independent channel
//! impulse response whose taps are circularly-symmetric complex Gaussian with
//! per-tap variances given by a [`PowerDelayProfile`]. The cyclic prefix keeps
//! the CIR shorter than the prefix, so the frequency response decouples the
//! block into `N` independent subchannels; the per-subchannel matrices `H_k`
//! are the zero-padded DFTs of the CIRs.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::{self, Dft, Mat};
use crate::rng::RealizationStream;
use crate::{Error, Result};

/// Per-tap variances of the channel impulse response.
///
/// The sum of the tap variances, `P_Σ`, is the average total received power
/// per antenna pair; it is carried through the energy accounting rather than
/// normalized away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerDelayProfile {
    /// `taps` coefficients with variances decaying linearly to zero:
    /// `P_n = 1 - n/(taps-1)`. With 64 taps this gives `P_Σ = 32`.
    LinearDecay { taps: usize },
    /// Single-tap (frequency-flat) channel with the given power.
    SingleTap { power: f64 },
    /// Explicit per-tap variances.
    Custom { taps: Vec<f64> },
}

impl PowerDelayProfile {
    /// Materializes the per-tap variance list.
    pub fn tap_variances(&self) -> Vec<f64> {
        match self {
            Self::LinearDecay { taps } => {
                let span = (taps - 1) as f64;
                (0..*taps).map(|n| 1.0 - n as f64 / span).collect()
            }
            Self::SingleTap { power } => vec![*power],
            Self::Custom { taps } => taps.clone(),
        }
    }

    /// Number of CIR taps.
    pub fn len(&self) -> usize {
        match self {
            Self::LinearDecay { taps } => *taps,
            Self::SingleTap { .. } => 1,
            Self::Custom { taps } => taps.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total power `P_Σ` (sum of tap variances).
    pub fn total_power(&self) -> f64 {
        self.tap_variances().iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::LinearDecay { taps } = self {
            if *taps < 2 {
                return Err(Error::config("linear_decay profile needs at least 2 taps"));
            }
        }
        let taps = self.tap_variances();
        if taps.is_empty() {
            return Err(Error::EmptyInput { context: "power delay profile" });
        }
        for (n, &p) in taps.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::config(format!("tap {n} has invalid variance {p}")));
            }
        }
        if self.total_power() <= 0.0 {
            return Err(Error::config("power delay profile has zero total power"));
        }
        Ok(())
    }
}

/// One block-fading draw of the full MIMO channel: all antenna-pair CIRs plus
/// the derived per-subchannel frequency-domain matrices.
///
/// Serialization keeps only the CIR taps (the frequency responses are
/// recomputed on load), which is what the channel-dump replay format stores.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "CirDump", into = "CirDump")]
pub struct ChannelRealization {
    n: usize,
    n_t: usize,
    n_r: usize,
    /// CIR taps per antenna pair, indexed `rx * n_t + tx`.
    cirs: Vec<Vec<Complex64>>,
    /// Per-subchannel channel matrices, `n` entries of shape `N_R x N_T`.
    h: Vec<Mat>,
}

/// Serde shadow carrying only the defining data.
#[derive(Serialize, Deserialize)]
struct CirDump {
    n: usize,
    n_t: usize,
    n_r: usize,
    cirs: Vec<Vec<Complex64>>,
}

impl From<ChannelRealization> for CirDump {
    fn from(r: ChannelRealization) -> Self {
        CirDump { n: r.n, n_t: r.n_t, n_r: r.n_r, cirs: r.cirs }
    }
}

impl TryFrom<CirDump> for ChannelRealization {
    type Error = Error;
    fn try_from(d: CirDump) -> Result<Self> {
        ChannelRealization::from_cirs(d.n, d.n_t, d.n_r, d.cirs)
    }
}

impl ChannelRealization {
    /// Builds a realization from explicit CIRs (one per antenna pair, indexed
    /// `rx * n_t + tx`), computing the frequency responses by zero-padded DFT.
    pub fn from_cirs(
        n: usize,
        n_t: usize,
        n_r: usize,
        cirs: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if n_t == 0 || n_r == 0 || n == 0 {
            return Err(Error::EmptyInput { context: "channel dimensions" });
        }
        if cirs.len() != n_t * n_r {
            return Err(Error::DimensionMismatch {
                context: format!("expected {} CIRs, got {}", n_t * n_r, cirs.len()),
            });
        }
        let plan = Dft::get(n)?;
        let mut h = vec![Mat::zeros(n_r, n_t); n];
        for rx in 0..n_r {
            for tx in 0..n_t {
                let cir = &cirs[rx * n_t + tx];
                if cir.len() > n {
                    return Err(Error::DimensionMismatch {
                        context: format!("CIR ({} taps) longer than block ({n})", cir.len()),
                    });
                }
                numerics::check_finite(cir)?;
                let cfr = plan.forward_padded(cir)?;
                for (k, &v) in cfr.iter().enumerate() {
                    h[k].set(rx, tx, v);
                }
            }
        }
        Ok(Self { n, n_t, n_r, cirs, h })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    /// Channel matrix of subchannel `k` (shape `N_R x N_T`).
    pub fn h_k(&self, k: usize) -> &Mat {
        &self.h[k]
    }

    /// All per-subchannel matrices, indexed by `k`.
    pub fn subchannels(&self) -> &[Mat] {
        &self.h
    }

    /// CIR taps of one antenna pair.
    pub fn cir(&self, rx: usize, tx: usize) -> &[Complex64] {
        &self.cirs[rx * self.n_t + tx]
    }

    /// Frequency response of one antenna pair at subchannel `k`.
    pub fn cfr(&self, rx: usize, tx: usize, k: usize) -> Complex64 {
        self.h[k].at(rx, tx)
    }
}

/// Draws a Rayleigh block-fading realization: every tap of every antenna pair
/// is an independent zero-mean complex Gaussian with variance `P_n`.
///
/// Each antenna pair consumes its own RNG substream, so realizations are
/// bit-identical regardless of worker count, and adding receive antennas
/// leaves the streams of existing pairs untouched.
pub fn draw_rayleigh(
    profile: &PowerDelayProfile,
    n_t: usize,
    n_r: usize,
    n: usize,
    stream: &RealizationStream,
) -> Result<ChannelRealization> {
    profile.validate()?;
    let variances = profile.tap_variances();
    if variances.len() > n {
        return Err(Error::config(format!(
            "profile length {} exceeds block length {n}",
            variances.len()
        )));
    }
    let scales: Vec<f64> = variances.iter().map(|p| (p / 2.0).sqrt()).collect();
    let mut cirs = Vec::with_capacity(n_t * n_r);
    for rx in 0..n_r {
        for tx in 0..n_t {
            let mut rng = stream.pair_rng(rx, tx, n_t);
            let taps: Vec<Complex64> = scales
                .iter()
                .map(|&s| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(s * re, s * im)
                })
                .collect();
            cirs.push(taps);
        }
    }
    ChannelRealization::from_cirs(n, n_t, n_r, cirs)
}

/// Deterministic line-of-sight single-path channel: one transmitter, `n_r`
/// receive antennas, every pair a single tap `√P_Σ`, so `|H_k|² = P_Σ` on
/// every subchannel. This is the channel whose matched-filter performance
/// equals the closed-form single-input bound.
pub fn los_single_path(n_r: usize, p_sigma: f64, n: usize) -> Result<ChannelRealization> {
    if !(p_sigma.is_finite() && p_sigma > 0.0) {
        return Err(Error::config(format!("total power must be positive, got {p_sigma}")));
    }
    let tap = Complex64::new(p_sigma.sqrt(), 0.0);
    let cirs = vec![vec![tap]; n_r];
    ChannelRealization::from_cirs(n, 1, n_r, cirs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(seed: u64, index: u64) -> RealizationStream {
        RealizationStream { seed, context: 0, index }
    }

    #[test]
    fn linear_decay_64_taps_sums_to_32() {
        let profile = PowerDelayProfile::LinearDecay { taps: 64 };
        assert!((profile.total_power() - 32.0).abs() < 1e-12);
        let taps = profile.tap_variances();
        assert_eq!(taps.len(), 64);
        assert!((taps[0] - 1.0).abs() < 1e-15);
        assert!(taps[63].abs() < 1e-15);
    }

    #[test]
    fn single_tap_channel_is_flat() {
        let profile = PowerDelayProfile::SingleTap { power: 1.0 };
        let real = draw_rayleigh(&profile, 2, 3, 16, &stream(7, 0)).unwrap();
        for rx in 0..3 {
            for tx in 0..2 {
                let h0 = real.cfr(rx, tx, 0);
                for k in 1..16 {
                    assert_eq!(real.cfr(rx, tx, k), h0, "flat channel must not vary with k");
                }
            }
        }
    }

    #[test]
    fn cir_support_matches_profile() {
        let profile = PowerDelayProfile::LinearDecay { taps: 8 };
        let real = draw_rayleigh(&profile, 1, 2, 32, &stream(3, 1)).unwrap();
        assert_eq!(real.cir(0, 0).len(), 8);
        assert_eq!(real.cir(1, 0).len(), 8);
    }

    #[test]
    fn same_stream_reproduces_bit_identical_realization() {
        let profile = PowerDelayProfile::LinearDecay { taps: 16 };
        let a = draw_rayleigh(&profile, 2, 4, 32, &stream(42, 5)).unwrap();
        let b = draw_rayleigh(&profile, 2, 4, 32, &stream(42, 5)).unwrap();
        for rx in 0..4 {
            for tx in 0..2 {
                assert_eq!(a.cir(rx, tx), b.cir(rx, tx));
            }
        }
    }

    #[test]
    fn growing_receive_array_preserves_existing_pairs() {
        let profile = PowerDelayProfile::LinearDecay { taps: 16 };
        let small = draw_rayleigh(&profile, 3, 4, 32, &stream(9, 2)).unwrap();
        let large = draw_rayleigh(&profile, 3, 10, 32, &stream(9, 2)).unwrap();
        for rx in 0..4 {
            for tx in 0..3 {
                assert_eq!(small.cir(rx, tx), large.cir(rx, tx));
            }
        }
    }

    #[test]
    fn mean_squared_frequency_response_approaches_total_power() {
        // One antenna pair, 10^4 realizations: the ensemble mean of |H_k|²
        // must sit within 3 standard errors of P_Σ on every subchannel.
        // |H_k|² is exponential with mean and std both P_Σ, so the standard
        // error of the mean is P_Σ/100.
        let profile = PowerDelayProfile::LinearDecay { taps: 64 };
        let p_sigma = profile.total_power();
        let n = 64;
        let draws = 10_000;
        let mut acc = vec![0.0f64; n];
        for r in 0..draws {
            let real = draw_rayleigh(&profile, 1, 1, n, &stream(2024, r)).unwrap();
            for k in 0..n {
                acc[k] += real.cfr(0, 0, k).norm_sqr();
            }
        }
        let se = p_sigma / (draws as f64).sqrt();
        for (k, &sum) in acc.iter().enumerate() {
            let mean = sum / draws as f64;
            assert!(
                (mean - p_sigma).abs() < 3.0 * se,
                "subchannel {k}: mean |H|² = {mean}, expected {p_sigma} ± {}",
                3.0 * se
            );
        }
    }

    #[test]
    fn los_channel_has_unit_gain_everywhere() {
        let real = los_single_path(4, 1.0, 8).unwrap();
        assert_eq!(real.n_t(), 1);
        assert_eq!(real.n_r(), 4);
        for rx in 0..4 {
            for k in 0..8 {
                assert!((real.cfr(rx, 0, k).norm_sqr() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn los_channel_carries_total_power() {
        let real = los_single_path(3, 32.0, 8).unwrap();
        for rx in 0..3 {
            for k in 0..8 {
                assert!((real.cfr(rx, 0, k).norm_sqr() - 32.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dump_round_trips_through_json() {
        let profile = PowerDelayProfile::LinearDecay { taps: 8 };
        let real = draw_rayleigh(&profile, 2, 2, 16, &stream(11, 0)).unwrap();
        let text = serde_json::to_string(&real).unwrap();
        let back: ChannelRealization = serde_json::from_str(&text).unwrap();
        for k in 0..16 {
            assert!(back.h_k(k).max_abs_diff(real.h_k(k)) < 1e-15);
        }
    }

    #[test]
    fn profile_validation_rejects_bad_inputs() {
        assert!(PowerDelayProfile::Custom { taps: vec![] }.validate().is_err());
        assert!(PowerDelayProfile::Custom { taps: vec![0.0] }.validate().is_err());
        assert!(PowerDelayProfile::Custom { taps: vec![1.0, -0.5] }.validate().is_err());
        assert!(PowerDelayProfile::LinearDecay { taps: 1 }.validate().is_err());
        assert!(PowerDelayProfile::SingleTap { power: 1.0 }.validate().is_ok());
    }

    #[test]
    fn profile_longer_than_block_is_rejected() {
        let profile = PowerDelayProfile::LinearDecay { taps: 64 };
        assert!(draw_rayleigh(&profile, 1, 1, 32, &stream(0, 0)).is_err());
    }
}
