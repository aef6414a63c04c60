//! Semi-analytical performance machinery.
//!
//! Conditioned on one channel realization, every linear detector's output is
//! Gaussian-like enough that the per-input bit error rate follows from a
//! signal-to-interference-plus-noise ratio in closed form. This module
//! computes that SINR decomposition exactly from the detection matrices,
//! maps it through the Gray-QAM bit error formulas, and averages over a
//! channel ensemble — orders of magnitude cheaper than error counting, and
//! exact in the same limit.
//!
//! For input `j` the decomposition reads
//!
//! ```text
//!            N |γ_j|²
//! SINR_j = ─────────────────────────────────────────────────────────────
//!          β_j + Σ_{l≠j} (σ_l²/σ_j²) β_{j,l} + α_j Σ_k Σ_i |D_k^(j,i)|²
//! ```
//!
//! with `β_j = Σ_k |Γ_k^(j,j) − γ_j|²` (residual ISI) and
//! `β_{j,l} = Σ_k |Γ_k^(j,l)|²` (multi-stream interference). Letting
//! `α → 0` removes the noise term and leaves the irreducible error floor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelRealization};
use crate::detectors::{self, DetectionMatrixSet, DetectorKind, GainSet};
use crate::par;
use crate::rng::RealizationStream;
use crate::scenario::{self, PowerControl, QamScheme, ScenarioConfig};
use crate::{Error, Result};

/// Stream context tag for the semi-analytical channel ensemble (Monte Carlo
/// sweep points use small integers; keep these disjoint).
pub(crate) const SA_STREAM_CONTEXT: u64 = 1 << 32;
/// Stream context tag for irreducible-error ensembles.
pub(crate) const IBER_STREAM_CONTEXT: u64 = 1 << 33;

/// Gaussian tail probability `Q(x) = P(Z > x)` for standard normal `Z`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Which bit-error formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BerMode {
    /// Per-bit-position expressions, exact for Gray-mapped square QAM on a
    /// Gaussian-equivalent channel.
    #[default]
    Exact,
    /// The single-Q-term approximation `(2/m)(1−1/M) Q(√(3·SINR/(M²−1)))`,
    /// tight once the error rate drops below ~1e-4.
    Approx,
}

/// One input's exact output-power split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrComponents {
    /// Useful signal power `N |γ_j|²`.
    pub signal: f64,
    /// Residual inter-symbol interference `β_j`.
    pub isi: f64,
    /// Multi-stream/multi-user interference `Σ_{l≠j} (σ_l²/σ_j²) β_{j,l}`.
    pub mui: f64,
    /// Filtered noise `α_j Σ_k Σ_i |D_k^(j,i)|²`.
    pub noise: f64,
}

impl SinrComponents {
    /// Signal over everything else; `+∞` when the denominator vanishes with
    /// nonzero signal (interference-free noiseless reception).
    pub fn sinr(&self) -> f64 {
        let denom = self.isi + self.mui + self.noise;
        if denom > 0.0 {
            self.signal / denom
        } else if self.signal > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Per-input SINR decomposition of one detector on one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub per_input: Vec<SinrComponents>,
}

impl SinrReport {
    pub fn sinr(&self, j: usize) -> f64 {
        self.per_input[j].sinr()
    }

    pub fn sinrs(&self) -> Vec<f64> {
        self.per_input.iter().map(|c| c.sinr()).collect()
    }
}

fn sinr_parts(
    n: usize,
    n_t: usize,
    gamma: &[Complex64],
    cross_power: &[f64],
    noise_quad: &[f64],
    alpha: &[f64],
    sigma2: &[f64],
) -> SinrReport {
    let per_input = (0..n_t)
        .map(|j| {
            let signal = n as f64 * gamma[j].norm_sqr();
            let isi = (cross_power[j * n_t + j] - signal).max(0.0);
            let mui = (0..n_t)
                .filter(|&l| l != j)
                .map(|l| sigma2[l] / sigma2[j] * cross_power[j * n_t + l])
                .sum();
            let noise = alpha[j] * noise_quad[j];
            SinrComponents { signal, isi, mui, noise }
        })
        .collect();
    SinrReport { per_input }
}

/// Exact SINR decomposition from a fully-built detection matrix set.
pub fn sinr_linear(set: &DetectionMatrixSet, alpha: &[f64], sigma2: &[f64]) -> SinrReport {
    let (n, n_t, n_r) = (set.n(), set.n_t(), set.n_r());
    let mut cross_power = vec![0.0f64; n_t * n_t];
    let mut noise_quad = vec![0.0f64; n_t];
    for k in 0..n {
        let gm = set.gamma_k(k);
        let d = set.d_k(k);
        for j in 0..n_t {
            for l in 0..n_t {
                cross_power[j * n_t + l] += gm.at(j, l).norm_sqr();
            }
            noise_quad[j] += (0..n_r).map(|i| d.at(j, i).norm_sqr()).sum::<f64>();
        }
    }
    sinr_parts(n, n_t, set.gamma(), &cross_power, &noise_quad, alpha, sigma2)
}

/// Same decomposition from the streaming gains (identical result; no per-`k`
/// matrices needed).
pub(crate) fn sinr_from_gains(gains: &GainSet, alpha: &[f64], sigma2: &[f64]) -> SinrReport {
    sinr_parts(
        gains.n,
        gains.n_t,
        &gains.gamma,
        &gains.cross_power,
        &gains.noise_quad,
        alpha,
        sigma2,
    )
}

/// Bit error rate of one Gray-QAM input at a given SINR.
pub fn ber_from_sinr(sinr: f64, scheme: QamScheme, mode: BerMode) -> f64 {
    assert!(sinr >= 0.0, "SINR must be nonnegative, got {sinr}");
    if sinr.is_infinite() {
        return 0.0;
    }
    match mode {
        BerMode::Approx => {
            let m = scheme.m() as f64;
            let big_m = scheme.levels() as f64;
            (2.0 / m) * (1.0 - 1.0 / big_m) * q_func((3.0 * sinr / (big_m * big_m - 1.0)).sqrt())
        }
        BerMode::Exact => match scheme {
            QamScheme::Qam4 => q_func(sinr.sqrt()),
            QamScheme::Qam16 => {
                let p = |n: f64| q_func((n * n * sinr / 5.0).sqrt());
                0.75 * p(1.0) + 0.5 * p(3.0) - 0.25 * p(5.0)
            }
            QamScheme::Qam64 => {
                let p = |n: f64| q_func((n * n * sinr / 21.0).sqrt());
                let ber1 = (p(1.0) + p(3.0) + p(5.0) + p(7.0)) / 4.0;
                let ber2 = ((p(3.0) - p(11.0))
                    + (p(1.0) - p(9.0))
                    + (p(1.0) + p(7.0))
                    + (p(3.0) + p(5.0)))
                    / 4.0;
                let ber3 = ((p(1.0) - p(5.0) + p(9.0) - p(13.0))
                    + (p(1.0) + p(3.0) - p(7.0) + p(11.0))
                    + (p(3.0) + p(1.0) - p(5.0) + p(9.0))
                    + (p(1.0) - p(5.0) + p(3.0) - p(7.0)))
                    / 4.0;
                (ber1 + ber2 + ber3) / 3.0
            }
        },
    }
}

/// Irreducible per-input bit error rates: the noise term dropped from the
/// SINR. Meaningful when `set` was built with zero regularization (the
/// noise-free limit of the detector itself).
pub fn iber(set: &DetectionMatrixSet, sigma2: &[f64], schemes: &[QamScheme], mode: BerMode) -> Vec<f64> {
    let zeros = vec![0.0; set.n_t()];
    let report = sinr_linear(set, &zeros, sigma2);
    (0..set.n_t()).map(|j| ber_from_sinr(report.sinr(j), schemes[j], mode)).collect()
}

/// Single-input matched-filter bound for input `j` on one realization:
/// interference-free maximum-ratio combining over all receive antennas and
/// subchannels, `SINR = (1/(N α_j)) Σ_k Σ_i |H_k^(i,j)|²`.
pub fn simo_mfb(
    realization: &ChannelRealization,
    j: usize,
    alpha_j: f64,
    scheme: QamScheme,
    mode: BerMode,
) -> f64 {
    if alpha_j == 0.0 {
        return 0.0;
    }
    let total: f64 = (0..realization.n())
        .map(|k| {
            let h = realization.h_k(k);
            (0..realization.n_r()).map(|i| h.at(i, j).norm_sqr()).sum::<f64>()
        })
        .sum();
    let sinr = total / (realization.n() as f64 * alpha_j);
    ber_from_sinr(sinr, scheme, mode)
}

/// SINR of the single-input bound under line-of-sight unit-power propagation:
/// `2 η m N_R · EbN0`. No channel ensemble involved.
pub fn simo_awgn_mfb_sinr(scheme: QamScheme, n_r: usize, eta: f64, ebn0_db: f64) -> f64 {
    let lin = 10f64.powf(ebn0_db / 10.0);
    2.0 * eta * scheme.m() as f64 * n_r as f64 * lin
}

/// Closed-form single-input bound: [`ber_from_sinr`] at the
/// [`simo_awgn_mfb_sinr`] SINR.
pub fn simo_awgn_mfb(
    scheme: QamScheme,
    n_r: usize,
    eta: f64,
    ebn0_db: f64,
    mode: BerMode,
) -> f64 {
    ber_from_sinr(simo_awgn_mfb_sinr(scheme, n_r, eta, ebn0_db), scheme, mode)
}

/// How a curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMethod {
    SemiAnalytical,
    MonteCarlo,
    Bound,
}

impl CurveMethod {
    pub fn label(self) -> &'static str {
        match self {
            Self::SemiAnalytical => "semi_analytical",
            Self::MonteCarlo => "monte_carlo",
            Self::Bound => "bound",
        }
    }
}

/// The swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XAxis {
    Ebn0Db,
    NR,
}

impl XAxis {
    /// CSV column name.
    pub fn column(self) -> &'static str {
        match self {
            Self::Ebn0Db => "ebn0_db",
            Self::NR => "n_r",
        }
    }
}

/// One sample of a performance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    /// Sweep value (Eb/N0 in dB, or receive antenna count).
    pub x: f64,
    /// Per-input bit error rates.
    pub per_input: Vec<f64>,
    /// Bit-weighted average over inputs.
    pub aggregate: f64,
    /// Standard error of the aggregate (over realizations or blocks).
    pub stderr: f64,
    /// Sample count behind the point: realizations (semi-analytical) or
    /// transmitted bits (Monte Carlo).
    pub n: u64,
    /// Counted bit errors (Monte Carlo only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<u64>,
    /// Set when an error-counting run hit its block budget before reaching
    /// the requested error count.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_confidence: bool,
}

/// A labeled performance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub method: CurveMethod,
    /// Detector label (`mf`, `exact_mmse`, `simplified_mmse`, or a
    /// decision-feedback schedule label).
    pub detector: String,
    /// Constellation label when the curve belongs to one scheme of a family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    pub x_axis: XAxis,
    pub points: Vec<BerPoint>,
    pub seed: u64,
    /// Decision-feedback iteration this curve tracks (1-based).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

/// Bit-count-weighted aggregate over inputs.
pub fn aggregate_ber(per_input: &[f64], schemes: &[QamScheme]) -> f64 {
    let total_bits: f64 = schemes.iter().map(|s| s.bits_per_symbol() as f64).sum();
    per_input
        .iter()
        .zip(schemes)
        .map(|(&b, s)| b * s.bits_per_symbol() as f64)
        .sum::<f64>()
        / total_bits
}

/// Options for the semi-analytical sweep engine.
#[derive(Debug, Clone, Copy)]
pub struct SaOptions {
    /// Channel realizations averaged per grid point (the same ensemble is
    /// shared by every grid point and every detector for common-random-number
    /// comparisons).
    pub n_realizations: usize,
    pub mode: BerMode,
    pub power_control: PowerControl,
    /// Overrides the scenario seed when set.
    pub seed: Option<u64>,
}

impl Default for SaOptions {
    fn default() -> Self {
        Self {
            n_realizations: 200,
            mode: BerMode::Exact,
            power_control: PowerControl::FixedSigma,
            seed: None,
        }
    }
}

/// Semi-analytical BER curve over an Eb/N0 grid: per realization, build the
/// detector gains, evaluate the SINR decomposition at each grid point, map
/// through the bit-error formulas, and average.
pub fn semi_analytical_ber(
    cfg: &ScenarioConfig,
    kind: DetectorKind,
    grid: &[f64],
    opts: &SaOptions,
) -> Result<BerCurve> {
    let seed = opts.seed.unwrap_or(cfg.seed);
    let profile = cfg.profile.clone();
    let (n_t, n_r, n) = (cfg.n_t, cfg.n_r, cfg.n);
    semi_analytical_ber_with(cfg, kind, grid, opts, &move |r| {
        channel::draw_rayleigh(
            &profile,
            n_t,
            n_r,
            n,
            &RealizationStream::new(seed, SA_STREAM_CONTEXT, r),
        )
    })
}

/// [`semi_analytical_ber`] with a caller-supplied channel source — for
/// deterministic channels, replayed dumps, or alternative ensembles.
pub fn semi_analytical_ber_with(
    cfg: &ScenarioConfig,
    kind: DetectorKind,
    grid: &[f64],
    opts: &SaOptions,
    draw: &(dyn Fn(u64) -> Result<ChannelRealization> + Sync),
) -> Result<BerCurve> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyInput { context: "Eb/N0 grid" });
    }
    if opts.n_realizations == 0 {
        return Err(Error::config("need at least one realization"));
    }
    let points: Vec<_> = grid
        .iter()
        .map(|&x| scenario::sweep_point(cfg, x, opts.power_control))
        .collect::<Result<_>>()?;
    let schemes = cfg.schemes();
    let seed = opts.seed.unwrap_or(cfg.seed);

    // One work unit per realization: per grid point, per-input BER plus the
    // aggregate.
    let per_real: Vec<Result<Vec<(Vec<f64>, f64)>>> =
        par::map_indexed(opts.n_realizations, |r| {
            let real = draw(r as u64)?;
            let grams = detectors::gram_set(&real, real.n_r());
            // The matched filter's gains do not depend on the operating
            // point, so they are built once and reused across the grid.
            let mf_gains = match kind {
                DetectorKind::Mf => {
                    Some(detectors::build_gain_set(kind, &grams, &points[0].noise.alpha)?)
                }
                _ => None,
            };
            points
                .iter()
                .map(|point| {
                    let alpha = &point.noise.alpha;
                    let report = match &mf_gains {
                        Some(g) => sinr_from_gains(g, alpha, &point.sigma2),
                        None => {
                            let gains = detectors::build_gain_set(kind, &grams, alpha)?;
                            sinr_from_gains(&gains, alpha, &point.sigma2)
                        }
                    };
                    let per_input: Vec<f64> = (0..cfg.n_t)
                        .map(|j| ber_from_sinr(report.sinr(j), schemes[j], opts.mode))
                        .collect();
                    let agg = aggregate_ber(&per_input, &schemes);
                    Ok((per_input, agg))
                })
                .collect()
        });

    let mut sum_input = vec![vec![0.0f64; cfg.n_t]; grid.len()];
    let mut sum_agg = vec![0.0f64; grid.len()];
    let mut sum_agg_sq = vec![0.0f64; grid.len()];
    for real in per_real {
        let real = real?;
        for (pi, (per_input, agg)) in real.into_iter().enumerate() {
            for (j, b) in per_input.into_iter().enumerate() {
                sum_input[pi][j] += b;
            }
            sum_agg[pi] += agg;
            sum_agg_sq[pi] += agg * agg;
        }
    }

    let r = opts.n_realizations as f64;
    let points = grid
        .iter()
        .enumerate()
        .map(|(pi, &x)| {
            let per_input: Vec<f64> = sum_input[pi].iter().map(|s| s / r).collect();
            let mean = sum_agg[pi] / r;
            let stderr = if opts.n_realizations > 1 {
                let var = ((sum_agg_sq[pi] - r * mean * mean) / (r - 1.0)).max(0.0);
                (var / r).sqrt()
            } else {
                0.0
            };
            BerPoint {
                x,
                per_input,
                aggregate: mean,
                stderr,
                n: opts.n_realizations as u64,
                errors: None,
                low_confidence: false,
            }
        })
        .collect();

    Ok(BerCurve {
        method: CurveMethod::SemiAnalytical,
        detector: kind.label().to_string(),
        scheme: cfg.uniform_scheme().map(|s| s.label().to_string()),
        x_axis: XAxis::Ebn0Db,
        points,
        seed,
        iteration: None,
    })
}

/// Options for irreducible-error ensembles.
#[derive(Debug, Clone, Copy)]
pub struct IberOptions {
    pub n_realizations: usize,
    pub mode: BerMode,
    pub seed: Option<u64>,
}

impl Default for IberOptions {
    fn default() -> Self {
        Self { n_realizations: 2000, mode: BerMode::Exact, seed: None }
    }
}

/// Irreducible BER floors versus receive-antenna count, for a family of
/// detectors and constellations at once.
///
/// The scenario must be uniform (every input same scheme and power): in the
/// noise-free limit the SINR then does not depend on the constellation, so
/// one ensemble prices every scheme, and the channel is drawn once per
/// realization at the largest antenna count with Gram matrices extended
/// incrementally down the `n_r` list (common random numbers across counts).
///
/// Returns one curve per `(detector, scheme)` pair, detectors outermost.
pub fn iber_ensemble(
    cfg: &ScenarioConfig,
    kinds: &[DetectorKind],
    schemes: &[QamScheme],
    n_r_list: &[usize],
    opts: &IberOptions,
) -> Result<Vec<BerCurve>> {
    cfg.validate()?;
    if kinds.is_empty() || schemes.is_empty() {
        return Err(Error::EmptyInput { context: "detector or scheme list" });
    }
    if n_r_list.is_empty() {
        return Err(Error::EmptyInput { context: "receive antenna sweep" });
    }
    if !n_r_list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("receive antenna sweep must be strictly increasing"));
    }
    if n_r_list[0] < cfg.n_t {
        return Err(Error::config(format!(
            "smallest receive antenna count {} is below NT = {}",
            n_r_list[0], cfg.n_t
        )));
    }
    let uniform = cfg.uniform_scheme().is_some()
        && cfg.antennas.iter().all(|a| a.sigma2 == cfg.antennas[0].sigma2);
    if !uniform {
        return Err(Error::config(
            "irreducible-error sweeps require a uniform scenario (same scheme and power on every input)",
        ));
    }
    if opts.n_realizations == 0 {
        return Err(Error::config("need at least one realization"));
    }

    let n_r_max = *n_r_list.last().unwrap();
    let seed = opts.seed.unwrap_or(cfg.seed);
    let zeros = vec![0.0f64; cfg.n_t];
    let sigma2 = cfg.sigma2();

    // Per realization: SINR per (n_r, kind, input) — scheme-independent.
    let per_real: Vec<Result<Vec<Vec<Vec<f64>>>>> =
        par::map_indexed(opts.n_realizations, |r| {
            let real = channel::draw_rayleigh(
                &cfg.profile,
                cfg.n_t,
                n_r_max,
                cfg.n,
                &RealizationStream::new(seed, IBER_STREAM_CONTEXT, r as u64),
            )?;
            let mut grams = detectors::gram_set(&real, n_r_list[0]);
            let mut out = Vec::with_capacity(n_r_list.len());
            for (idx, &n_r) in n_r_list.iter().enumerate() {
                if idx > 0 {
                    detectors::extend_gram_set(&mut grams, &real, n_r_list[idx - 1], n_r);
                }
                let per_kind = kinds
                    .iter()
                    .map(|&kind| {
                        let gains = detectors::build_gain_set(kind, &grams, &zeros)?;
                        Ok(sinr_from_gains(&gains, &zeros, &sigma2).sinrs())
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(per_kind);
            }
            Ok(out)
        });

    // Accumulate per (kind, scheme, n_r): per-input sums and aggregate stats.
    let n_cells = kinds.len() * schemes.len() * n_r_list.len();
    let mut sum_input = vec![vec![0.0f64; cfg.n_t]; n_cells];
    let mut sum_agg = vec![0.0f64; n_cells];
    let mut sum_agg_sq = vec![0.0f64; n_cells];
    let cell = |ki: usize, si: usize, ni: usize| {
        (ki * schemes.len() + si) * n_r_list.len() + ni
    };
    for real in per_real {
        let real = real?;
        for (ni, per_kind) in real.into_iter().enumerate() {
            for (ki, sinrs) in per_kind.into_iter().enumerate() {
                for (si, &scheme) in schemes.iter().enumerate() {
                    let per_input: Vec<f64> = sinrs
                        .iter()
                        .map(|&s| ber_from_sinr(s, scheme, opts.mode))
                        .collect();
                    let agg: f64 = per_input.iter().sum::<f64>() / cfg.n_t as f64;
                    let c = cell(ki, si, ni);
                    for (j, b) in per_input.into_iter().enumerate() {
                        sum_input[c][j] += b;
                    }
                    sum_agg[c] += agg;
                    sum_agg_sq[c] += agg * agg;
                }
            }
        }
    }

    let r = opts.n_realizations as f64;
    let mut curves = Vec::with_capacity(kinds.len() * schemes.len());
    for (ki, &kind) in kinds.iter().enumerate() {
        for (si, &scheme) in schemes.iter().enumerate() {
            let points = n_r_list
                .iter()
                .enumerate()
                .map(|(ni, &n_r)| {
                    let c = cell(ki, si, ni);
                    let per_input: Vec<f64> = sum_input[c].iter().map(|s| s / r).collect();
                    let mean = sum_agg[c] / r;
                    let stderr = if opts.n_realizations > 1 {
                        let var = ((sum_agg_sq[c] - r * mean * mean) / (r - 1.0)).max(0.0);
                        (var / r).sqrt()
                    } else {
                        0.0
                    };
                    BerPoint {
                        x: n_r as f64,
                        per_input,
                        aggregate: mean,
                        stderr,
                        n: opts.n_realizations as u64,
                        errors: None,
                        low_confidence: false,
                    }
                })
                .collect();
            curves.push(BerCurve {
                method: CurveMethod::SemiAnalytical,
                detector: kind.label().to_string(),
                scheme: Some(scheme.label().to_string()),
                x_axis: XAxis::NR,
                points,
                seed,
                iteration: None,
            });
        }
    }
    Ok(curves)
}
