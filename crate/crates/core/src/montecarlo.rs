//! Error-counting simulation.
//!
//! The full transmit → propagate → detect → demap chain, with bit errors
//! counted against the transmitted payload. Every random quantity comes from
//! a counter-keyed substream of the run seed — bits, channel, and noise each
//! from their own domain, indexed by `(grid point, block)` — so results are
//! reproducible bit-for-bit regardless of how many worker threads execute
//! the blocks, and a run can be stopped and re-driven without replaying
//! history.
//!
//! Blocks are simulated in fixed-size batches; the stopping rule (enough
//! errors on the final receiver iteration, or the block budget) is evaluated
//! only at batch boundaries, which keeps the stopping decision independent
//! of scheduling order.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::{BerCurve, BerPoint, CurveMethod, SinrReport, XAxis};
use crate::channel::{self, ChannelRealization};
use crate::detectors::{self, DetectorKind, DfSchedule, SymbolBlock};
use crate::modem;
use crate::numerics::Dft;
use crate::par;
use crate::rng::{self, RealizationStream};
use crate::scenario::{self, OperatingPoint, PowerControl, QamScheme, ScenarioConfig};
use crate::{Error, Result};

/// Stream context tag for [`measure_output_stats`]' fixed channel (grid
/// points occupy the small integers).
pub(crate) const STATS_STREAM_CONTEXT: u64 = 1 << 34;

/// Blocks simulated between stopping-rule checks. Fixing the batch size
/// makes the stop decision — and therefore every curve — independent of the
/// worker count.
const BLOCK_BATCH: u64 = 32;

/// The receiver under test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Receiver {
    /// One-shot linear detection.
    Linear(DetectorKind),
    /// Iterative decision feedback.
    Df(DfSchedule),
}

impl Receiver {
    pub fn label(&self) -> String {
        match self {
            Self::Linear(kind) => kind.label().to_string(),
            Self::Df(schedule) => schedule.label(),
        }
    }

    /// Number of detection passes (and output curves).
    pub fn iterations(&self) -> usize {
        match self {
            Self::Linear(_) => 1,
            Self::Df(s) => s.iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Linear(_) => Ok(()),
            Self::Df(s) => s.validate(),
        }
    }
}

/// Error-counting run controls.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    /// Keep simulating until the final-iteration aggregate has at least this
    /// many bit errors…
    pub min_errors: u64,
    /// …or this many blocks have been spent, whichever comes first. Points
    /// that exhaust the budget are flagged low-confidence.
    pub max_blocks: u64,
    pub power_control: PowerControl,
    /// Overrides the scenario seed when set.
    pub seed: Option<u64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            min_errors: 200,
            max_blocks: 1024,
            power_control: PowerControl::FixedSigma,
            seed: None,
        }
    }
}

fn random_bits(rng: &mut ChaCha8Rng, count: usize) -> Vec<u8> {
    (0..count).map(|_| (rng.next_u32() & 1) as u8).collect()
}

use rand::RngCore;

/// One frequency-domain noise sample per (subchannel, receive antenna), each
/// circularly symmetric with total variance `n0 * N`.
fn fd_noise(rng: &mut ChaCha8Rng, n: usize, n_r: usize, n0_times_n: f64) -> Vec<Vec<Complex64>> {
    let scale = (n0_times_n / 2.0).sqrt();
    (0..n)
        .map(|_| {
            (0..n_r)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re * scale, im * scale)
                })
                .collect()
        })
        .collect()
}

/// Transmitted payload and its frequency-domain symbol blocks.
struct TxBlock {
    bits: Vec<Vec<u8>>,
    fd: Vec<Vec<Complex64>>,
}

fn transmit(
    rng: &mut ChaCha8Rng,
    n: usize,
    schemes: &[QamScheme],
    amp: &[f64],
    plan: &Dft,
) -> Result<TxBlock> {
    let mut bits = Vec::with_capacity(schemes.len());
    let mut fd = Vec::with_capacity(schemes.len());
    for (j, &scheme) in schemes.iter().enumerate() {
        let payload = random_bits(rng, n * scheme.bits_per_symbol() as usize);
        let mut symbols = modem::map_bits(&payload, scheme)?;
        for s in &mut symbols {
            *s *= amp[j];
        }
        fd.push(plan.forward(&symbols)?);
        bits.push(payload);
    }
    Ok(TxBlock { bits, fd })
}

fn received(
    chan: &ChannelRealization,
    fd: &[Vec<Complex64>],
    noise: Vec<Vec<Complex64>>,
) -> Vec<Vec<Complex64>> {
    let (n, n_t, n_r) = (chan.n(), chan.n_t(), chan.n_r());
    let mut y = noise;
    for (k, y_k) in y.iter_mut().enumerate() {
        let h = chan.h_k(k);
        for (i, y_ki) in y_k.iter_mut().enumerate().take(n_r) {
            let mut acc = *y_ki;
            for j in 0..n_t {
                acc += h.at(i, j) * fd[j][k];
            }
            *y_ki = acc;
        }
    }
    debug_assert_eq!(y.len(), n);
    y
}

fn count_errors(tx: &[u8], rx: &[u8]) -> u64 {
    tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64
}

/// Per-block outcome: bit errors per receiver iteration per input.
struct BlockCount {
    errors: Vec<Vec<u64>>,
}

#[allow(clippy::too_many_arguments)]
fn simulate_block(
    cfg: &ScenarioConfig,
    receiver: &Receiver,
    point: &OperatingPoint,
    n0: f64,
    schemes: &[QamScheme],
    plan: &Dft,
    seed: u64,
    point_index: u64,
    block: u64,
) -> Result<BlockCount> {
    let mut bits_rng = rng::substream(seed, &[rng::domain::BITS, point_index, block]);
    let tx = transmit(&mut bits_rng, cfg.n, schemes, &point.amp, plan)?;

    let chan = channel::draw_rayleigh(
        &cfg.profile,
        cfg.n_t,
        cfg.n_r,
        cfg.n,
        &RealizationStream::new(seed, point_index, block),
    )?;

    let mut noise_rng = rng::substream(seed, &[rng::domain::NOISE, point_index, block]);
    let noise = fd_noise(&mut noise_rng, cfg.n, cfg.n_r, n0 * cfg.n as f64);
    let y = received(&chan, &tx.fd, noise);

    let p_sigma = cfg.p_sigma();
    let decisions: Vec<SymbolBlock> = match receiver {
        Receiver::Linear(kind) => {
            let set = detectors::build_detection_set(*kind, &chan, &point.noise.alpha)?;
            let fd_out = detectors::linear_detect(&set, &y)?;
            vec![detectors::decide(&set, &fd_out, schemes, &point.amp, p_sigma, 1)?]
        }
        Receiver::Df(schedule) => {
            detectors::iterative_df_detect(schedule, &chan, point, schemes, p_sigma, &y)?
        }
    };

    let errors = decisions
        .iter()
        .map(|block| {
            (0..cfg.n_t)
                .map(|j| {
                    let rx_bits =
                        modem::demap_block(&block.per_antenna[j], schemes[j], point.amp[j])?;
                    Ok(count_errors(&tx.bits[j], &rx_bits))
                })
                .collect::<Result<Vec<u64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockCount { errors })
}

/// Error-counting BER sweep. Returns one curve per receiver iteration
/// (a single curve for linear receivers), each holding one point per grid
/// value with counted errors, the bit total, and a per-block-variance
/// standard error.
pub fn run_mc(
    cfg: &ScenarioConfig,
    receiver: &Receiver,
    grid: &[f64],
    mc: &McConfig,
) -> Result<Vec<BerCurve>> {
    cfg.validate()?;
    receiver.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyInput { context: "Eb/N0 grid" });
    }
    if mc.max_blocks == 0 {
        return Err(Error::config("block budget must be positive"));
    }
    let seed = mc.seed.unwrap_or(cfg.seed);
    let schemes = cfg.schemes();
    let plan = Dft::get(cfg.n)?;
    let iterations = receiver.iterations();
    let bits_per_block_input: Vec<u64> = schemes
        .iter()
        .map(|s| (cfg.n * s.bits_per_symbol() as usize) as u64)
        .collect();
    let bits_per_block: u64 = bits_per_block_input.iter().sum();

    let mut per_iter_points: Vec<Vec<BerPoint>> = vec![Vec::with_capacity(grid.len()); iterations];
    for (pi, &x) in grid.iter().enumerate() {
        let point = scenario::sweep_point(cfg, x, mc.power_control)?;
        let n0 = point.noise.common_n0()?;

        let mut errors = vec![vec![0u64; cfg.n_t]; iterations];
        let mut agg_sum = vec![0.0f64; iterations];
        let mut agg_sq = vec![0.0f64; iterations];
        let mut done: u64 = 0;
        loop {
            let batch = BLOCK_BATCH.min(mc.max_blocks - done);
            let counts: Vec<Result<BlockCount>> = par::map_indexed(batch as usize, |i| {
                simulate_block(
                    cfg,
                    receiver,
                    &point,
                    n0,
                    &schemes,
                    &plan,
                    seed,
                    pi as u64,
                    done + i as u64,
                )
            });
            for count in counts {
                let count = count?;
                for (it, per_input) in count.errors.iter().enumerate() {
                    let block_errs: u64 = per_input.iter().sum();
                    let ber = block_errs as f64 / bits_per_block as f64;
                    agg_sum[it] += ber;
                    agg_sq[it] += ber * ber;
                    for (j, &e) in per_input.iter().enumerate() {
                        errors[it][j] += e;
                    }
                }
            }
            done += batch;
            let final_errors: u64 = errors[iterations - 1].iter().sum();
            if final_errors >= mc.min_errors || done >= mc.max_blocks {
                break;
            }
        }

        let blocks = done as f64;
        let total_bits = done * bits_per_block;
        for it in 0..iterations {
            let per_input: Vec<f64> = errors[it]
                .iter()
                .zip(&bits_per_block_input)
                .map(|(&e, &b)| e as f64 / (done * b) as f64)
                .collect();
            let iter_errors: u64 = errors[it].iter().sum();
            let mean = agg_sum[it] / blocks;
            let stderr = if done > 1 {
                let var = ((agg_sq[it] - blocks * mean * mean) / (blocks - 1.0)).max(0.0);
                (var / blocks).sqrt()
            } else {
                0.0
            };
            per_iter_points[it].push(BerPoint {
                x,
                per_input,
                aggregate: iter_errors as f64 / total_bits as f64,
                stderr,
                n: total_bits,
                errors: Some(iter_errors),
                low_confidence: iter_errors < mc.min_errors,
            });
        }
    }

    Ok(per_iter_points
        .into_iter()
        .enumerate()
        .map(|(it, points)| BerCurve {
            method: CurveMethod::MonteCarlo,
            detector: receiver.label(),
            scheme: cfg.uniform_scheme().map(|s| s.label().to_string()),
            x_axis: XAxis::Ebn0Db,
            points,
            seed,
            iteration: match receiver {
                Receiver::Linear(_) => None,
                Receiver::Df(_) => Some(it + 1),
            },
        })
        .collect())
}

/// Measured output statistics of one input after linear detection.
///
/// Powers are physical time-domain mean powers of each component of the
/// detector output; the closed-form [`SinrComponents`](crate::analysis::SinrComponents)
/// for the same realization equal these up to a common factor `σ_j²/N`, so
/// the SINRs match directly.
#[derive(Debug, Clone, Copy)]
pub struct MeasuredComponents {
    /// Least-squares estimate of the effective gain (expected: `γ_j`).
    pub gamma_hat: Complex64,
    pub signal: f64,
    pub isi: f64,
    pub mui: f64,
    pub noise: f64,
}

impl MeasuredComponents {
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

/// Measured statistics for every input, alongside the closed-form prediction
/// for the same channel realization.
#[derive(Debug, Clone)]
pub struct OutputStats {
    pub per_input: Vec<MeasuredComponents>,
    pub predicted: SinrReport,
    pub n_blocks: u64,
}

/// Splits the detector output on one fixed random channel into its signal,
/// self-interference, cross-stream, and noise components — measured, not
/// predicted — by driving `n_blocks` of random payloads and noise through
/// the chain and projecting each term separately.
pub fn measure_output_stats(
    cfg: &ScenarioConfig,
    kind: DetectorKind,
    ebn0_db: f64,
    pc: PowerControl,
    n_blocks: u64,
    seed: Option<u64>,
) -> Result<OutputStats> {
    cfg.validate()?;
    if n_blocks == 0 {
        return Err(Error::config("need at least one block"));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let point = scenario::sweep_point(cfg, ebn0_db, pc)?;
    let n0 = point.noise.common_n0()?;
    let schemes = cfg.schemes();
    let plan = Dft::get(cfg.n)?;
    let (n, n_t, n_r) = (cfg.n, cfg.n_t, cfg.n_r);

    let chan = channel::draw_rayleigh(
        &cfg.profile,
        n_t,
        n_r,
        n,
        &RealizationStream::new(seed, STATS_STREAM_CONTEXT, 0),
    )?;
    let set = detectors::build_detection_set(kind, &chan, &point.noise.alpha)?;
    let predicted = crate::analysis::sinr_linear(&set, &point.noise.alpha, &point.sigma2);

    let mut num = vec![Complex64::new(0.0, 0.0); n_t];
    let mut den = vec![0.0f64; n_t];
    let mut p_sig = vec![0.0f64; n_t];
    let mut p_isi = vec![0.0f64; n_t];
    let mut p_mui = vec![0.0f64; n_t];
    let mut p_noise = vec![0.0f64; n_t];

    for b in 0..n_blocks {
        let mut bits_rng = rng::substream(seed, &[rng::domain::BITS, STATS_STREAM_CONTEXT, b]);
        let tx = transmit(&mut bits_rng, n, &schemes, &point.amp, &plan)?;
        let mut noise_rng = rng::substream(seed, &[rng::domain::NOISE, STATS_STREAM_CONTEXT, b]);
        let noise = fd_noise(&mut noise_rng, n, n_r, n0 * n as f64);

        for k in 0..n {
            let gm = set.gamma_k(k);
            let d = set.d_k(k);
            for j in 0..n_t {
                let s_jk = tx.fd[j][k];
                let gamma_j = set.gamma()[j];
                let sig = gamma_j * s_jk;
                let isi = (gm.at(j, j) - gamma_j) * s_jk;
                let mut mui = Complex64::new(0.0, 0.0);
                for l in 0..n_t {
                    if l != j {
                        mui += gm.at(j, l) * tx.fd[l][k];
                    }
                }
                let mut noi = Complex64::new(0.0, 0.0);
                for i in 0..n_r {
                    noi += d.at(j, i) * noise[k][i];
                }
                let total = sig + isi + mui + noi;
                num[j] += total * s_jk.conj();
                den[j] += s_jk.norm_sqr();
                p_sig[j] += sig.norm_sqr();
                p_isi[j] += isi.norm_sqr();
                p_mui[j] += mui.norm_sqr();
                p_noise[j] += noi.norm_sqr();
            }
        }
    }

    // Time-domain mean power of a component is (1/N) Σ_n |x[n]|², i.e.
    // (1/N²) Σ_k |X_k|² per block.
    let scale = 1.0 / (n_blocks as f64 * (n * n) as f64);
    let per_input = (0..n_t)
        .map(|j| MeasuredComponents {
            gamma_hat: num[j] / den[j],
            signal: p_sig[j] * scale,
            isi: p_isi[j] * scale,
            mui: p_mui[j] * scale,
            noise: p_noise[j] * scale,
        })
        .collect();

    Ok(OutputStats { per_input, predicted, n_blocks })
}
