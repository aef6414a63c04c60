//! Browser bindings: a thin JSON facade over the simulator core for the
//! static demo page in `www/`.
//!
//! Three operations are exported, each taking a JSON request string and
//! returning a JSON response string (`{"error": "..."}` on bad input — no
//! exceptions cross the boundary):
//!
//! - [`linear_ber`]: semi-analytical BER curves for a set of linear
//!   detectors over an Eb/N0 grid, with the single-input reference bound.
//! - [`floor_sweep`]: irreducible-BER floors versus receive-antenna count.
//! - [`feedback_block`]: one simulated block through the iterative
//!   decision-feedback receiver, returning the pre-decision soft values per
//!   iteration for a constellation scatter plot.
//!
//! Everything is deterministic in the request seed. The block length is
//! fixed at N = 256 with a 64-sample cyclic prefix and the 64-tap linearly
//! decaying power profile — the demo varies the quantities worth exploring
//! interactively (array sizes, constellations, detectors, operating point).

use num_complex::Complex64;
use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use scfde::analysis::{
    iber_ensemble, semi_analytical_ber, simo_awgn_mfb, BerMode, IberOptions, SaOptions,
};
use scfde::channel::{draw_rayleigh, PowerDelayProfile};
use scfde::detectors::{
    build_detection_set, decide, df_refine, linear_detect, DetectorKind, SymbolBlock,
};
use scfde::modem;
use scfde::numerics::Dft;
use scfde::rng::{substream, RealizationStream};
use scfde::scenario::{sweep_point, PowerControl, QamScheme, ScenarioConfig};

const BLOCK_N: usize = 256;
const PREFIX_LS: usize = 64;
const TAPS: usize = 64;

/// Hard ceilings so a mistyped request cannot hang the browser tab.
const MAX_INPUTS: usize = 32;
const MAX_ANTENNAS: usize = 256;
const MAX_REALIZATIONS: usize = 2000;
const MAX_GRID: usize = 81;

fn fail(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn profile() -> PowerDelayProfile {
    PowerDelayProfile::LinearDecay { taps: TAPS }
}

fn scheme_from(points: u64) -> Result<QamScheme, String> {
    QamScheme::try_from(points).map_err(|e| e.to_string())
}

fn check_array(n_t: usize, n_r: usize) -> Result<(), String> {
    if n_t == 0 || n_t > MAX_INPUTS {
        return Err(format!("inputs must be in 1..={MAX_INPUTS}"));
    }
    if n_r < n_t || n_r > MAX_ANTENNAS {
        return Err(format!("receive antennas must be in {n_t}..={MAX_ANTENNAS}"));
    }
    Ok(())
}

fn default_detectors() -> Vec<DetectorKind> {
    DetectorKind::ALL.to_vec()
}

fn default_qam() -> u64 {
    4
}

fn default_seed() -> u64 {
    1
}

// ---------------------------------------------------------------------------
// Semi-analytical BER curves.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveRequest {
    n_t: usize,
    n_r: usize,
    #[serde(default = "default_qam")]
    qam: u64,
    #[serde(default = "default_detectors")]
    detectors: Vec<DetectorKind>,
    ebn0_start: f64,
    ebn0_stop: f64,
    #[serde(default = "CurveRequest::default_step")]
    ebn0_step: f64,
    #[serde(default = "CurveRequest::default_realizations")]
    realizations: usize,
    #[serde(default = "default_seed")]
    seed: u64,
}

impl CurveRequest {
    fn default_step() -> f64 {
        1.0
    }
    fn default_realizations() -> usize {
        50
    }
}

fn linear_ber_impl(request: &str) -> Result<String, String> {
    let req: CurveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    check_array(req.n_t, req.n_r)?;
    let scheme = scheme_from(req.qam)?;
    if req.detectors.is_empty() {
        return Err("pick at least one detector".into());
    }
    if !(req.ebn0_step > 0.0) || req.ebn0_stop < req.ebn0_start {
        return Err("need ebn0_start <= ebn0_stop and a positive step".into());
    }
    let points = ((req.ebn0_stop - req.ebn0_start) / req.ebn0_step).round() as usize + 1;
    if points > MAX_GRID {
        return Err(format!("grid capped at {MAX_GRID} points, got {points}"));
    }
    if req.realizations == 0 || req.realizations > MAX_REALIZATIONS {
        return Err(format!("realizations must be in 1..={MAX_REALIZATIONS}"));
    }

    let grid: Vec<f64> = (0..points).map(|i| req.ebn0_start + i as f64 * req.ebn0_step).collect();
    let cfg =
        ScenarioConfig::uniform(BLOCK_N, PREFIX_LS, req.n_t, req.n_r, scheme, profile(), req.seed);
    let opts = SaOptions { n_realizations: req.realizations, ..SaOptions::default() };

    let mut curves = Vec::with_capacity(req.detectors.len());
    for &kind in &req.detectors {
        let curve = semi_analytical_ber(&cfg, kind, &grid, &opts).map_err(|e| e.to_string())?;
        let ber: Vec<f64> = curve.points.iter().map(|p| p.aggregate).collect();
        curves.push(json!({ "detector": kind.label(), "ber": ber }));
    }
    let bound: Vec<f64> = grid
        .iter()
        .map(|&e| simo_awgn_mfb(scheme, req.n_r, cfg.eta(), e, BerMode::Exact))
        .collect();
    Ok(json!({
        "ebn0_db": grid,
        "qam": req.qam,
        "curves": curves,
        "bound": bound,
    })
    .to_string())
}

/// Semi-analytical BER versus Eb/N0 for a set of linear detectors, plus the
/// single-input matched-filter bound. JSON in, JSON out.
#[wasm_bindgen]
pub fn linear_ber(request: &str) -> String {
    linear_ber_impl(request).unwrap_or_else(fail)
}

// ---------------------------------------------------------------------------
// Irreducible-BER floors versus antenna count.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FloorRequest {
    n_t: usize,
    #[serde(default = "default_qam")]
    qam: u64,
    #[serde(default = "default_detectors")]
    detectors: Vec<DetectorKind>,
    n_r: Vec<usize>,
    #[serde(default = "FloorRequest::default_realizations")]
    realizations: usize,
    #[serde(default = "default_seed")]
    seed: u64,
}

impl FloorRequest {
    fn default_realizations() -> usize {
        300
    }
}

fn floor_sweep_impl(request: &str) -> Result<String, String> {
    let req: FloorRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let scheme = scheme_from(req.qam)?;
    let n_r_max = *req.n_r.last().ok_or("need at least one antenna count")?;
    check_array(req.n_t, n_r_max)?;
    if req.detectors.is_empty() {
        return Err("pick at least one detector".into());
    }
    if req.realizations == 0 || req.realizations > MAX_REALIZATIONS {
        return Err(format!("realizations must be in 1..={MAX_REALIZATIONS}"));
    }
    let cfg =
        ScenarioConfig::uniform(BLOCK_N, PREFIX_LS, req.n_t, n_r_max, scheme, profile(), req.seed);
    let opts = IberOptions { n_realizations: req.realizations, ..IberOptions::default() };
    let curves = iber_ensemble(&cfg, &req.detectors, &[scheme], &req.n_r, &opts)
        .map_err(|e| e.to_string())?;
    let out: Vec<_> = curves
        .iter()
        .map(|c| {
            let iber: Vec<f64> = c.points.iter().map(|p| p.aggregate).collect();
            json!({ "detector": c.detector.as_str(), "iber": iber })
        })
        .collect();
    Ok(json!({ "n_r": req.n_r, "qam": req.qam, "curves": out }).to_string())
}

/// Noise-free error floors versus receive-antenna count for a set of linear
/// detectors. JSON in, JSON out.
#[wasm_bindgen]
pub fn floor_sweep(request: &str) -> String {
    floor_sweep_impl(request).unwrap_or_else(fail)
}

// ---------------------------------------------------------------------------
// One decision-feedback block, with pre-decision soft values per iteration.
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockRequest {
    n_t: usize,
    n_r: usize,
    #[serde(default = "default_qam")]
    qam: u64,
    ebn0_db: f64,
    #[serde(default = "BlockRequest::default_first")]
    first: DetectorKind,
    #[serde(default = "BlockRequest::default_rest")]
    rest: DetectorKind,
    #[serde(default = "BlockRequest::default_iterations")]
    iterations: usize,
    /// Which input's soft values to return.
    #[serde(default)]
    input: usize,
    #[serde(default = "default_seed")]
    seed: u64,
}

impl BlockRequest {
    fn default_first() -> DetectorKind {
        DetectorKind::SimplifiedMmse
    }
    fn default_rest() -> DetectorKind {
        DetectorKind::Mf
    }
    fn default_iterations() -> usize {
        4
    }
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box–Muller on two uniform draws; u1 kept away from zero.
    let u1 = 1.0 - (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}

/// Normalized time-domain detector output for every input: the values the
/// slicer sees, on the transmit lattice scale.
fn soft_values(
    plan: &Dft,
    fd: &[Vec<Complex64>],
    gamma: &[Complex64],
    amp: &[f64],
) -> Result<Vec<Vec<Complex64>>, String> {
    fd.iter()
        .enumerate()
        .map(|(j, row)| {
            let time = plan.inverse(row).map_err(|e| e.to_string())?;
            let scale = gamma[j] * amp[j];
            Ok(time.into_iter().map(|v| v / scale).collect())
        })
        .collect()
}

fn count_bit_errors(
    decided: &SymbolBlock,
    bits: &[Vec<u8>],
    scheme: QamScheme,
    amp: &[f64],
) -> Result<u64, String> {
    let mut errors = 0u64;
    for (j, antenna) in decided.per_antenna.iter().enumerate() {
        let back = modem::demap_block(antenna, scheme, amp[j]).map_err(|e| e.to_string())?;
        errors += back.iter().zip(&bits[j]).filter(|(a, b)| a != b).count() as u64;
    }
    Ok(errors)
}

fn feedback_block_impl(request: &str) -> Result<String, String> {
    let req: BlockRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    check_array(req.n_t, req.n_r)?;
    let scheme = scheme_from(req.qam)?;
    if req.iterations == 0 || req.iterations > 16 {
        return Err("iterations must be in 1..=16".into());
    }
    if req.iterations > 1 && !req.rest.is_inversion_free() {
        return Err("feedback iterations only take inversion-free detectors (mf, simplified_mmse)".into());
    }
    if req.input >= req.n_t {
        return Err(format!("input must be below {}", req.n_t));
    }

    let cfg =
        ScenarioConfig::uniform(BLOCK_N, PREFIX_LS, req.n_t, req.n_r, scheme, profile(), req.seed);
    let point = sweep_point(&cfg, req.ebn0_db, PowerControl::FixedSigma)
        .map_err(|e| e.to_string())?;
    let n0 = point.noise.common_n0().map_err(|e| e.to_string())?;
    let schemes = cfg.schemes();
    let plan = Dft::get(BLOCK_N).map_err(|e| e.to_string())?;

    // One block: bits, symbols, channel, received frequency-domain vectors.
    let real = draw_rayleigh(
        &cfg.profile,
        req.n_t,
        req.n_r,
        BLOCK_N,
        &RealizationStream::new(req.seed, 0xDE40, 0),
    )
    .map_err(|e| e.to_string())?;
    let mut bit_rng = substream(req.seed, &[0xDE41]);
    let bits: Vec<Vec<u8>> = (0..req.n_t)
        .map(|_| {
            (0..BLOCK_N * scheme.bits_per_symbol() as usize)
                .map(|_| (bit_rng.next_u32() & 1) as u8)
                .collect()
        })
        .collect();
    let tx: Vec<Vec<Complex64>> = bits
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let s = modem::map_bits(b, scheme).map_err(|e| e.to_string())?;
            Ok(s.into_iter().map(|v| v * point.amp[j]).collect::<Vec<_>>())
        })
        .collect::<Result<_, String>>()?;
    let fd_tx: Vec<Vec<Complex64>> = tx
        .iter()
        .map(|s| plan.forward(s).map_err(|e| e.to_string()))
        .collect::<Result<_, String>>()?;

    let mut noise_rng = substream(req.seed, &[0xDE42]);
    let noise_scale = (n0 * BLOCK_N as f64 / 2.0).sqrt();
    let y: Vec<Vec<Complex64>> = (0..BLOCK_N)
        .map(|k| {
            let s_k: Vec<Complex64> = (0..req.n_t).map(|j| fd_tx[j][k]).collect();
            let mut v = real.h_k(k).mul_vec(&s_k).map_err(|e| e.to_string())?;
            for vi in v.iter_mut() {
                let (re, im) = gaussian_pair(&mut noise_rng);
                *vi += Complex64::new(noise_scale * re, noise_scale * im);
            }
            Ok(v)
        })
        .collect::<Result<_, String>>()?;

    // The iterative receiver, kept open so each iteration's pre-decision
    // values can be captured.
    let alpha = &point.noise.alpha;
    let p_sigma = cfg.p_sigma();
    let set_first =
        build_detection_set(req.first, &real, alpha).map_err(|e| e.to_string())?;
    let fd_first = linear_detect(&set_first, &y).map_err(|e| e.to_string())?;

    let mut iterations = Vec::with_capacity(req.iterations);
    let mut capture = |soft: &[Vec<Complex64>], errors: u64| {
        let z = &soft[req.input];
        iterations.push(json!({
            "soft_re": z.iter().map(|v| v.re).collect::<Vec<f64>>(),
            "soft_im": z.iter().map(|v| v.im).collect::<Vec<f64>>(),
            "errors": errors,
        }));
    };

    let soft = soft_values(&plan, &fd_first, set_first.gamma(), &point.amp)?;
    let mut decisions = decide(&set_first, &fd_first, &schemes, &point.amp, p_sigma, 1)
        .map_err(|e| e.to_string())?;
    capture(&soft, count_bit_errors(&decisions, &bits, scheme, &point.amp)?);

    if req.iterations > 1 {
        let set_rest;
        let (set, fd) = if req.rest == req.first {
            (&set_first, fd_first)
        } else {
            set_rest = build_detection_set(req.rest, &real, alpha).map_err(|e| e.to_string())?;
            let fd = linear_detect(&set_rest, &y).map_err(|e| e.to_string())?;
            (&set_rest, fd)
        };
        for p in 2..=req.iterations {
            let refined = df_refine(set, &fd, &decisions).map_err(|e| e.to_string())?;
            let soft = soft_values(&plan, &refined, set.gamma(), &point.amp)?;
            decisions = decide(set, &refined, &schemes, &point.amp, p_sigma, p)
                .map_err(|e| e.to_string())?;
            capture(&soft, count_bit_errors(&decisions, &bits, scheme, &point.amp)?);
        }
    }

    let levels = modem::axis_levels(scheme);
    let tx_j: Vec<Complex64> =
        tx[req.input].iter().map(|v| v / point.amp[req.input]).collect();
    Ok(json!({
        "n": BLOCK_N,
        "qam": req.qam,
        "total_bits": req.n_t * BLOCK_N * scheme.bits_per_symbol() as usize,
        "levels": levels,
        "tx_re": tx_j.iter().map(|v| v.re).collect::<Vec<f64>>(),
        "tx_im": tx_j.iter().map(|v| v.im).collect::<Vec<f64>>(),
        "iterations": iterations,
    })
    .to_string())
}

/// Simulates one received block through the iterative decision-feedback
/// receiver and returns each iteration's normalized soft values for one
/// input, with per-iteration bit-error counts over all inputs. JSON in,
/// JSON out.
#[wasm_bindgen]
pub fn feedback_block(request: &str) -> String {
    feedback_block_impl(request).unwrap_or_else(fail)
}
