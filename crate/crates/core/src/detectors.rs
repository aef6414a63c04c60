//! Frequency-domain detection: the per-subchannel detection matrices, the
//! linear detector output and its exact decomposition, and the iterative
//! decision-feedback receiver.
//!
//! For every subchannel `k` the detector applies `D_k = B_k H_k^H` to the
//! received vector, where `B_k` selects the family:
//!
//! - matched filter: `B_k = I`;
//! - exact MMSE: `B_k = A_k⁻¹` with `A_k = H_k^H H_k + diag(α)`;
//! - simplified MMSE: the inversion-free one-term approximation
//!   `B_k = (diag A_k)⁻¹ [I − (A_k − diag A_k)(diag A_k)⁻¹]`, i.e.
//!   `B_jj = 1/A_jj` and `B_jl = −A_jl/(A_jj A_ll)` off the diagonal.
//!
//! With `Γ_k = D_k H_k` and the per-input average gain
//! `γ_j = (1/N) Σ_k Γ_k^{(j,j)}`, the detector output splits exactly into
//! signal, residual ISI, multi-stream interference, and filtered noise:
//! `Ỹ_k = γ S_k + (Γ_k − γ) S_k + D_k N_k`. The decision-feedback receiver
//! re-adds an estimate of the middle term built from the previous iteration's
//! hard decisions: `Ỹ'_k(p) = Ỹ_k(p) + [γ(p) − Γ_k(p)] Ŝ_k(p−1)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::modem;
use crate::numerics::{self, Dft, Mat};
use crate::scenario::{OperatingPoint, QamScheme};
use crate::{Error, Result};

/// Relative threshold under which a per-input gain counts as degenerate:
/// decisions would divide by (nearly) zero. Scaled by `N_R · P_Σ`, the
/// natural magnitude of a matched-filter gain.
pub const DEGENERATE_GAIN_FACTOR: f64 = 1e-12;

/// Linear detection family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Mf,
    ExactMmse,
    SimplifiedMmse,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] =
        [DetectorKind::Mf, DetectorKind::ExactMmse, DetectorKind::SimplifiedMmse];

    pub fn label(self) -> &'static str {
        match self {
            Self::Mf => "mf",
            Self::ExactMmse => "exact_mmse",
            Self::SimplifiedMmse => "simplified_mmse",
        }
    }

    /// Whether the detector can run inside decision-feedback iterations 2..P
    /// (only inversion-free detectors are allowed there).
    pub fn is_inversion_free(self) -> bool {
        !matches!(self, Self::ExactMmse)
    }
}

/// Iterative decision-feedback schedule: which detector runs first, which
/// runs in the remaining iterations, and how many iterations in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfSchedule {
    pub first: DetectorKind,
    pub rest: DetectorKind,
    pub iterations: usize,
}

impl Default for DfSchedule {
    fn default() -> Self {
        Self { first: DetectorKind::SimplifiedMmse, rest: DetectorKind::Mf, iterations: 4 }
    }
}

impl DfSchedule {
    pub fn new(first: DetectorKind, rest: DetectorKind, iterations: usize) -> Result<Self> {
        let s = Self { first, rest, iterations };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::config("decision feedback needs at least one iteration"));
        }
        if !self.rest.is_inversion_free() {
            return Err(Error::config(format!(
                "iterations beyond the first must use an inversion-free detector, got {}",
                self.rest.label()
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("df_{}_then_{}_p{}", self.first.label(), self.rest.label(), self.iterations)
    }
}

/// Hard-decision symbols for one block, per transmit antenna, at transmit
/// scale (amplitude factors applied).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock {
    pub per_antenna: Vec<Vec<Complex64>>,
}

/// The per-subchannel detection matrices of one channel realization, with the
/// derived quantities detection and analysis need.
#[derive(Debug, Clone)]
pub struct DetectionMatrixSet {
    kind: DetectorKind,
    n: usize,
    n_t: usize,
    n_r: usize,
    /// `D_k`, shape `N_T x N_R`.
    d: Vec<Mat>,
    /// `Γ_k = D_k H_k`, shape `N_T x N_T`.
    gamma_k: Vec<Mat>,
    /// Per-input average gain `γ_j = (1/N) Σ_k Γ_k^{(j,j)}`.
    gamma: Vec<Complex64>,
}

impl DetectionMatrixSet {
    pub fn kind(&self) -> DetectorKind {
        self.kind
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

    pub fn d_k(&self, k: usize) -> &Mat {
        &self.d[k]
    }

    pub fn gamma_k(&self, k: usize) -> &Mat {
        &self.gamma_k[k]
    }

    /// Per-input average gains `γ_j`.
    pub fn gamma(&self) -> &[Complex64] {
        &self.gamma
    }
}

fn check_alpha(alpha: &[f64], n_t: usize) -> Result<()> {
    if alpha.len() != n_t {
        return Err(Error::DimensionMismatch {
            context: format!("{} regularization entries for NT = {n_t}", alpha.len()),
        });
    }
    for (j, &a) in alpha.iter().enumerate() {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::config(format!("alpha[{j}] must be finite and nonnegative, got {a}")));
        }
    }
    Ok(())
}

/// Builds `B_k` from the system matrix `A_k = G_k + diag(α)`.
fn b_from_a(kind: DetectorKind, a: &Mat) -> Result<Mat> {
    let n_t = a.rows();
    match kind {
        DetectorKind::Mf => Ok(Mat::identity(n_t)),
        DetectorKind::ExactMmse => a.invert_hermitian(),
        DetectorKind::SimplifiedMmse => {
            let mut diag = Vec::with_capacity(n_t);
            for j in 0..n_t {
                let d = a.at(j, j).re;
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::NotPositiveDefinite { pivot: j });
                }
                diag.push(d);
            }
            let mut b = Mat::zeros(n_t, n_t);
            for j in 0..n_t {
                for l in 0..n_t {
                    if j == l {
                        b.set(j, j, Complex64::new(1.0 / diag[j], 0.0));
                    } else {
                        b.set(j, l, -a.at(j, l) / (diag[j] * diag[l]));
                    }
                }
            }
            Ok(b)
        }
    }
}

/// Builds the shaping matrix `B_k` for one subchannel from its channel
/// matrix: identity for the matched filter, the exact or approximate inverse
/// of `H_k^H H_k + diag(α)` for the MMSE flavors.
pub fn build_b(kind: DetectorKind, h_k: &Mat, alpha: &[f64]) -> Result<Mat> {
    check_alpha(alpha, h_k.cols())?;
    match kind {
        DetectorKind::Mf => Ok(Mat::identity(h_k.cols())),
        _ => b_from_a(kind, &h_k.gram().add_diag(alpha)?),
    }
}

fn wrap_singular(e: Error, k: usize) -> Error {
    match e {
        Error::NotPositiveDefinite { pivot } => Error::SingularSubchannel { subchannel: k, pivot },
        other => other,
    }
}

/// Builds the full detection matrix set for one realization under perfect
/// channel knowledge: `D_k = B_k H_k^H`, `Γ_k = D_k H_k`, and the average
/// gains `γ`. A subchannel whose system matrix cannot be inverted is reported
/// by index.
pub fn build_detection_set(
    kind: DetectorKind,
    realization: &ChannelRealization,
    alpha: &[f64],
) -> Result<DetectionMatrixSet> {
    let (n, n_t, n_r) = (realization.n(), realization.n_t(), realization.n_r());
    check_alpha(alpha, n_t)?;
    let mut d = Vec::with_capacity(n);
    let mut gamma_k = Vec::with_capacity(n);
    let mut gamma_sum = vec![Complex64::new(0.0, 0.0); n_t];
    for k in 0..n {
        let h = realization.h_k(k);
        let hh = h.hermitian_transpose();
        let g = h.gram();
        let (d_k, gm_k) = match kind {
            DetectorKind::Mf => (hh, g),
            _ => {
                let a = g.add_diag(alpha)?;
                let b = b_from_a(kind, &a).map_err(|e| wrap_singular(e, k))?;
                let d_k = b.mul(&hh)?;
                let gm_k = b.mul(&g)?;
                (d_k, gm_k)
            }
        };
        for (j, acc) in gamma_sum.iter_mut().enumerate() {
            *acc += gm_k.at(j, j);
        }
        d.push(d_k);
        gamma_k.push(gm_k);
    }
    let scale = 1.0 / n as f64;
    let gamma = gamma_sum.into_iter().map(|s| s * scale).collect();
    Ok(DetectionMatrixSet { kind, n, n_t, n_r, d, gamma_k, gamma })
}

/// Applies the detection matrices to one block of received subchannel
/// vectors (`y[k]` has `N_R` entries), returning per-antenna frequency-domain
/// outputs `out[j][k] = (D_k y_k)_j`.
pub fn linear_detect(
    set: &DetectionMatrixSet,
    y: &[Vec<Complex64>],
) -> Result<Vec<Vec<Complex64>>> {
    if y.len() != set.n {
        return Err(Error::DimensionMismatch {
            context: format!("{} received vectors for N = {}", y.len(), set.n),
        });
    }
    let mut out = vec![vec![Complex64::new(0.0, 0.0); set.n]; set.n_t];
    for (k, y_k) in y.iter().enumerate() {
        let v = set.d[k].mul_vec(y_k)?;
        for (j, val) in v.into_iter().enumerate() {
            out[j][k] = val;
        }
    }
    Ok(out)
}

/// Converts frequency-domain detector outputs into hard decisions: inverse
/// DFT per antenna, normalization by the (gain × amplitude) scale, nearest-
/// point slicing, and rescaling back to transmit scale.
///
/// `p_sigma` sets the degenerate-gain threshold; `iteration` is only used to
/// report which decision-feedback pass hit a degenerate gain.
pub fn decide(
    set: &DetectionMatrixSet,
    fd_out: &[Vec<Complex64>],
    schemes: &[QamScheme],
    amp: &[f64],
    p_sigma: f64,
    iteration: usize,
) -> Result<SymbolBlock> {
    let threshold = DEGENERATE_GAIN_FACTOR * set.n_r as f64 * p_sigma;
    let plan = Dft::get(set.n)?;
    let mut per_antenna = Vec::with_capacity(set.n_t);
    for j in 0..set.n_t {
        let g = set.gamma[j];
        if g.norm() < threshold {
            return Err(Error::DegenerateGain {
                input: j,
                iteration,
                magnitude: g.norm(),
                threshold,
            });
        }
        let time = plan.inverse(&fd_out[j])?;
        let scale = g * amp[j];
        let decided: Vec<Complex64> = time
            .iter()
            .map(|&v| modem::slice(v / scale, schemes[j]) * amp[j])
            .collect();
        per_antenna.push(decided);
    }
    Ok(SymbolBlock { per_antenna })
}

/// One decision-feedback refinement: adds the interference correction
/// `[γ − Γ_k] Ŝ_k` built from the previous iteration's decisions to this
/// iteration's linear output. With perfect feedback the result is exactly
/// `γ S_k` plus filtered noise.
pub fn df_refine(
    set: &DetectionMatrixSet,
    fd_out: &[Vec<Complex64>],
    feedback: &SymbolBlock,
) -> Result<Vec<Vec<Complex64>>> {
    if feedback.per_antenna.len() != set.n_t {
        return Err(Error::DimensionMismatch {
            context: format!(
                "feedback covers {} antennas, set has {}",
                feedback.per_antenna.len(),
                set.n_t
            ),
        });
    }
    let plan = Dft::get(set.n)?;
    let s_hat_fd: Vec<Vec<Complex64>> = feedback
        .per_antenna
        .iter()
        .map(|s| plan.forward(s))
        .collect::<Result<_>>()?;
    let mut out = vec![vec![Complex64::new(0.0, 0.0); set.n]; set.n_t];
    for k in 0..set.n {
        let gm = &set.gamma_k[k];
        for j in 0..set.n_t {
            let mut v = fd_out[j][k] + set.gamma[j] * s_hat_fd[j][k];
            for l in 0..set.n_t {
                v -= gm.at(j, l) * s_hat_fd[l][k];
            }
            out[j][k] = v;
        }
    }
    Ok(out)
}

/// Runs the full iterative decision-feedback receiver on one received block,
/// returning the hard decisions of every iteration (so convergence can be
/// observed per pass).
pub fn iterative_df_detect(
    schedule: &DfSchedule,
    realization: &ChannelRealization,
    point: &OperatingPoint,
    schemes: &[QamScheme],
    p_sigma: f64,
    y: &[Vec<Complex64>],
) -> Result<Vec<SymbolBlock>> {
    schedule.validate()?;
    let alpha = &point.noise.alpha;
    let set_first = build_detection_set(schedule.first, realization, alpha)?;
    let fd_first = linear_detect(&set_first, y)?;
    let mut blocks = Vec::with_capacity(schedule.iterations);
    blocks.push(decide(&set_first, &fd_first, schemes, &point.amp, p_sigma, 1)?);

    if schedule.iterations > 1 {
        let set_rest;
        let (set_p, fd_p) = if schedule.rest == schedule.first {
            (&set_first, fd_first)
        } else {
            set_rest = build_detection_set(schedule.rest, realization, alpha)?;
            let fd = linear_detect(&set_rest, y)?;
            (&set_rest, fd)
        };
        for p in 2..=schedule.iterations {
            let refined = df_refine(set_p, &fd_p, blocks.last().unwrap())?;
            blocks.push(decide(set_p, &refined, schemes, &point.amp, p_sigma, p)?);
        }
    }
    Ok(blocks)
}

/// Streaming per-realization gains for the semi-analytical engine: everything
/// the SINR decomposition needs, accumulated over subchannels without storing
/// any per-`k` matrices.
#[derive(Debug, Clone)]
pub(crate) struct GainSet {
    pub n: usize,
    pub n_t: usize,
    /// `γ_j`.
    pub gamma: Vec<Complex64>,
    /// `Σ_k |Γ_k^{(j,l)}|²`, indexed `j * n_t + l`.
    pub cross_power: Vec<f64>,
    /// `Σ_k Σ_i |D_k^{(j,i)}|²`, computed as `Σ_k [Γ_k B_k^H]_{jj}` (the two
    /// agree because `D D^H = B G B^H = Γ B^H`).
    pub noise_quad: Vec<f64>,
}

/// Builds the streaming gains from per-subchannel Gram matrices
/// `G_k = H_k^H H_k`.
pub(crate) fn build_gain_set(
    kind: DetectorKind,
    gram: &[Mat],
    alpha: &[f64],
) -> Result<GainSet> {
    let n = gram.len();
    if n == 0 {
        return Err(Error::EmptyInput { context: "gram matrices" });
    }
    let n_t = gram[0].rows();
    check_alpha(alpha, n_t)?;
    let mut gamma_sum = vec![Complex64::new(0.0, 0.0); n_t];
    let mut cross_power = vec![0.0f64; n_t * n_t];
    let mut noise_quad = vec![0.0f64; n_t];
    for (k, g) in gram.iter().enumerate() {
        let gm_k;
        let b_k;
        match kind {
            DetectorKind::Mf => {
                gm_k = g.clone();
                b_k = None;
            }
            _ => {
                let a = g.add_diag(alpha)?;
                let b = b_from_a(kind, &a).map_err(|e| wrap_singular(e, k))?;
                gm_k = b.mul(g)?;
                b_k = Some(b);
            }
        }
        for j in 0..n_t {
            gamma_sum[j] += gm_k.at(j, j);
            for l in 0..n_t {
                cross_power[j * n_t + l] += gm_k.at(j, l).norm_sqr();
            }
            noise_quad[j] += match &b_k {
                // MF: [Γ I]_jj = G_jj, real by construction.
                None => gm_k.at(j, j).re,
                Some(b) => (0..n_t).map(|i| (gm_k.at(j, i) * b.at(j, i).conj()).re).sum(),
            };
        }
    }
    let scale = 1.0 / n as f64;
    let gamma = gamma_sum.into_iter().map(|s| s * scale).collect();
    Ok(GainSet { n, n_t, gamma, cross_power, noise_quad })
}

/// Gram matrices `G_k = H_k^H H_k` restricted to the first `rows` receive
/// antennas, for all subchannels.
pub(crate) fn gram_set(realization: &ChannelRealization, rows: usize) -> Vec<Mat> {
    let mut grams = vec![Mat::zeros(realization.n_t(), realization.n_t()); realization.n()];
    extend_gram_set(&mut grams, realization, 0, rows);
    grams
}

/// Extends row-prefix Gram matrices in place with receive rows
/// `from..to` — the incremental step of an antenna-count sweep.
pub(crate) fn extend_gram_set(
    grams: &mut [Mat],
    realization: &ChannelRealization,
    from: usize,
    to: usize,
) {
    for (k, g) in grams.iter_mut().enumerate() {
        let h = realization.h_k(k);
        numerics::accumulate_gram(g, (from..to).map(|r| h.row(r)));
    }
}
