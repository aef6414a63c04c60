//! System parameters and energy accounting.
//!
//! The quantities that tie the whole simulator together live here: block
//! length `N` and cyclic-prefix length `L_s` (hence the efficiency factor
//! `η = N/(N+L_s)`), the per-input QAM schemes and symbol powers, and the
//! mapping from a target Eb/N0 to the noise spectral density `N₀` and the
//! per-input regularization `α^(j) = N₀/σ_j²`.
//!
//! The bit-energy convention: input `j` transmitting at symbol power `σ_j²`
//! over a channel with total tap power `P_Σ` delivers `E_b = σ_j² P_Σ /
//! (2 η m_j)` per bit, where `m_j` is the scheme's bits per dimension. All
//! Eb/N0 conversions invert that relation.

use serde::{Deserialize, Serialize};

use crate::channel::PowerDelayProfile;
use crate::{Error, Result};

/// Square Gray-mapped QAM constellation.
///
/// Identified by `m`, the bits per dimension: each axis carries `M = 2^m`
/// amplitude levels `±1, ±3, …, ±(M−1)`, for `M²` points and `2m` bits per
/// symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub enum QamScheme {
    Qam4,
    Qam16,
    Qam64,
}

impl QamScheme {
    pub const ALL: [QamScheme; 3] = [QamScheme::Qam4, QamScheme::Qam16, QamScheme::Qam64];

    /// Bits per dimension (`m`).
    pub fn m(self) -> u32 {
        match self {
            Self::Qam4 => 1,
            Self::Qam16 => 2,
            Self::Qam64 => 3,
        }
    }

    /// Amplitude levels per dimension (`M = 2^m`).
    pub fn levels(self) -> u32 {
        1 << self.m()
    }

    /// Constellation size `M²`.
    pub fn points(self) -> u32 {
        self.levels() * self.levels()
    }

    pub fn bits_per_symbol(self) -> u32 {
        2 * self.m()
    }

    /// Mean symbol power of the unnormalized lattice (`±1` levels): 2, 10, 42.
    ///
    /// Per axis the mean of the squared levels is `(M²−1)/3`; both axes add.
    pub fn lattice_power(self) -> f64 {
        let m2 = (self.levels() * self.levels()) as f64;
        2.0 * (m2 - 1.0) / 3.0
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Qam4 => "4-QAM",
            Self::Qam16 => "16-QAM",
            Self::Qam64 => "64-QAM",
        }
    }
}

impl TryFrom<u64> for QamScheme {
    type Error = Error;
    fn try_from(points: u64) -> Result<Self> {
        match points {
            4 => Ok(Self::Qam4),
            16 => Ok(Self::Qam16),
            64 => Ok(Self::Qam64),
            other => Err(Error::config(format!("unsupported constellation size {other} (use 4, 16 or 64)"))),
        }
    }
}

impl From<QamScheme> for u64 {
    fn from(s: QamScheme) -> u64 {
        s.points() as u64
    }
}

/// One transmit antenna's scheme and average symbol power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    pub qam: QamScheme,
    /// Average symbol power `σ_s²`. Defaults to the scheme's unnormalized
    /// lattice power so that symbols are drawn directly on `±1, ±3, …` grids.
    pub sigma2: f64,
}

impl AntennaConfig {
    pub fn new(qam: QamScheme) -> Self {
        Self { qam, sigma2: qam.lattice_power() }
    }
}

/// Full system description for one simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Block length in symbols.
    pub n: usize,
    /// Cyclic-prefix length in samples.
    pub ls: usize,
    /// Total transmit antennas (inputs).
    pub n_t: usize,
    /// Receive antennas.
    pub n_r: usize,
    /// Per-input scheme and power, length `n_t`.
    pub antennas: Vec<AntennaConfig>,
    pub profile: PowerDelayProfile,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Convenience constructor for a uniform single-scheme scenario with
    /// default symbol powers.
    pub fn uniform(
        n: usize,
        ls: usize,
        n_t: usize,
        n_r: usize,
        qam: QamScheme,
        profile: PowerDelayProfile,
        seed: u64,
    ) -> Self {
        Self { n, ls, n_t, n_r, antennas: vec![AntennaConfig::new(qam); n_t], profile, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("block length N must be positive"));
        }
        if self.ls >= self.n {
            return Err(Error::config(format!(
                "cyclic prefix Ls = {} must be shorter than the block N = {}",
                self.ls, self.n
            )));
        }
        if self.n_t == 0 {
            return Err(Error::config("need at least one transmit antenna"));
        }
        if self.n_t > self.n_r {
            return Err(Error::config(format!(
                "NT = {} transmit antennas exceed NR = {} receive antennas",
                self.n_t, self.n_r
            )));
        }
        if self.antennas.len() != self.n_t {
            return Err(Error::config(format!(
                "per-antenna list has {} entries for NT = {}",
                self.antennas.len(),
                self.n_t
            )));
        }
        for (j, a) in self.antennas.iter().enumerate() {
            if !(a.sigma2.is_finite() && a.sigma2 > 0.0) {
                return Err(Error::config(format!("antenna {j}: sigma2 must be positive, got {}", a.sigma2)));
            }
        }
        self.profile.validate()?;
        if self.profile.len() > self.ls + 1 {
            return Err(Error::config(format!(
                "profile has {} taps but the cyclic prefix only covers {}",
                self.profile.len(),
                self.ls + 1
            )));
        }
        Ok(())
    }

    /// Bandwidth/energy efficiency factor `η = N/(N+L_s)`.
    pub fn eta(&self) -> f64 {
        self.n as f64 / (self.n + self.ls) as f64
    }

    /// Total channel tap power `P_Σ`.
    pub fn p_sigma(&self) -> f64 {
        self.profile.total_power()
    }

    pub fn schemes(&self) -> Vec<QamScheme> {
        self.antennas.iter().map(|a| a.qam).collect()
    }

    pub fn sigma2(&self) -> Vec<f64> {
        self.antennas.iter().map(|a| a.sigma2).collect()
    }

    /// If every input uses the same scheme, returns it.
    pub fn uniform_scheme(&self) -> Option<QamScheme> {
        let first = self.antennas.first()?.qam;
        self.antennas.iter().all(|a| a.qam == first).then_some(first)
    }

    /// Same scenario with a different receive-antenna count.
    pub fn with_n_r(&self, n_r: usize) -> Self {
        Self { n_r, ..self.clone() }
    }
}

/// Noise operating point: per-input Eb/N0 and the derived quantities used by
/// detection (`α^(j) = N₀/σ_j²`) and by the noise generator (`N₀`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Per-input Eb/N0 in dB (may be `+∞` for the noise-free limit).
    pub ebn0_db: Vec<f64>,
    /// Per-input regularization `α^(j) = P_Σ/(2 η m_j ⋅ EbN0_lin)`.
    pub alpha: Vec<f64>,
    /// Per-input implied noise spectral density `N₀ = α^(j) σ_j²`.
    n0: Vec<f64>,
}

impl NoiseConfig {
    /// The common noise spectral density, checked for consistency across
    /// inputs. Physically there is a single receiver noise floor, so the
    /// per-input Eb/N0 values must all imply the same `N₀`; an inconsistent
    /// hand-built list is rejected here instead of silently picking one.
    pub fn common_n0(&self) -> Result<f64> {
        let n0 = self.n0[0];
        for (j, &v) in self.n0.iter().enumerate().skip(1) {
            let scale = n0.abs().max(v.abs());
            if (v - n0).abs() > 1e-9 * scale.max(1e-300) {
                return Err(Error::config(format!(
                    "inconsistent noise floor: input 0 implies N0 = {n0}, input {j} implies {v}"
                )));
            }
        }
        Ok(n0)
    }

    /// Noise spectral density implied by input `j` alone.
    pub fn n0_for(&self, j: usize) -> f64 {
        self.n0[j]
    }

    /// True when this is the noise-free (irreducible-error) regime.
    pub fn is_noise_free(&self) -> bool {
        self.alpha.iter().all(|&a| a == 0.0)
    }
}

/// Converts per-input Eb/N0 targets into the noise parameters.
///
/// `N₀ = σ_j² P_Σ / (2 η m_j ⋅ EbN0_lin)` per input, and `α^(j) = N₀/σ_j²`.
/// An Eb/N0 of `+∞` dB yields `α = 0` (the irreducible-error regime); any
/// value with a nonpositive linear equivalent is rejected.
pub fn derive_noise(cfg: &ScenarioConfig, ebn0_db: &[f64]) -> Result<NoiseConfig> {
    if ebn0_db.len() != cfg.n_t {
        return Err(Error::DimensionMismatch {
            context: format!("{} Eb/N0 values for NT = {}", ebn0_db.len(), cfg.n_t),
        });
    }
    derive_noise_with_sigma(&cfg.schemes(), &cfg.sigma2(), cfg.p_sigma(), cfg.eta(), ebn0_db)
}

fn derive_noise_with_sigma(
    schemes: &[QamScheme],
    sigma2: &[f64],
    p_sigma: f64,
    eta: f64,
    ebn0_db: &[f64],
) -> Result<NoiseConfig> {
    let mut alpha = Vec::with_capacity(ebn0_db.len());
    let mut n0 = Vec::with_capacity(ebn0_db.len());
    for (j, &db) in ebn0_db.iter().enumerate() {
        let lin = 10f64.powf(db / 10.0);
        if !(lin > 0.0) {
            return Err(Error::config(format!(
                "input {j}: Eb/N0 must be positive in linear units, got {db} dB"
            )));
        }
        let m = schemes[j].m() as f64;
        let a = if lin.is_infinite() { 0.0 } else { p_sigma / (2.0 * eta * m * lin) };
        alpha.push(a);
        n0.push(a * sigma2[j]);
    }
    Ok(NoiseConfig { ebn0_db: ebn0_db.to_vec(), alpha, n0 })
}

/// How a scenario's per-input powers relate to the swept Eb/N0 axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerControl {
    /// Keep the configured symbol powers. The sweep value is input 0's
    /// Eb/N0; the shared noise floor follows from it, and the other inputs'
    /// actual Eb/N0 values are derived from that floor (they differ when the
    /// scenario mixes schemes or powers).
    #[default]
    FixedSigma,
    /// Rescale each input's symbol power in proportion to its bits per
    /// dimension so every input hits the swept Eb/N0 exactly under the shared
    /// noise floor. Coincides with `FixedSigma` for uniform scenarios with
    /// proportional powers.
    EqualEbn0,
}

/// Everything detection and generation need at one sweep point: the noise
/// parameters plus the effective per-input symbol powers and the lattice
/// scale factors that realize them.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub noise: NoiseConfig,
    /// Effective symbol power per input (differs from the configured value
    /// only under [`PowerControl::EqualEbn0`]).
    pub sigma2: Vec<f64>,
    /// Multiplier applied to unit-lattice symbols so their mean power is
    /// `sigma2[j]`.
    pub amp: Vec<f64>,
}

/// Resolves one sweep value into a full operating point.
pub fn sweep_point(cfg: &ScenarioConfig, ebn0_db: f64, pc: PowerControl) -> Result<OperatingPoint> {
    let schemes = cfg.schemes();
    let eta = cfg.eta();
    let p_sigma = cfg.p_sigma();

    let sigma2: Vec<f64> = match pc {
        PowerControl::FixedSigma => cfg.sigma2(),
        PowerControl::EqualEbn0 => {
            let base = &cfg.antennas[0];
            let per_bit = base.sigma2 / base.qam.m() as f64;
            schemes.iter().map(|s| per_bit * s.m() as f64).collect()
        }
    };

    // Anchor the noise floor on input 0 at the swept Eb/N0, then express
    // every input's actual Eb/N0 against that floor.
    let lin0 = 10f64.powf(ebn0_db / 10.0);
    if !(lin0 > 0.0) {
        return Err(Error::config(format!(
            "sweep Eb/N0 must be positive in linear units, got {ebn0_db} dB"
        )));
    }
    let m0 = schemes[0].m() as f64;
    let n0 = if lin0.is_infinite() { 0.0 } else { sigma2[0] * p_sigma / (2.0 * eta * m0 * lin0) };

    let ebn0: Vec<f64> = schemes
        .iter()
        .zip(&sigma2)
        .map(|(s, &sig)| {
            if n0 == 0.0 {
                f64::INFINITY
            } else {
                10.0 * (sig * p_sigma / (2.0 * eta * s.m() as f64 * n0)).log10()
            }
        })
        .collect();

    let noise = derive_noise_with_sigma(&schemes, &sigma2, p_sigma, eta, &ebn0)?;
    let amp = sigma2
        .iter()
        .zip(&schemes)
        .map(|(&sig, s)| (sig / s.lattice_power()).sqrt())
        .collect();
    Ok(OperatingPoint { noise, sigma2, amp })
}

/// On-disk scenario description (the JSON schema documented in the README).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Ls")]
    pub ls: usize,
    #[serde(rename = "NT")]
    pub n_t: usize,
    #[serde(rename = "NR")]
    pub n_r: usize,
    pub per_antenna: Vec<AntennaEntry>,
    pub profile: PowerDelayProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// One `per_antenna` entry; `sigma2` defaults to the scheme's lattice power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AntennaEntry {
    /// Constellation size: 4, 16 or 64.
    pub qam: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

impl ScenarioFile {
    /// Resolves defaults into a validated [`ScenarioConfig`].
    pub fn resolve(&self) -> Result<ScenarioConfig> {
        let mut antennas = Vec::with_capacity(self.per_antenna.len());
        for entry in &self.per_antenna {
            let qam = QamScheme::try_from(entry.qam)?;
            let sigma2 = entry.sigma2.unwrap_or_else(|| qam.lattice_power());
            antennas.push(AntennaConfig { qam, sigma2 });
        }
        let cfg = ScenarioConfig {
            n: self.n,
            ls: self.ls,
            n_t: self.n_t,
            n_r: self.n_r,
            antennas,
            profile: self.profile.clone(),
            seed: self.seed.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
