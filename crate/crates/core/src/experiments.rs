//! Named, reproducible experiments: a JSON description in, CSV curves and a
//! JSON manifest out.
//!
//! An experiment bundles a scenario, a set of detectors, a sweep, and a
//! method into a single named unit. Running one writes each resulting curve
//! to its own CSV file (with a commented header carrying the seed, the
//! counts, and a hash of the experiment description) and a manifest listing
//! every file produced. Two runs with the same description and seed produce
//! byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{self, BerCurve, BerMode, CurveMethod, IberOptions, SaOptions, XAxis};
use crate::detectors::{DetectorKind, DfSchedule};
use crate::montecarlo::{self, McConfig, Receiver};
use crate::scenario::{PowerControl, QamScheme, ScenarioConfig, ScenarioFile};
use crate::{Error, Result};

/// Where an experiment gets its scenario from: inline, or a path to a
/// scenario JSON file (resolved against the experiment file's directory).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Path(String),
    Inline(ScenarioFile),
}

/// One detector entry: a bare linear detector name, or a decision-feedback
/// schedule under the `df` key.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DetectorSpec {
    Linear(DetectorKind),
    Df { df: DfSchedule },
}

impl DetectorSpec {
    pub fn receiver(&self) -> Result<Receiver> {
        match self {
            Self::Linear(kind) => Ok(Receiver::Linear(*kind)),
            Self::Df { df } => {
                df.validate()?;
                Ok(Receiver::Df(*df))
            }
        }
    }

    fn is_df(&self) -> bool {
        matches!(self, Self::Df { .. })
    }
}

/// What is being measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Bit error rate at finite noise.
    Ber,
    /// The irreducible (noise-free) error floor.
    Iber,
}

/// How curves are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SemiAnalytical,
    MonteCarlo,
    Both,
}

/// The swept variable and its grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    Ebn0 { ebn0_db: Vec<f64> },
    ReceiveAntennas { n_r: Vec<usize> },
}

/// Error-counting budget overrides.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct McSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_errors: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_blocks: Option<u64>,
}

/// A complete experiment description (the JSON schema documented in the
/// README).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub scenario: ScenarioSource,
    /// Uniform-constellation family: re-run the experiment with every input
    /// switched to each listed scheme (4, 16, 64). Requires a uniform base
    /// scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schemes: Option<Vec<u64>>,
    pub detectors: Vec<DetectorSpec>,
    pub metric: Metric,
    pub method: Method,
    pub sweep: Sweep,
    /// Also emit the closed-form single-input bound per constellation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bounds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_realizations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_control: Option<PowerControl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ber_mode: Option<BerMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ExperimentSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(is_name_char) {
            return Err(Error::config(format!(
                "experiment name {:?} must be nonempty and use only letters, digits, '-', '_'",
                self.name
            )));
        }
        if self.detectors.is_empty() {
            return Err(Error::EmptyInput { context: "detector list" });
        }
        for d in &self.detectors {
            d.receiver()?;
        }
        match &self.sweep {
            Sweep::Ebn0 { ebn0_db } if ebn0_db.is_empty() => {
                return Err(Error::EmptyInput { context: "Eb/N0 grid" });
            }
            Sweep::ReceiveAntennas { n_r } if n_r.is_empty() => {
                return Err(Error::EmptyInput { context: "receive antenna sweep" });
            }
            _ => {}
        }
        let has_df = self.detectors.iter().any(|d| d.is_df());
        match self.metric {
            Metric::Iber => {
                if self.method != Method::SemiAnalytical {
                    return Err(Error::config(
                        "irreducible-error curves are semi-analytical only",
                    ));
                }
                if !matches!(self.sweep, Sweep::ReceiveAntennas { .. }) {
                    return Err(Error::config(
                        "irreducible-error curves sweep the receive antenna count",
                    ));
                }
            }
            Metric::Ber => {
                if !matches!(self.sweep, Sweep::Ebn0 { .. }) {
                    return Err(Error::config("bit error rate curves sweep Eb/N0"));
                }
            }
        }
        if has_df && self.method != Method::MonteCarlo {
            return Err(Error::config(
                "decision-feedback receivers are nonlinear; only error counting applies",
            ));
        }
        if self.bounds && !matches!(self.sweep, Sweep::Ebn0 { .. }) {
            return Err(Error::config("bound curves need an Eb/N0 sweep"));
        }
        if let Some(schemes) = &self.schemes {
            if schemes.is_empty() {
                return Err(Error::EmptyInput { context: "scheme list" });
            }
            for &s in schemes {
                QamScheme::try_from(s)?;
            }
        }
        Ok(())
    }

    /// Hash of the canonical serialization, for tying output files back to
    /// the exact description that produced them.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("spec serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            write!(hex, "{byte:02x}").unwrap();
        }
        hex
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_'
}

/// Run-time knobs that live outside the experiment description.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the experiment's (and scenario's) seed.
    pub seed: Option<u64>,
    /// Directory for CSV and manifest output; created if missing.
    pub out_dir: PathBuf,
    /// Base directory for resolving scenario path references (usually the
    /// experiment file's directory).
    pub base_dir: Option<PathBuf>,
}

/// One produced file, as listed in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveEntry {
    pub file: String,
    pub method: CurveMethod,
    pub detector: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    pub x_axis: XAxis,
    pub points: usize,
}

/// Everything a run produced, also written as `<name>_manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    pub metric: Metric,
    pub method: Method,
    pub power_control: PowerControl,
    pub scenario: ScenarioConfig,
    pub curves: Vec<CurveEntry>,
}

struct Resolved {
    cfg: ScenarioConfig,
    seed: u64,
    schemes: Vec<QamScheme>,
    power_control: PowerControl,
    mode: BerMode,
    mc: McConfig,
    sa_realizations: usize,
}

fn resolve(spec: &ExperimentSpec, opts: &RunOptions) -> Result<Resolved> {
    spec.validate()?;
    let file = match &spec.scenario {
        ScenarioSource::Inline(file) => file.clone(),
        ScenarioSource::Path(rel) => {
            let path = match &opts.base_dir {
                Some(base) => base.join(rel),
                None => PathBuf::from(rel),
            };
            let text = fs::read_to_string(&path)?;
            serde_json::from_str(&text)?
        }
    };
    let cfg = file.resolve()?;
    let seed = opts.seed.or(spec.seed).unwrap_or(cfg.seed);
    let schemes = match &spec.schemes {
        Some(list) => {
            if cfg.uniform_scheme().is_none() {
                return Err(Error::config(
                    "a scheme family needs a uniform base scenario",
                ));
            }
            list.iter().map(|&s| QamScheme::try_from(s)).collect::<Result<_>>()?
        }
        None => Vec::new(),
    };
    let power_control = spec.power_control.unwrap_or_default();
    let mc_defaults = McConfig::default();
    let mc = McConfig {
        min_errors: spec.mc.and_then(|m| m.min_errors).unwrap_or(mc_defaults.min_errors),
        max_blocks: spec.mc.and_then(|m| m.max_blocks).unwrap_or(mc_defaults.max_blocks),
        power_control,
        seed: Some(seed),
    };
    let sa_realizations = spec.n_realizations.unwrap_or(match spec.metric {
        Metric::Ber => 200,
        Metric::Iber => 2000,
    });
    Ok(Resolved {
        cfg,
        seed,
        schemes,
        power_control,
        mode: spec.ber_mode.unwrap_or_default(),
        mc,
        sa_realizations,
    })
}

fn with_scheme(cfg: &ScenarioConfig, scheme: QamScheme) -> ScenarioConfig {
    let mut out = cfg.clone();
    for a in &mut out.antennas {
        *a = crate::scenario::AntennaConfig::new(scheme);
    }
    out
}

fn scheme_slug(label: &str) -> String {
    // "4-QAM" -> "qam4"
    let digits: String = label.chars().filter(|c| c.is_ascii_digit()).collect();
    format!("qam{digits}")
}

fn method_slug(method: CurveMethod) -> &'static str {
    match method {
        CurveMethod::SemiAnalytical => "sa",
        CurveMethod::MonteCarlo => "mc",
        CurveMethod::Bound => "bound",
    }
}

fn curve_file_name(name: &str, curve: &BerCurve) -> String {
    let mut parts = vec![name.to_string(), method_slug(curve.method).to_string(), curve.detector.clone()];
    if let Some(scheme) = &curve.scheme {
        parts.push(scheme_slug(scheme));
    }
    if let Some(it) = curve.iteration {
        parts.push(format!("it{it}"));
    }
    format!("{}.csv", parts.join("_"))
}

/// Named bound columns appended to a curve's CSV: `(column, value per row)`.
type BoundColumns = Vec<(String, Vec<f64>)>;

fn render_csv(
    spec: &ExperimentSpec,
    resolved: &Resolved,
    curve: &BerCurve,
    bounds: &BoundColumns,
) -> String {
    let mut out = String::new();
    let push = |out: &mut String, key: &str, value: &str| {
        let _ = writeln!(out, "# {key}: {value}");
    };
    push(&mut out, "name", &spec.name);
    push(&mut out, "method", curve.method.label());
    push(&mut out, "metric", match spec.metric {
        Metric::Ber => "ber",
        Metric::Iber => "iber",
    });
    push(&mut out, "detector", &curve.detector);
    if let Some(scheme) = &curve.scheme {
        push(&mut out, "scheme", scheme);
    }
    if let Some(it) = curve.iteration {
        push(&mut out, "iteration", &it.to_string());
    }
    push(&mut out, "seed", &curve.seed.to_string());
    match curve.method {
        CurveMethod::SemiAnalytical => {
            push(&mut out, "n_realizations", &resolved.sa_realizations.to_string());
            push(&mut out, "n_unit", "realizations");
        }
        CurveMethod::MonteCarlo => {
            push(&mut out, "min_errors", &resolved.mc.min_errors.to_string());
            push(&mut out, "max_blocks", &resolved.mc.max_blocks.to_string());
            push(&mut out, "n_unit", "bits");
        }
        CurveMethod::Bound => {}
    }
    push(&mut out, "power_control", match resolved.power_control {
        PowerControl::FixedSigma => "fixed_sigma",
        PowerControl::EqualEbn0 => "equal_ebn0",
    });
    push(&mut out, "config_hash", &spec.config_hash());

    let n_inputs = curve.points.first().map_or(0, |p| p.per_input.len());
    let mut header = vec![curve.x_axis.column().to_string()];
    for j in 0..n_inputs {
        header.push(format!("ber_{}", j + 1));
    }
    header.push("aggregate_ber".into());
    header.push("stderr".into());
    header.push("n".into());
    let counting = curve.method == CurveMethod::MonteCarlo;
    if counting {
        header.push("errors".into());
        header.push("low_confidence".into());
    }
    for (name, _) in bounds {
        header.push(name.clone());
    }
    let _ = writeln!(out, "{}", header.join(","));

    for (ri, p) in curve.points.iter().enumerate() {
        let mut row = vec![format!("{}", p.x)];
        for &b in &p.per_input {
            row.push(format!("{b}"));
        }
        row.push(format!("{}", p.aggregate));
        row.push(format!("{}", p.stderr));
        row.push(format!("{}", p.n));
        if counting {
            row.push(format!("{}", p.errors.unwrap_or(0)));
            row.push(if p.low_confidence { "1" } else { "0" }.into());
        }
        for (_, values) in bounds {
            row.push(format!("{}", values[ri]));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// The closed-form single-input bound columns accompanying one curve: one
/// column for a uniform scenario, one per distinct constellation otherwise.
fn bound_columns(cfg: &ScenarioConfig, grid: &[f64], mode: BerMode) -> BoundColumns {
    let mut seen: Vec<QamScheme> = Vec::new();
    for scheme in cfg.schemes() {
        if !seen.contains(&scheme) {
            seen.push(scheme);
        }
    }
    let uniform = seen.len() == 1;
    seen.into_iter()
        .map(|scheme| {
            let name = if uniform {
                "simo_awgn_mfb".to_string()
            } else {
                format!("simo_awgn_mfb_{}", scheme_slug(scheme.label()))
            };
            let values = grid
                .iter()
                .map(|&db| analysis::simo_awgn_mfb(scheme, cfg.n_r, cfg.eta(), db, mode))
                .collect();
            (name, values)
        })
        .collect()
}

/// Validates an experiment end to end — description, scenario reference,
/// scenario contents — without running anything. Returns the resolved
/// scenario and the effective seed.
pub fn preflight(spec: &ExperimentSpec, opts: &RunOptions) -> Result<(ScenarioConfig, u64)> {
    let resolved = resolve(spec, opts)?;
    Ok((resolved.cfg, resolved.seed))
}

/// Runs an experiment and writes its curves and manifest under
/// `opts.out_dir`. Returns the manifest.
pub fn run_experiment(spec: &ExperimentSpec, opts: &RunOptions) -> Result<RunManifest> {
    let resolved = resolve(spec, opts)?;
    let mut curves: Vec<(BerCurve, BoundColumns)> = Vec::new();

    match (&spec.sweep, spec.metric) {
        (Sweep::ReceiveAntennas { n_r }, Metric::Iber) => {
            // One shared ensemble across detectors, schemes, and counts.
            let kinds: Vec<DetectorKind> = spec
                .detectors
                .iter()
                .map(|d| match d.receiver()? {
                    Receiver::Linear(kind) => Ok(kind),
                    Receiver::Df(_) => unreachable!("validated"),
                })
                .collect::<Result<_>>()?;
            let schemes = if resolved.schemes.is_empty() {
                vec![resolved.cfg.uniform_scheme().ok_or_else(|| {
                    Error::config("irreducible-error sweeps require a uniform scenario")
                })?]
            } else {
                resolved.schemes.clone()
            };
            let iber_opts = IberOptions {
                n_realizations: resolved.sa_realizations,
                mode: resolved.mode,
                seed: Some(resolved.seed),
            };
            curves.extend(
                analysis::iber_ensemble(&resolved.cfg, &kinds, &schemes, n_r, &iber_opts)?
                    .into_iter()
                    .map(|c| (c, BoundColumns::new())),
            );
        }
        (Sweep::Ebn0 { ebn0_db }, Metric::Ber) => {
            let variants: Vec<ScenarioConfig> = if resolved.schemes.is_empty() {
                vec![resolved.cfg.clone()]
            } else {
                resolved.schemes.iter().map(|&s| with_scheme(&resolved.cfg, s)).collect()
            };
            for cfg in &variants {
                let bounds = if spec.bounds {
                    bound_columns(cfg, ebn0_db, resolved.mode)
                } else {
                    BoundColumns::new()
                };
                for detector in &spec.detectors {
                    let receiver = detector.receiver()?;
                    if matches!(spec.method, Method::SemiAnalytical | Method::Both) {
                        let kind = match receiver {
                            Receiver::Linear(kind) => kind,
                            Receiver::Df(_) => unreachable!("validated"),
                        };
                        let sa_opts = SaOptions {
                            n_realizations: resolved.sa_realizations,
                            mode: resolved.mode,
                            power_control: resolved.power_control,
                            seed: Some(resolved.seed),
                        };
                        curves.push((
                            analysis::semi_analytical_ber(cfg, kind, ebn0_db, &sa_opts)?,
                            bounds.clone(),
                        ));
                    }
                    if matches!(spec.method, Method::MonteCarlo | Method::Both) {
                        curves.extend(
                            montecarlo::run_mc(cfg, &receiver, ebn0_db, &resolved.mc)?
                                .into_iter()
                                .map(|c| (c, bounds.clone())),
                        );
                    }
                }
            }
        }
        _ => unreachable!("validated"),
    }

    fs::create_dir_all(&opts.out_dir)?;
    let mut entries = Vec::with_capacity(curves.len());
    for (curve, bounds) in &curves {
        let file = curve_file_name(&spec.name, curve);
        fs::write(opts.out_dir.join(&file), render_csv(spec, &resolved, curve, bounds))?;
        entries.push(CurveEntry {
            file,
            method: curve.method,
            detector: curve.detector.clone(),
            scheme: curve.scheme.clone(),
            iteration: curve.iteration,
            x_axis: curve.x_axis,
            points: curve.points.len(),
        });
    }

    let manifest = RunManifest {
        name: spec.name.clone(),
        description: spec.description.clone(),
        seed: resolved.seed,
        config_hash: spec.config_hash(),
        metric: spec.metric,
        method: spec.method,
        power_control: resolved.power_control,
        scenario: resolved.cfg,
        curves: entries,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)?;
    fs::write(
        opts.out_dir.join(format!("{}_manifest.json", spec.name)),
        manifest_json + "\n",
    )?;
    Ok(manifest)
}

/// The experiment descriptions shipped with the library, as `(name, json)`
/// pairs.
pub fn bundled() -> Vec<(&'static str, &'static str)> {
    vec![
        ("fig3a", include_str!("../specs/fig3a.json")),
        ("fig3b", include_str!("../specs/fig3b.json")),
        ("fig4a", include_str!("../specs/fig4a.json")),
        ("fig5a", include_str!("../specs/fig5a.json")),
        ("fig6", include_str!("../specs/fig6.json")),
    ]
}

/// Parses one bundled experiment by name.
pub fn bundled_spec(name: &str) -> Option<Result<ExperimentSpec>> {
    bundled()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| ExperimentSpec::from_json(json))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::PowerDelayProfile;
    use std::path::Path;

    fn tiny_spec_json(method: &str) -> String {
        format!(
            r#"{{
              "name": "tiny",
              "scenario": {{
                "N": 32, "Ls": 8, "NT": 2, "NR": 6,
                "per_antenna": [{{"qam": 4}}, {{"qam": 4}}],
                "profile": {{"linear_decay": {{"taps": 8}}}},
                "seed": 5
              }},
              "detectors": ["mf", {{"df": {{"first": "simplified_mmse", "rest": "mf", "iterations": 2}}}}],
              "metric": "ber",
              "method": "{method}",
              "sweep": {{"ebn0_db": [-6, 0]}},
              "bounds": true,
              "n_realizations": 8,
              "mc": {{"min_errors": 20, "max_blocks": 64}}
            }}"#
        )
    }

    #[test]
    fn spec_json_round_trips() {
        let spec = ExperimentSpec::from_json(&tiny_spec_json("monte_carlo")).unwrap();
        assert_eq!(spec.name, "tiny");
        assert_eq!(spec.detectors.len(), 2);
        assert!(spec.bounds);
        let json = serde_json::to_string(&spec).unwrap();
        let back = ExperimentSpec::from_json(&json).unwrap();
        assert_eq!(back.config_hash(), spec.config_hash());
        match &back.scenario {
            ScenarioSource::Inline(file) => assert_eq!(file.resolve().unwrap().n, 32),
            _ => panic!("expected inline scenario"),
        }
    }

    #[test]
    fn validation_rejects_inconsistent_requests() {
        // Decision feedback cannot be evaluated semi-analytically.
        assert!(ExperimentSpec::from_json(&tiny_spec_json("semi_analytical")).is_err());
        assert!(ExperimentSpec::from_json(&tiny_spec_json("both")).is_err());

        let iber_mc = r#"{
          "name": "x",
          "scenario": {"N": 32, "Ls": 8, "NT": 2, "NR": 6,
                       "per_antenna": [{"qam": 4}, {"qam": 4}],
                       "profile": {"linear_decay": {"taps": 8}}},
          "detectors": ["mf"],
          "metric": "iber",
          "method": "monte_carlo",
          "sweep": {"n_r": [4, 6]}
        }"#;
        assert!(ExperimentSpec::from_json(iber_mc).is_err());

        let iber_ebn0 = iber_mc
            .replace(r#""method": "monte_carlo""#, r#""method": "semi_analytical""#)
            .replace(r#""sweep": {"n_r": [4, 6]}"#, r#""sweep": {"ebn0_db": [0]}"#);
        assert!(ExperimentSpec::from_json(&iber_ebn0).is_err());

        let bad_scheme = iber_mc
            .replace(r#""method": "monte_carlo""#, r#""method": "semi_analytical""#)
            .replace(r#""detectors": ["mf"]"#, r#""detectors": ["mf"], "schemes": [32]"#);
        assert!(ExperimentSpec::from_json(&bad_scheme).is_err());
    }

    #[test]
    fn bundled_specs_parse_and_validate() {
        let names: Vec<_> = bundled().iter().map(|(n, _)| *n).collect();
        assert_eq!(names, ["fig3a", "fig3b", "fig4a", "fig5a", "fig6"]);
        for (name, json) in bundled() {
            let spec = ExperimentSpec::from_json(json)
                .unwrap_or_else(|e| panic!("bundled {name}: {e}"));
            assert_eq!(spec.name, name);
            // Every bundled scenario must resolve.
            let opts = RunOptions::default();
            resolve(&spec, &opts).unwrap_or_else(|e| panic!("bundled {name}: {e}"));
        }
        assert!(bundled_spec("fig5a").is_some());
        assert!(bundled_spec("nope").is_none());
    }

    #[test]
    fn a_run_writes_all_curves_and_a_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec::from_json(&tiny_spec_json("monte_carlo")).unwrap();
        let opts = RunOptions { out_dir: dir.path().to_path_buf(), ..Default::default() };
        let manifest = run_experiment(&spec, &opts).unwrap();

        // mf (1 curve) + df with 2 iterations (2 curves); bounds ride along
        // as a column, not as separate files.
        assert_eq!(manifest.curves.len(), 3);
        assert_eq!(manifest.seed, 5);
        for entry in &manifest.curves {
            let path = dir.path().join(&entry.file);
            let text = fs::read_to_string(&path).unwrap();
            assert!(text.starts_with("# name: tiny\n"), "{}", entry.file);
            assert!(text.contains("# seed: 5"));
            assert!(text.contains(&format!("# config_hash: {}", manifest.config_hash)));
            let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
            assert!(header.starts_with("ebn0_db,"));
            assert!(header.ends_with(",simo_awgn_mfb"), "{header}");
            assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2);
        }
        let manifest_path = dir.path().join("tiny_manifest.json");
        let text = fs::read_to_string(manifest_path).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.curves.len(), 3);
        assert_eq!(back.scenario.n, 32);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let spec = ExperimentSpec::from_json(&tiny_spec_json("monte_carlo")).unwrap();
        let read_all = |dir: &Path| -> Vec<(String, Vec<u8>)> {
            let mut files: Vec<_> = fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            files
                .into_iter()
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        fs::read(&p).unwrap(),
                    )
                })
                .collect()
        };
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_experiment(
            &spec,
            &RunOptions { out_dir: dir_a.path().to_path_buf(), ..Default::default() },
        )
        .unwrap();
        run_experiment(
            &spec,
            &RunOptions { out_dir: dir_b.path().to_path_buf(), ..Default::default() },
        )
        .unwrap();
        assert_eq!(read_all(dir_a.path()), read_all(dir_b.path()));
    }

    #[test]
    fn seed_precedence_is_cli_then_spec_then_scenario() {
        let mut spec = ExperimentSpec::from_json(&tiny_spec_json("monte_carlo")).unwrap();
        let opts = RunOptions::default();
        assert_eq!(resolve(&spec, &opts).unwrap().seed, 5); // scenario
        spec.seed = Some(17);
        assert_eq!(resolve(&spec, &opts).unwrap().seed, 17); // spec
        let opts = RunOptions { seed: Some(23), ..Default::default() };
        assert_eq!(resolve(&spec, &opts).unwrap().seed, 23); // override
    }

    #[test]
    fn scheme_families_rerun_the_scenario_per_constellation() {
        let dir = tempfile::tempdir().unwrap();
        let json = r#"{
          "name": "family",
          "scenario": {"N": 32, "Ls": 8, "NT": 2, "NR": 8,
                       "per_antenna": [{"qam": 4}, {"qam": 4}],
                       "profile": {"linear_decay": {"taps": 8}}, "seed": 2},
          "schemes": [4, 16],
          "detectors": ["simplified_mmse"],
          "metric": "iber",
          "method": "semi_analytical",
          "sweep": {"n_r": [4, 8]},
          "n_realizations": 12
        }"#;
        let spec = ExperimentSpec::from_json(json).unwrap();
        let opts = RunOptions { out_dir: dir.path().to_path_buf(), ..Default::default() };
        let manifest = run_experiment(&spec, &opts).unwrap();
        assert_eq!(manifest.curves.len(), 2);
        assert_eq!(manifest.curves[0].file, "family_sa_simplified_mmse_qam4.csv");
        assert_eq!(manifest.curves[1].file, "family_sa_simplified_mmse_qam16.csv");
        for entry in &manifest.curves {
            let text = fs::read_to_string(dir.path().join(&entry.file)).unwrap();
            let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
            assert_eq!(header, "n_r,ber_1,ber_2,aggregate_ber,stderr,n");
        }
    }

    #[test]
    fn scenario_path_references_resolve_against_the_base_dir() {
        let dir = tempfile::tempdir().unwrap();
        let scenario = r#"{"N": 32, "Ls": 8, "NT": 2, "NR": 6,
                           "per_antenna": [{"qam": 4}, {"qam": 4}],
                           "profile": {"single_tap": {"power": 1.0}}, "seed": 9}"#;
        fs::write(dir.path().join("scn.json"), scenario).unwrap();
        let spec = ExperimentSpec {
            name: "pathref".into(),
            description: None,
            scenario: ScenarioSource::Path("scn.json".into()),
            schemes: None,
            detectors: vec![DetectorSpec::Linear(DetectorKind::Mf)],
            metric: Metric::Ber,
            method: Method::SemiAnalytical,
            sweep: Sweep::Ebn0 { ebn0_db: vec![0.0] },
            bounds: false,
            n_realizations: Some(4),
            mc: None,
            power_control: None,
            ber_mode: None,
            seed: None,
        };
        let opts = RunOptions {
            out_dir: dir.path().join("out"),
            base_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let manifest = run_experiment(&spec, &opts).unwrap();
        assert_eq!(manifest.seed, 9);
        assert_eq!(manifest.scenario.profile, PowerDelayProfile::SingleTap { power: 1.0 });
    }
}
