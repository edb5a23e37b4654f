use bosegas_core::checks::NINE_MODE_ALPHAS;
use bosegas_core::RadialPotential;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: Option<u64>,
    pub potential: PotentialConfig,
    pub scattering: ScatteringConfig,
    pub thermo: ThermoConfig,
    pub delta_f: DeltaFConfig,
    pub fock: FockConfig,
    pub trial_state: TrialConfig,
    pub upper_bound: UpperBoundConfig,
    pub bridge: BridgeConfig,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum PotentialConfig {
    Square {
        v0: f64,
        r0: f64,
    },
    Ramp {
        v0: f64,
        r0: f64,
    },
    /// Two-column CSV `r,v`, resolved against the config file's directory.
    Table {
        file: PathBuf,
    },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self::Square { v0: 2.0, r0: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringConfig {
    /// Outer radius as a multiple of the potential range.
    pub r_max_factor: f64,
    /// RK4 step as a fraction of the potential range.
    pub step_fraction: f64,
    pub profile_points: usize,
    /// Fourier coefficients are tabulated on the cube lattice with this side and cutoff.
    pub lattice_side: f64,
    pub lattice_cutoff: i32,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            r_max_factor: 3.0,
            step_fraction: 1.0 / 2000.0,
            profile_points: 201,
            lattice_side: 4.0 * std::f64::consts::PI,
            lattice_cutoff: 8,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermoConfig {
    pub rho: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for ThermoConfig {
    fn default() -> Self {
        Self { rho: vec![1e-4, 1e-3, 1e-2, 0.1, 1.0], beta: vec![0.2, 1.0, 5.0, 25.0] }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeltaFConfig {
    /// β = c ρ^{-2/3}.
    pub c: f64,
    pub rho: Vec<f64>,
}

impl Default for DeltaFConfig {
    fn default() -> Self {
        Self { c: 1.0, rho: vec![1e-2, 1e-3, 1e-4, 1e-5] }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockConfig {
    pub particles: u32,
    pub beta: Vec<f64>,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self { particles: 4, beta: vec![0.5, 1.3, 4.0] }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialConfig {
    pub alpha: Vec<String>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self { alpha: NINE_MODE_ALPHAS.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct UpperBoundConfig {
    pub beta: Vec<f64>,
    pub samples: usize,
    /// Random family mixtures per temperature.
    pub mixtures: usize,
}

impl Default for UpperBoundConfig {
    fn default() -> Self {
        Self { beta: vec![0.5, 1.3, 4.0], samples: 20_000, mixtures: 8 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct BridgeConfig {
    pub l: f64,
    pub ell: f64,
    pub rho: f64,
    pub corpus_random: usize,
    pub penalty_c: Option<f64>,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self { l: 2.0, ell: 0.5, rho: 1e-3, corpus_random: 20, penalty_c: None }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub scattering_rel: f64,
    pub fourier_ratio: f64,
    pub identity_rel: f64,
    pub thermo_rel: f64,
    pub delta_f_rel: f64,
    pub normalization: f64,
    pub hermiticity: f64,
    pub variational_slack: f64,
    pub isometry: f64,
    pub rescale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            scattering_rel: 1e-8,
            fourier_ratio: 1.0,
            identity_rel: 1e-6,
            thermo_rel: 1e-9,
            delta_f_rel: 1e-12,
            normalization: 1e-12,
            hermiticity: 1e-12,
            variational_slack: 1e-10,
            isometry: 1e-10,
            rescale: 1e-14,
        }
    }
}

/// A loaded config plus the directory relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub text: String,
    pub base: PathBuf,
    pub source: Option<PathBuf>,
}

pub fn load(path: Option<&Path>) -> Result<Loaded, String> {
    let Some(path) = path else {
        return Ok(Loaded { config: Config::default(), text: String::new(), base: PathBuf::from("."), source: None });
    };
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let config: Config = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded { config, text, base, source: Some(path.to_path_buf()) })
}

impl Loaded {
    pub fn potential(&self) -> Result<RadialPotential, String> {
        match &self.config.potential {
            PotentialConfig::Square { v0, r0 } => RadialPotential::square(*v0, *r0).map_err(|e| format!("potential: {e}")),
            PotentialConfig::Ramp { v0, r0 } => RadialPotential::ramp(*v0, *r0).map_err(|e| format!("potential: {e}")),
            PotentialConfig::Table { file } => {
                let path = self.base.join(file);
                let text = std::fs::read_to_string(&path).map_err(|e| format!("potential.file {}: {e}", path.display()))?;
                let samples = parse_table(&text).map_err(|e| format!("potential.file {}: {e}", path.display()))?;
                RadialPotential::table(&samples).map_err(|e| format!("potential.file {}: {e}", path.display()))
            }
        }
    }
}

/// `r,v` rows; a non-numeric first line is taken as a header.
fn parse_table(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [r, v] => r.parse::<f64>().and_then(|r| v.parse::<f64>().map(|v| (r, v))),
            _ => return Err(format!("line {}: expected two columns", i + 1)),
        };
        match parsed {
            Ok(p) => out.push(p),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = toml::to_string(&Config::default()).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back.delta_f.rho, vec![1e-2, 1e-3, 1e-4, 1e-5]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = toml::from_str::<Config>("[fock]\nbetaa = 1.0\n").unwrap_err().to_string();
        assert!(err.contains("betaa"), "{err}");
        let err = toml::from_str::<Config>("[potential]\nkind = \"square\"\nv0 = 1.0\nr0 = 1.0\nwidth = 2\n").unwrap_err().to_string();
        assert!(err.contains("width"), "{err}");
    }

    #[test]
    fn table_header_skipped() {
        let t = parse_table("r,v\n0,1\n1,0\n").unwrap();
        assert_eq!(t, vec![(0.0, 1.0), (1.0, 0.0)]);
        assert!(parse_table("0,1\nx,0\n").is_err());
    }
}
