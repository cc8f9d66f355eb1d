//! Run configuration: an optional TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use geocite::flows::Partition;
use geocite::gravity::{BandSpec, DistanceSpec, ZeroDistance};
use geocite::synth::{CountMode, GravityParams, WorldConfig};

use crate::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub cited: Option<PathBuf>,
    pub citing: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub capitals: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub continents: Option<PathBuf>,
    /// Edge and mass files for `fit`; default to the output directory.
    pub edges: Option<PathBuf>,
    pub masses_cited: Option<PathBuf>,
    pub masses_citing: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n_territories: usize,
    pub noise_sigma: f64,
    pub ln_k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub count_mode: String,
    pub mass_mu: f64,
    pub mass_sigma: f64,
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    /// Number of seeded recovery trials summarized in the report.
    pub trials: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let p = GravityParams::reference(0.1, 0);
        let w = WorldConfig::default();
        SimulateConfig {
            n_territories: 500,
            noise_sigma: p.noise_sigma,
            ln_k: p.ln_k,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            count_mode: "round".into(),
            mass_mu: w.mass_mu,
            mass_sigma: w.mass_sigma,
            lat_range: w.lat_range,
            lon_range: w.lon_range,
            trials: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub home: String,
    pub level: String,
    pub partition: String,
    /// Band breakpoints in km; absent means the continuous distance term.
    pub bands: Option<Vec<f64>>,
    pub zero_distance: String,
    pub out: PathBuf,
    pub seed: u64,
    /// Inclusive publication-year window for masses.
    pub years: Option<(i32, i32)>,
    pub dedupe_addresses: bool,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Inputs::default(),
            home: "IT".into(),
            level: "national".into(),
            partition: "all".into(),
            bands: None,
            zero_distance: "exclude".into(),
            out: PathBuf::from("out"),
            seed: 42,
            years: None,
            dedupe_addresses: false,
            simulate: SimulateConfig::default(),
        }
    }
}

/// Partition choices on the command line; `both` fits continental and
/// intercontinental side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionChoice {
    One(Partition),
    Both,
}

impl RunConfig {
    /// Reads `path`, resolving relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        let i = &mut cfg.inputs;
        for p in [
            &mut i.cited,
            &mut i.citing,
            &mut i.gazetteer,
            &mut i.capitals,
            &mut i.aliases,
            &mut i.continents,
            &mut i.edges,
            &mut i.masses_cited,
            &mut i.masses_citing,
        ] {
            fix(p);
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.partition_choice()?;
        self.distance_spec()?;
        if !matches!(self.level.as_str(), "national" | "international") {
            return Err(Failure::usage(format!("unknown level `{}`", self.level)));
        }
        if self.home.len() != 2 {
            return Err(Failure::usage(format!("home must be an ISO 3166-1 alpha-2 code, got `{}`", self.home)));
        }
        if let Some((a, b)) = self.years {
            if a > b {
                return Err(Failure::usage(format!("invalid year window {a}-{b}")));
            }
        }
        self.world_config()?;
        self.gravity_params()?.validate().map_err(Failure::usage)?;
        Ok(())
    }

    /// Sha-256 over the canonical JSON form of the resolved configuration.
    /// The output directory is left out so relocated runs hash alike.
    pub fn hash(&self) -> String {
        let keyed = RunConfig {
            out: PathBuf::new(),
            ..self.clone()
        };
        let json = serde_json::to_string(&keyed).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn partition_choice(&self) -> Result<PartitionChoice, Failure> {
        if self.partition == "both" {
            return Ok(PartitionChoice::Both);
        }
        self.partition
            .parse::<Partition>()
            .map(PartitionChoice::One)
            .map_err(|_| Failure::usage(format!("unknown partition `{}`", self.partition)))
    }

    pub fn distance_spec(&self) -> Result<DistanceSpec, Failure> {
        match &self.bands {
            Some(b) => BandSpec::new(b.clone()).map(DistanceSpec::Bands).map_err(Failure::usage),
            None => self
                .zero_distance
                .parse::<ZeroDistance>()
                .map(DistanceSpec::Continuous)
                .map_err(|_| {
                    Failure::usage(format!(
                        "zero-distance policy must be `exclude` or `floor:<km>`, got `{}`",
                        self.zero_distance
                    ))
                }),
        }
    }

    pub fn gravity_params(&self) -> Result<GravityParams, Failure> {
        let s = &self.simulate;
        let p = GravityParams {
            ln_k: s.ln_k,
            alpha: s.alpha,
            beta: s.beta,
            gamma: s.gamma,
            noise_sigma: s.noise_sigma,
            seed: self.seed,
        };
        p.validate().map_err(Failure::usage)?;
        Ok(p)
    }

    pub fn world_config(&self) -> Result<WorldConfig, Failure> {
        let s = &self.simulate;
        let count_mode: CountMode = s.count_mode.parse().map_err(Failure::usage)?;
        Ok(WorldConfig {
            lat_range: s.lat_range,
            lon_range: s.lon_range,
            mass_mu: s.mass_mu,
            mass_sigma: s.mass_sigma,
            count_mode,
            country_code: self.home.clone(),
        })
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Configured path, or `default` inside the output directory.
    pub fn input_or_out(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        configured.clone().unwrap_or_else(|| self.out_file(default))
    }
}

/// Parses `50,400,800,1200`.
pub fn parse_bands(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad breakpoint `{v}`")))
        .collect()
}
