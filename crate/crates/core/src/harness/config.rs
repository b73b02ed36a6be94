//! Experiment configuration files.
//!
//! ```toml
//! scene = "../scenes/placement_a.toml"   # relative to this file
//! algorithms = ["zps", "beam_scanning", "genie", "bcm"]
//! seeds = [1, 2, 3]
//! master_seed = 2024
//! samples = 3000
//! meas_noise_sigma = 0.0
//! oracle_mode = false
//! output_dir = "results/tx_power"
//!
//! [sweep]
//! axis = "tx_power"
//! values = [-10.0, -5.0, 0.0, 5.0, 10.0]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Zps,
    BeamScanning,
    Genie,
    Bcm,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Zps => "zps",
            Algorithm::BeamScanning => "beam_scanning",
            Algorithm::Genie => "genie",
            Algorithm::Bcm => "bcm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zps" => Ok(Algorithm::Zps),
            "beam_scanning" => Ok(Algorithm::BeamScanning),
            "genie" => Ok(Algorithm::Genie),
            "bcm" => Ok(Algorithm::Bcm),
            other => Err(Error::Experiment(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkState {
    Los,
    Nlos,
}

/// The parameter varied across cells. `nk` and `scaling_n` resize every
/// panel to `N` atoms (near-square grid).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    #[default]
    None,
    TxPower {
        values: Vec<f64>,
    },
    Samples {
        values: Vec<usize>,
    },
    Nk {
        values: Vec<[usize; 2]>,
    },
    Placement {
        values: Vec<PathBuf>,
    },
    LosNlos {
        values: Vec<LinkState>,
    },
    ScalingN {
        values: Vec<usize>,
    },
}

impl Sweep {
    pub fn axis_name(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::TxPower { .. } => "tx_power",
            Sweep::Samples { .. } => "samples",
            Sweep::Nk { .. } => "nk",
            Sweep::Placement { .. } => "placement",
            Sweep::LosNlos { .. } => "los_nlos",
            Sweep::ScalingN { .. } => "scaling_n",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::None => 1,
            Sweep::TxPower { values } => values.len(),
            Sweep::Samples { values } => values.len(),
            Sweep::Nk { values } => values.len(),
            Sweep::Placement { values } => values.len(),
            Sweep::LosNlos { values } => values.len(),
            Sweep::ScalingN { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Text label of the `i`-th value as written to result files.
    pub fn label(&self, i: usize) -> String {
        match self {
            Sweep::None => String::from("-"),
            Sweep::TxPower { values } => values[i].to_string(),
            Sweep::Samples { values } => values[i].to_string(),
            Sweep::Nk { values } => format!("{}x{}", values[i][0], values[i][1]),
            Sweep::Placement { values } => values[i]
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| values[i].display().to_string()),
            Sweep::LosNlos { values } => match values[i] {
                LinkState::Los => "los".into(),
                LinkState::Nlos => "nlos".into(),
            },
            Sweep::ScalingN { values } => values[i].to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::Experiment(format!(
                "{} sweep: {m}",
                self.axis_name()
            )))
        };
        if self.is_empty() {
            return bad("no values");
        }
        match self {
            Sweep::TxPower { values } if values.iter().any(|v| !v.is_finite()) => {
                bad("non-finite power")
            }
            Sweep::Samples { values } if values.contains(&0) => {
                bad("sample count must be positive")
            }
            Sweep::Nk { values } if values.iter().any(|&[n, k]| n == 0 || k < 2) => {
                bad("need N >= 1 and K >= 2")
            }
            Sweep::ScalingN { values } if values.contains(&0) => bad("N must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: PathBuf,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    pub samples: usize,
    #[serde(default)]
    pub meas_noise_sigma: f64,
    /// BCM uses closed-form conditional expectations instead of samples.
    #[serde(default)]
    pub oracle_mode: bool,
    /// Run localization after BCM when every panel supports it.
    #[serde(default = "default_true")]
    pub sensing: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sweep: Sweep,
}

fn default_true() -> bool {
    true
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Experiment(
                "at least one algorithm is required".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Experiment("at least one seed is required".into()));
        }
        if self.samples == 0 {
            return Err(Error::Experiment("samples must be positive".into()));
        }
        if !(self.meas_noise_sigma >= 0.0 && self.meas_noise_sigma.is_finite()) {
            return Err(Error::Experiment(
                "meas_noise_sigma must be non-negative".into(),
            ));
        }
        self.sweep.validate()
    }

    /// Parses a config; relative scene paths resolve against `base_dir`.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = origin.parent().unwrap_or(Path::new(""));
        config.scene = base.join(&config.scene);
        if let Sweep::Placement { values } = &mut config.sweep {
            for v in values.iter_mut() {
                *v = base.join(&*v);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }
}

/// Near-square `(rows, cols)` with `rows ≤ cols` and `rows · cols = n`.
pub fn near_square(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}
