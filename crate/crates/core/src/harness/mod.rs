//! Config-driven experiments: sweeps over scene and sampling parameters,
//! per-cell metrics, and result files.
//!
//! A cell is one `(algorithm, sweep value, seed)` triple. Cells run in
//! parallel; every cell derives its randomness from `(master_seed, seed)`
//! alone, and records come back in canonical order, so results do not depend
//! on scheduling.

pub mod config;
pub mod output;
pub mod scaling;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::bcm::{self, BcmResult};
use crate::channel::{dbm_to_linear, ChannelEnsemble, DEFAULT_BLOCKAGE};
use crate::geometry::SceneGeometry;
use crate::rng::derive_seed;
use crate::sampling::{collect_random, PhaseConfig};
use crate::scene_file::{load_scene_spec, Scene, SceneSpec};
use crate::sensing;
use crate::{Error, Result};

pub use config::{near_square, Algorithm, ExperimentConfig, LinkState, Sweep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub algorithm: Algorithm,
    pub sweep_value: String,
    pub seed: u64,
    pub snr_boost_db: Option<f64>,
    /// Localization squared error in m²; only when sensing ran.
    pub squared_error: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl MetricRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// `10·log10` of configured SNR over the SNR of the same scene without panels.
pub fn snr_boost(
    with: &ChannelEnsemble,
    config: &PhaseConfig,
    without: &ChannelEnsemble,
) -> Result<f64> {
    let den = without.expected_snr(&PhaseConfig::zeros(without.layout()))?;
    if den.is_nan() || den <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let num = with.expected_snr(config)?;
    Ok(10.0 * (num / den).log10())
}

/// Resizes every panel to `n` atoms on a near-square grid, optionally changing `K`.
pub fn resize_panels(
    geometry: &SceneGeometry,
    n: usize,
    k_levels: Option<usize>,
) -> Result<SceneGeometry> {
    let (rows, cols) = near_square(n);
    let mut panels = geometry.panels.clone();
    for p in &mut panels {
        p.n_row = rows;
        p.n_col = cols;
        if let Some(k) = k_levels {
            p.k_levels = k;
        }
    }
    SceneGeometry::new(
        geometry.tx_position,
        geometry.rx_position,
        panels,
        geometry.wavelength,
    )
}

struct CellSetup {
    scene: Scene,
    samples: usize,
}

fn cell_setup(
    config: &ExperimentConfig,
    base: &Result<SceneSpec>,
    index: usize,
) -> Result<CellSetup> {
    let spec = match &config.sweep {
        Sweep::Placement { values } => load_scene_spec(&values[index])?,
        _ => match base {
            Ok(spec) => spec.clone(),
            Err(e) => return Err(Error::Experiment(format!("scene file: {e}"))),
        },
    };
    let mut scene = spec.build()?;
    let mut samples = config.samples;
    match &config.sweep {
        Sweep::None | Sweep::Placement { .. } => {}
        Sweep::TxPower { values } => scene.channel.tx_power = dbm_to_linear(values[index]),
        Sweep::Samples { values } => samples = values[index],
        Sweep::Nk { values } => {
            let [n, k] = values[index];
            scene.geometry = resize_panels(&scene.geometry, n, Some(k))?;
        }
        Sweep::ScalingN { values } => {
            scene.geometry = resize_panels(&scene.geometry, values[index], None)?;
        }
        Sweep::LosNlos { values } => {
            scene.channel.blockage = match values[index] {
                LinkState::Los => None,
                LinkState::Nlos => Some(spec.channel.blockage_factor.unwrap_or(DEFAULT_BLOCKAGE)),
            }
        }
    }
    Ok(CellSetup { scene, samples })
}

struct CellOutcome {
    snr_boost_db: Option<f64>,
    squared_error: Option<f64>,
    error: Option<String>,
}

fn run_cell(
    config: &ExperimentConfig,
    setup: &CellSetup,
    algorithm: Algorithm,
    seed: u64,
) -> Result<CellOutcome> {
    let geometry = &setup.scene.geometry;
    let ensemble = ChannelEnsemble::build(geometry, &setup.scene.channel)?;
    let without = ensemble.without_panels();
    let run_seed = derive_seed(config.master_seed, seed);
    let sigma = config.meas_noise_sigma;

    let mut squared_error = None;
    let mut error = None;
    let selected = match algorithm {
        Algorithm::Zps => baselines::zps(ensemble.layout()),
        Algorithm::Genie => baselines::genie_closest_rotation(&ensemble)?,
        Algorithm::BeamScanning => {
            baselines::beam_scanning(&ensemble, setup.samples, sigma, run_seed)?
        }
        Algorithm::Bcm => {
            let table = if config.oracle_mode {
                bcm::exact_conditional_table(&ensemble)
            } else {
                bcm::build_gain_table(&collect_random(&ensemble, setup.samples, sigma, run_seed)?)?
            };
            let can_sense =
                geometry.panels.len() >= 2 && geometry.panels.iter().all(|p| p.supports_sensing());
            if config.sensing && can_sense {
                match sensing::localize_table(&table, geometry) {
                    Ok(est) => squared_error = Some(est.squared_error(geometry)),
                    Err(e) => error = Some(format!("sensing: {e}")),
                }
            }
            BcmResult::from_table(&table).theta_bcm
        }
    };
    Ok(CellOutcome {
        snr_boost_db: Some(snr_boost(&ensemble, &selected, &without)?),
        squared_error,
        error,
    })
}

/// Runs every cell; failures become records with `error` set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    config.validate()?;
    let base = load_scene_spec(&config.scene);
    let setups: Vec<Result<CellSetup>> = (0..config.sweep.len())
        .map(|i| cell_setup(config, &base, i))
        .collect();
    let mut cells = Vec::new();
    for &algorithm in &config.algorithms {
        for index in 0..config.sweep.len() {
            for &seed in &config.seeds {
                cells.push((algorithm, index, seed));
            }
        }
    }
    let records = cells
        .into_par_iter()
        .map(|(algorithm, index, seed)| {
            let start = Instant::now();
            let outcome = match &setups[index] {
                Ok(setup) => run_cell(config, setup, algorithm, seed),
                Err(e) => Err(Error::Experiment(e.to_string())),
            };
            let wall_time_s = start.elapsed().as_secs_f64();
            let (snr_boost_db, squared_error, error) = match outcome {
                Ok(o) => (o.snr_boost_db, o.squared_error, o.error),
                Err(e) => (None, None, Some(e.to_string())),
            };
            MetricRecord {
                algorithm,
                sweep_value: config.sweep.label(index),
                seed,
                snr_boost_db,
                squared_error,
                wall_time_s,
                error,
            }
        })
        .collect();
    Ok(records)
}
