//! TOML scene files.
//!
//! Positions are meters, angles degrees and transmit power dBm in the file;
//! everything is converted to radians and linear scale on load.
//!
//! ```toml
//! wavelength = 0.115            # or carrier_frequency_hz = 2.6e9
//! tx = [0.0, 0.53, 0.1]
//! rx = [4.51, -0.48, 0.1]
//!
//! [[panels]]
//! id = 1
//! center = [1.24, -1.25, 1.56]
//! boresight_azimuth_deg = 90.0
//! n_row = 10
//! n_col = 10
//! atom_spacing = 0.03
//! k_levels = 4
//!
//! [channel]
//! tx_power_dbm = 0.0
//! rician = { direct = 10.0, tx_panel = 10.0, panel_rx = 10.0 }
//! attenuation = { model = "per_class", direct = 1e-2, tx_panel = 3e-3, panel_rx = 3e-3 }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{
    dbm_to_linear, AttenuationModel, ChannelOptions, RicianFactors, DEFAULT_BLOCKAGE,
};
use crate::geometry::{MtsPanel, Point3, SceneGeometry, SPEED_OF_LIGHT};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub id: usize,
    pub center: Point3,
    pub boresight_azimuth_deg: f64,
    pub n_row: usize,
    pub n_col: usize,
    pub atom_spacing: f64,
    pub k_levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub tx_power_dbm: f64,
    pub attenuation: AttenuationModel,
    /// Omitted means no fading on any link.
    #[serde(default)]
    pub rician: Option<RicianFactors>,
    #[serde(default)]
    pub pure_los: bool,
    #[serde(default)]
    pub nlos: bool,
    #[serde(default)]
    pub blockage_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_frequency_hz: Option<f64>,
    pub tx: Point3,
    pub rx: Point3,
    #[serde(default)]
    pub panels: Vec<PanelSpec>,
    pub channel: ChannelSpec,
}

/// A validated scene together with its channel options.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub geometry: SceneGeometry,
    pub channel: ChannelOptions,
}

impl SceneSpec {
    pub fn wavelength(&self) -> Result<f64> {
        match (self.wavelength, self.carrier_frequency_hz) {
            (Some(w), None) => Ok(w),
            (None, Some(f)) if f > 0.0 => Ok(SPEED_OF_LIGHT / f),
            (None, Some(f)) => Err(Error::InvalidScene(format!(
                "carrier frequency {f} must be positive"
            ))),
            _ => Err(Error::InvalidScene(
                "exactly one of wavelength and carrier_frequency_hz is required".into(),
            )),
        }
    }

    pub fn build(&self) -> Result<Scene> {
        let panels = self
            .panels
            .iter()
            .map(|p| MtsPanel {
                panel_id: p.id,
                center: p.center,
                boresight_azimuth: p.boresight_azimuth_deg.to_radians(),
                n_row: p.n_row,
                n_col: p.n_col,
                atom_spacing: p.atom_spacing,
                k_levels: p.k_levels,
            })
            .collect();
        let geometry = SceneGeometry::new(self.tx, self.rx, panels, self.wavelength()?)?;
        let c = &self.channel;
        let rician = match (c.pure_los, c.rician) {
            (true, _) | (false, None) => RicianFactors::pure_los(),
            (false, Some(r)) => r,
        };
        let blockage = match (c.nlos, c.blockage_factor) {
            (false, _) => None,
            (true, b) => Some(b.unwrap_or(DEFAULT_BLOCKAGE)),
        };
        Ok(Scene {
            geometry,
            channel: ChannelOptions {
                attenuation: c.attenuation.clone(),
                rician,
                tx_power: dbm_to_linear(c.tx_power_dbm),
                blockage,
            },
        })
    }
}

pub fn parse_scene_spec(text: &str, origin: &Path) -> Result<SceneSpec> {
    toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_scene_spec(path: &Path) -> Result<SceneSpec> {
    parse_scene_spec(&std::fs::read_to_string(path)?, path)
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    load_scene_spec(path)?.build()
}

pub fn to_toml(spec: &SceneSpec) -> Result<String> {
    toml::to_string(spec).map_err(|e| Error::Format(e.to_string()))
}
