//! Angle-of-arrival estimation from recovered phase differences and
//! two-anchor triangulation of the transmitter.
//!
//! Adjacent-atom differences of `Δ` are linear in the sines of the
//! transmitter angles seen from a panel. With the receiver angles known, each
//! adjacent pair yields one angle estimate; estimates are averaged per panel.
//! Bearings from two panels intersect at the transmitter's horizontal position.

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::bcm::{build_gain_table, recover_delta, GainTable};
use crate::geometry::{self, Endpoint, MtsPanel, PanelGrid, SceneGeometry};
use crate::phase::wrap_pi;
use crate::sampling::RssDataset;
use crate::{Error, Result};

/// Threshold shared by the near-polar, tangent and parallel-bearing guards.
pub const DEGENERACY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct AngleEstimate {
    /// Radians in `[-π/2, π/2]`.
    pub value: f64,
    /// Pairs whose arcsin argument fell outside `[-1, 1]` and was clamped.
    pub clamps: usize,
    /// Pairs whose raw difference left `(-π, π]` and was wrapped.
    pub wraps: usize,
    pub pairs: usize,
}

fn clamped_asin(x: f64, clamps: &mut usize) -> f64 {
    if !(-1.0..=1.0).contains(&x) {
        *clamps += 1;
    }
    x.clamp(-1.0, 1.0).asin()
}

fn wrapped_diff(a: f64, b: f64, wraps: &mut usize) -> f64 {
    let raw = a - b;
    let w = wrap_pi(raw);
    if w != raw {
        *wraps += 1;
    }
    w
}

fn sensing_panel(scene: &SceneGeometry, panel: usize) -> Result<&MtsPanel> {
    let p = scene
        .panels
        .get(panel)
        .ok_or_else(|| Error::InvalidScene(format!("panel index {panel} out of range")))?;
    Ok(p)
}

fn check_grid(p: &MtsPanel, delta: &PanelGrid) -> Result<()> {
    if delta.n_row != p.n_row || delta.n_col != p.n_col {
        return Err(Error::DimensionMismatch {
            expected: p.num_atoms(),
            found: delta.values.len(),
        });
    }
    Ok(())
}

/// Elevation of the transmitter seen from `panel`, from vertically adjacent pairs.
pub fn estimate_elevation(
    scene: &SceneGeometry,
    panel: usize,
    delta: &PanelGrid,
    known_phi_r: f64,
) -> Result<AngleEstimate> {
    let p = sensing_panel(scene, panel)?;
    check_grid(p, delta)?;
    if p.n_row < 2 {
        return Err(Error::UnsupportedPanel {
            panel,
            n_row: p.n_row,
            n_col: p.n_col,
        });
    }
    let scale = scene.xi() * p.atom_spacing;
    let sin_r = known_phi_r.sin();
    let mut est = AngleEstimate::default();
    let mut sum = 0.0;
    for u in 0..p.n_row - 1 {
        for v in 0..p.n_col {
            let diff = wrapped_diff(delta.get(u + 1, v), delta.get(u, v), &mut est.wraps);
            sum += clamped_asin(sin_r - diff / scale, &mut est.clamps);
            est.pairs += 1;
        }
    }
    est.value = (sum / est.pairs as f64).clamp(-FRAC_PI_2, FRAC_PI_2);
    Ok(est)
}

/// Azimuth of the transmitter seen from `panel`, from horizontally adjacent pairs.
pub fn estimate_azimuth(
    scene: &SceneGeometry,
    panel: usize,
    delta: &PanelGrid,
    known_psi_r: f64,
    known_phi_r: f64,
    phi_hat: f64,
) -> Result<AngleEstimate> {
    let p = sensing_panel(scene, panel)?;
    check_grid(p, delta)?;
    if p.n_col < 2 {
        return Err(Error::UnsupportedPanel {
            panel,
            n_row: p.n_row,
            n_col: p.n_col,
        });
    }
    let cos_hat = phi_hat.cos();
    if cos_hat < DEGENERACY_EPS {
        return Err(Error::NearPolar { phi_hat });
    }
    let scale = scene.xi() * p.atom_spacing * cos_hat;
    let offset = known_psi_r.sin() * known_phi_r.cos() / cos_hat;
    let mut est = AngleEstimate::default();
    let mut sum = 0.0;
    for u in 0..p.n_row {
        for v in 0..p.n_col - 1 {
            let diff = wrapped_diff(delta.get(u, v + 1), delta.get(u, v), &mut est.wraps);
            sum += clamped_asin(diff / scale + offset, &mut est.clamps);
            est.pairs += 1;
        }
    }
    est.value = (sum / est.pairs as f64).clamp(-FRAC_PI_2, FRAC_PI_2);
    Ok(est)
}

fn bearing_tangent(p: &MtsPanel, psi: f64, index: usize) -> Result<f64> {
    let beta = p.boresight_azimuth + psi;
    if beta.cos().abs() < DEGENERACY_EPS {
        return Err(Error::TangentSingularity { panel: index });
    }
    Ok(beta.tan())
}

/// Intersection of the horizontal bearing lines from two panels.
///
/// `psi_hat[i]` is the azimuth of the transmitter from the boresight of
/// `panels[i]`, counter-clockwise positive.
pub fn triangulate(psi_hat: [f64; 2], panels: [&MtsPanel; 2]) -> Result<[f64; 2]> {
    let t1 = bearing_tangent(panels[0], psi_hat[0], 0)?;
    let t2 = bearing_tangent(panels[1], psi_hat[1], 1)?;
    let denominator = t1 - t2;
    if denominator.abs() < DEGENERACY_EPS {
        return Err(Error::DegenerateTriangulation { denominator });
    }
    let [zx1, zy1, _] = panels[0].center;
    let [zx2, zy2, _] = panels[1].center;
    let px = ((t1 * zx1 - t2 * zx2) + (zy2 - zy1)) / denominator;
    // Both lines give a y; they agree up to rounding and the mean keeps
    // mirror-symmetric layouts exactly symmetric.
    let py = ((zy1 + t1 * (px - zx1)) + (zy2 + t2 * (px - zx2))) / 2.0;
    if !(px.is_finite() && py.is_finite()) {
        return Err(Error::DegenerateTriangulation { denominator });
    }
    Ok([px, py])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PanelDiagnostics {
    pub elevation: AngleEstimate,
    pub azimuth: AngleEstimate,
    pub aliasing_possible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingEstimate {
    pub phi_hat: Vec<f64>,
    pub psi_hat: Vec<f64>,
    pub position: [f64; 2],
    pub panels: Vec<PanelDiagnostics>,
    /// Panel pairs whose bearings were intersected and averaged.
    pub pairs_used: usize,
    /// Panel pairs skipped as degenerate (only when more than two panels).
    pub pairs_skipped: usize,
}

impl SensingEstimate {
    /// Squared horizontal distance to the scene's true transmitter.
    pub fn squared_error(&self, scene: &SceneGeometry) -> f64 {
        let dx = self.position[0] - scene.tx_position[0];
        let dy = self.position[1] - scene.tx_position[1];
        dx * dx + dy * dy
    }

    pub fn report(&self, scene: Option<&SceneGeometry>) -> SensingReport {
        SensingReport {
            elevation_deg: self.phi_hat.iter().map(|x| x.to_degrees()).collect(),
            azimuth_deg: self.psi_hat.iter().map(|x| x.to_degrees()).collect(),
            position_m: self.position,
            squared_error_m2: scene.map(|s| self.squared_error(s)),
            clamped_arcsin: self
                .panels
                .iter()
                .map(|d| d.elevation.clamps + d.azimuth.clamps)
                .sum(),
            wrapped_differences: self
                .panels
                .iter()
                .map(|d| d.elevation.wraps + d.azimuth.wraps)
                .sum(),
            pairs_used: self.pairs_used,
            pairs_skipped: self.pairs_skipped,
        }
    }
}

/// JSON-friendly summary with angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensingReport {
    pub elevation_deg: Vec<f64>,
    pub azimuth_deg: Vec<f64>,
    pub position_m: [f64; 2],
    pub squared_error_m2: Option<f64>,
    pub clamped_arcsin: usize,
    pub wrapped_differences: usize,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

/// Splits a flat per-atom table into one grid per panel.
pub fn split_by_panel(scene: &SceneGeometry, flat: &[f64]) -> Result<Vec<PanelGrid>> {
    if flat.len() != scene.num_atoms() {
        return Err(Error::DimensionMismatch {
            expected: scene.num_atoms(),
            found: flat.len(),
        });
    }
    let mut start = 0;
    scene
        .panels
        .iter()
        .map(|p| {
            let end = start + p.num_atoms();
            let grid = PanelGrid::new(p.n_row, p.n_col, flat[start..end].to_vec());
            start = end;
            grid
        })
        .collect()
}

/// Angles per panel from per-panel `Δ` grids, then the averaged pairwise position.
pub fn localize_from_delta(scene: &SceneGeometry, delta: &[PanelGrid]) -> Result<SensingEstimate> {
    if scene.panels.len() < 2 {
        return Err(Error::InvalidScene(
            "localization needs at least two panels".into(),
        ));
    }
    if delta.len() != scene.panels.len() {
        return Err(Error::DimensionMismatch {
            expected: scene.panels.len(),
            found: delta.len(),
        });
    }
    let mut phi_hat = Vec::with_capacity(delta.len());
    let mut psi_hat = Vec::with_capacity(delta.len());
    let mut panels = Vec::with_capacity(delta.len());
    for (l, grid) in delta.iter().enumerate() {
        let p = &scene.panels[l];
        if !p.supports_sensing() {
            return Err(Error::UnsupportedPanel {
                panel: l,
                n_row: p.n_row,
                n_col: p.n_col,
            });
        }
        let rx = geometry::link_angles(scene, l, Endpoint::Rx)?;
        let aliasing_possible = geometry::admits_aliasing(scene, l)?;
        if aliasing_possible {
            log::warn!("panel {l}: atom spacing admits phase-difference aliasing");
        }
        let elevation = estimate_elevation(scene, l, grid, rx.elevation)?;
        let azimuth = estimate_azimuth(scene, l, grid, rx.azimuth, rx.elevation, elevation.value)?;
        phi_hat.push(elevation.value);
        psi_hat.push(azimuth.value);
        panels.push(PanelDiagnostics {
            elevation,
            azimuth,
            aliasing_possible,
        });
    }

    let n = scene.panels.len();
    let (mut sum, mut used, mut skipped) = ([0.0, 0.0], 0, 0);
    let mut first_error = None;
    for i in 0..n {
        for j in i + 1..n {
            match triangulate(
                [psi_hat[i], psi_hat[j]],
                [&scene.panels[i], &scene.panels[j]],
            ) {
                Ok(p) => {
                    sum[0] += p[0];
                    sum[1] += p[1];
                    used += 1;
                }
                Err(e) if n == 2 => return Err(e),
                Err(e) => {
                    skipped += 1;
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    if used == 0 {
        return Err(first_error.expect("at least one pair was tried"));
    }
    Ok(SensingEstimate {
        phi_hat,
        psi_hat,
        position: [sum[0] / used as f64, sum[1] / used as f64],
        panels,
        pairs_used: used,
        pairs_skipped: skipped,
    })
}

pub fn localize_table(table: &GainTable, scene: &SceneGeometry) -> Result<SensingEstimate> {
    if table.layout().shapes() != scene.layout().shapes() {
        return Err(Error::DimensionMismatch {
            expected: scene.num_atoms(),
            found: table.layout().num_atoms(),
        });
    }
    let delta = recover_delta(table);
    localize_from_delta(scene, &split_by_panel(scene, &delta.delta_star)?)
}

pub fn localize(dataset: &RssDataset, scene: &SceneGeometry) -> Result<SensingEstimate> {
    localize_table(&build_gain_table(dataset)?, scene)
}
