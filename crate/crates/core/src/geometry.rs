//! Scene placement, link angles and the line-of-sight phase model.
//!
//! World frame: `x`, `y` horizontal, `z` up, meters. Panels are vertical
//! planes. A panel's local frame is spanned by its horizontal normal
//! (boresight), a horizontal column axis obtained by rotating the normal
//! 90° counter-clockwise, and the vertical row axis. Row index `u` grows
//! upward, column index `v` grows along the column axis.
//!
//! Azimuth is measured in the horizontal plane from the boresight,
//! counter-clockwise positive, so the world bearing of an endpoint seen from
//! a panel is `boresight_azimuth + azimuth`. Elevation is measured from the
//! horizontal plane.

use std::f64::consts::TAU;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::phase::{wrap_pi, wrap_two_pi};
use crate::{Error, Result};

pub type Point3 = [f64; 3];

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this are treated as coincident points.
const MIN_DISTANCE: f64 = 1e-9;

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn distance(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    dot(d, d).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtsPanel {
    pub panel_id: usize,
    pub center: Point3,
    /// Horizontal direction of the panel normal, radians counter-clockwise from +x.
    pub boresight_azimuth: f64,
    pub n_row: usize,
    pub n_col: usize,
    /// Spacing between adjacent meta-atoms, meters.
    pub atom_spacing: f64,
    /// Number of phase levels `K`; level `k` applies phase `k·2π/K`.
    pub k_levels: usize,
}

impl MtsPanel {
    pub fn num_atoms(&self) -> usize {
        self.n_row * self.n_col
    }

    pub fn omega(&self) -> f64 {
        TAU / self.k_levels as f64
    }

    pub fn normal(&self) -> Point3 {
        let (s, c) = self.boresight_azimuth.sin_cos();
        [c, s, 0.0]
    }

    pub fn column_axis(&self) -> Point3 {
        let (s, c) = self.boresight_azimuth.sin_cos();
        [-s, c, 0.0]
    }

    /// Adjacent-pair differences exist in both directions.
    pub fn supports_sensing(&self) -> bool {
        self.n_row >= 2 && self.n_col >= 2
    }

    pub fn shape(&self) -> PanelShape {
        PanelShape {
            n_row: self.n_row,
            n_col: self.n_col,
            k_levels: self.k_levels,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_row == 0 || self.n_col == 0 {
            return Err(Error::InvalidScene(format!(
                "panel {} has an empty atom grid",
                self.panel_id
            )));
        }
        if !(self.atom_spacing > 0.0 && self.atom_spacing.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "panel {} atom spacing must be positive",
                self.panel_id
            )));
        }
        if self.k_levels < 2 || self.k_levels > u16::MAX as usize {
            return Err(Error::InvalidScene(format!(
                "panel {} needs at least 2 phase levels",
                self.panel_id
            )));
        }
        if !self.boresight_azimuth.is_finite() || self.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "panel {} placement is not finite",
                self.panel_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub tx_position: Point3,
    pub rx_position: Point3,
    pub panels: Vec<MtsPanel>,
    /// Carrier wavelength, meters.
    pub wavelength: f64,
}

impl SceneGeometry {
    pub fn new(
        tx_position: Point3,
        rx_position: Point3,
        panels: Vec<MtsPanel>,
        wavelength: f64,
    ) -> Result<Self> {
        let scene = SceneGeometry {
            tx_position,
            rx_position,
            panels,
            wavelength,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidScene("wavelength must be positive".into()));
        }
        if self
            .tx_position
            .iter()
            .chain(self.rx_position.iter())
            .any(|c| !c.is_finite())
        {
            return Err(Error::InvalidScene(
                "endpoint position is not finite".into(),
            ));
        }
        if distance(self.tx_position, self.rx_position) < MIN_DISTANCE {
            return Err(Error::DegenerateGeometry(
                "transmitter and receiver coincide".into(),
            ));
        }
        for (i, panel) in self.panels.iter().enumerate() {
            panel.validate()?;
            for other in &self.panels[..i] {
                if distance(panel.center, other.center) < MIN_DISTANCE {
                    return Err(Error::DegenerateGeometry(format!(
                        "panels {} and {} share a center",
                        other.panel_id, panel.panel_id
                    )));
                }
            }
            angles_from_panel(panel, i, self.tx_position)?;
            angles_from_panel(panel, i, self.rx_position)?;
        }
        Ok(())
    }

    /// Phase per meter of path, `-2π/λ`.
    pub fn xi(&self) -> f64 {
        -TAU / self.wavelength
    }

    pub fn direct_distance(&self) -> f64 {
        distance(self.tx_position, self.rx_position)
    }

    pub fn num_atoms(&self) -> usize {
        self.panels.iter().map(MtsPanel::num_atoms).sum()
    }

    pub fn layout(&self) -> AtomLayout {
        AtomLayout::new(self.panels.iter().map(MtsPanel::shape).collect())
            .expect("validated panels give a valid layout")
    }

    /// Same scene moved rigidly by `offset`.
    pub fn translated(&self, offset: Point3) -> SceneGeometry {
        let shift = |p: Point3| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]];
        SceneGeometry {
            tx_position: shift(self.tx_position),
            rx_position: shift(self.rx_position),
            panels: self
                .panels
                .iter()
                .map(|p| MtsPanel {
                    center: shift(p.center),
                    ..p.clone()
                })
                .collect(),
            wavelength: self.wavelength,
        }
    }

    /// Short content hash identifying the scene in dataset headers.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scene serializes");
        let digest = Sha256::digest(&canonical);
        hex::encode(&digest[..8])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Tx,
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAngles {
    /// Radians from boresight, in `(-π/2, π/2)`.
    pub azimuth: f64,
    /// Radians above the horizontal plane, in `(-π/2, π/2)`.
    pub elevation: f64,
    pub distance: f64,
}

fn angles_from_panel(panel: &MtsPanel, index: usize, point: Point3) -> Result<LinkAngles> {
    let r = sub(point, panel.center);
    let d = dot(r, r).sqrt();
    if d < MIN_DISTANCE {
        return Err(Error::DegenerateGeometry(format!(
            "endpoint coincides with the center of panel {}",
            panel.panel_id
        )));
    }
    let along_normal = dot(r, panel.normal());
    if along_normal <= 0.0 {
        return Err(Error::BehindPanel { panel: index });
    }
    let along_columns = dot(r, panel.column_axis());
    Ok(LinkAngles {
        azimuth: along_columns.atan2(along_normal),
        elevation: r[2].atan2(along_normal.hypot(along_columns)),
        distance: d,
    })
}

/// Angles and distance of the transmitter or receiver seen from panel `panel`.
pub fn link_angles(scene: &SceneGeometry, panel: usize, endpoint: Endpoint) -> Result<LinkAngles> {
    let p = panel_ref(scene, panel)?;
    let point = match endpoint {
        Endpoint::Tx => scene.tx_position,
        Endpoint::Rx => scene.rx_position,
    };
    angles_from_panel(p, panel, point)
}

fn panel_ref(scene: &SceneGeometry, panel: usize) -> Result<&MtsPanel> {
    scene.panels.get(panel).ok_or_else(|| {
        Error::InvalidScene(format!(
            "panel index {panel} out of range ({} panels)",
            scene.panels.len()
        ))
    })
}

/// Row-major `n_row × n_col` table of per-atom values; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelGrid {
    pub n_row: usize,
    pub n_col: usize,
    pub values: Vec<f64>,
}

impl PanelGrid {
    pub fn new(n_row: usize, n_col: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_row * n_col {
            return Err(Error::DimensionMismatch {
                expected: n_row * n_col,
                found: values.len(),
            });
        }
        Ok(PanelGrid {
            n_row,
            n_col,
            values,
        })
    }

    pub fn from_fn(n_row: usize, n_col: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_row * n_col);
        for u in 0..n_row {
            for v in 0..n_col {
                values.push(f(u, v));
            }
        }
        PanelGrid {
            n_row,
            n_col,
            values,
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[u * self.n_col + v]
    }
}

/// Line-of-sight phases, radians in `(-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelLosPhases {
    pub direct: f64,
    pub tx_hop: PanelGrid,
    pub rx_hop: PanelGrid,
}

struct HopPhases {
    direct: f64,
    tx_hop: Vec<f64>,
    rx_hop: Vec<f64>,
}

// Unwrapped phases. Atom indices enter 1-based, with no centering offset.
//
// Sign convention: the two hop phases are chosen so that their sum is the
// reflected phase whose difference from the direct phase steps by
// ξ·d_M·(sin φ_r − sin φ_t) per row and ξ·d_M·(sin ψ_t cos φ_t − sin ψ_r cos φ_r)
// per column. The angle estimators in `sensing` invert exactly these steps.
fn hop_phases(scene: &SceneGeometry, panel: usize) -> Result<HopPhases> {
    let p = panel_ref(scene, panel)?;
    let t = link_angles(scene, panel, Endpoint::Tx)?;
    let r = link_angles(scene, panel, Endpoint::Rx)?;
    let xi = scene.xi();
    let dm = p.atom_spacing;
    let t_row = t.elevation.sin();
    let t_col = t.azimuth.sin() * t.elevation.cos();
    let r_row = r.elevation.sin();
    let r_col = r.azimuth.sin() * r.elevation.cos();

    let n = p.num_atoms();
    let mut tx_hop = Vec::with_capacity(n);
    let mut rx_hop = Vec::with_capacity(n);
    for u in 1..=p.n_row {
        for v in 1..=p.n_col {
            let (uf, vf) = (u as f64, v as f64);
            tx_hop.push(xi * dm * (uf * t_row - vf * t_col) - xi * t.distance);
            rx_hop.push(xi * dm * (vf * r_col - uf * r_row) + xi * r.distance);
        }
    }
    Ok(HopPhases {
        direct: xi * scene.direct_distance(),
        tx_hop,
        rx_hop,
    })
}

/// Line-of-sight phases of the direct link and of both hops of every atom of `panel`.
pub fn los_phases(scene: &SceneGeometry, panel: usize) -> Result<PanelLosPhases> {
    let p = panel_ref(scene, panel)?;
    let h = hop_phases(scene, panel)?;
    Ok(PanelLosPhases {
        direct: wrap_pi(h.direct),
        tx_hop: PanelGrid::new(
            p.n_row,
            p.n_col,
            h.tx_hop.into_iter().map(wrap_pi).collect(),
        )?,
        rx_hop: PanelGrid::new(
            p.n_row,
            p.n_col,
            h.rx_hop.into_iter().map(wrap_pi).collect(),
        )?,
    })
}

/// Direct phase minus both hop phases, in `(0, 2π]`.
pub fn phase_difference(direct: f64, tx_hop: f64, rx_hop: f64) -> f64 {
    wrap_two_pi(direct - tx_hop - rx_hop)
}

/// Per-atom phase difference `Δ` from the three line-of-sight phases.
pub fn true_phase_difference(scene: &SceneGeometry, panel: usize) -> Result<PanelGrid> {
    let p = panel_ref(scene, panel)?;
    let h = hop_phases(scene, panel)?;
    let values = h
        .tx_hop
        .iter()
        .zip(&h.rx_hop)
        .map(|(&t, &r)| phase_difference(h.direct, t, r))
        .collect();
    PanelGrid::new(p.n_row, p.n_col, values)
}

/// Per-atom `Δ` written directly in terms of the transmitter angles; equal to
/// [`true_phase_difference`] modulo rounding.
pub fn phase_difference_expansion(scene: &SceneGeometry, panel: usize) -> Result<PanelGrid> {
    let p = panel_ref(scene, panel)?;
    let t = link_angles(scene, panel, Endpoint::Tx)?;
    let r = link_angles(scene, panel, Endpoint::Rx)?;
    let xi = scene.xi();
    let dm = p.atom_spacing;
    let col_term = r.azimuth.sin() * r.elevation.cos() - t.azimuth.sin() * t.elevation.cos();
    let row_term = t.elevation.sin() - r.elevation.sin();
    let constant = xi * scene.direct_distance() + xi * (t.distance - r.distance);
    Ok(PanelGrid::from_fn(p.n_row, p.n_col, |u, v| {
        let (uf, vf) = ((u + 1) as f64, (v + 1) as f64);
        wrap_two_pi(constant - xi * dm * vf * col_term - xi * dm * uf * row_term)
    }))
}

/// Exact (unwrapped) change of `Δ` between row-adjacent and column-adjacent atoms.
pub fn adjacent_phase_steps(scene: &SceneGeometry, panel: usize) -> Result<(f64, f64)> {
    let p = panel_ref(scene, panel)?;
    let t = link_angles(scene, panel, Endpoint::Tx)?;
    let r = link_angles(scene, panel, Endpoint::Rx)?;
    let k = scene.xi() * p.atom_spacing;
    let row = k * (r.elevation.sin() - t.elevation.sin());
    let col = k * (t.azimuth.sin() * t.elevation.cos() - r.azimuth.sin() * r.elevation.cos());
    Ok((row, col))
}

/// Whether wrapping adjacent differences to `(-π, π]` loses the true step.
pub fn admits_aliasing(scene: &SceneGeometry, panel: usize) -> Result<bool> {
    let (row, col) = adjacent_phase_steps(scene, panel)?;
    let limit = std::f64::consts::PI;
    Ok(row.abs() >= limit || col.abs() >= limit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelShape {
    pub n_row: usize,
    pub n_col: usize,
    pub k_levels: usize,
}

/// Flat indexing of all meta-atoms: panel-major, then row-major within a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomLayout {
    shapes: Vec<PanelShape>,
    panel_offsets: Vec<usize>,
    atom_panel: Vec<u32>,
    level_offsets: Vec<usize>,
    phasors: Vec<Complex64>,
}

impl AtomLayout {
    pub fn new(shapes: Vec<PanelShape>) -> Result<Self> {
        let mut panel_offsets = vec![0];
        let mut atom_panel = Vec::new();
        let mut level_offsets = vec![0];
        let mut phasors = Vec::new();
        for (l, s) in shapes.iter().enumerate() {
            if s.n_row == 0 || s.n_col == 0 || s.k_levels < 2 || s.k_levels > u16::MAX as usize {
                return Err(Error::InvalidScene(format!(
                    "invalid shape for panel {l}: {s:?}"
                )));
            }
            let n = s.n_row * s.n_col;
            panel_offsets.push(panel_offsets[l] + n);
            let omega = TAU / s.k_levels as f64;
            let table: Vec<Complex64> = (0..s.k_levels)
                .map(|k| Complex64::from_polar(1.0, k as f64 * omega))
                .collect();
            for _ in 0..n {
                atom_panel.push(l as u32);
                level_offsets.push(level_offsets.last().unwrap() + s.k_levels);
                phasors.extend_from_slice(&table);
            }
        }
        Ok(AtomLayout {
            shapes,
            panel_offsets,
            atom_panel,
            level_offsets,
            phasors,
        })
    }

    pub fn shapes(&self) -> &[PanelShape] {
        &self.shapes
    }

    pub fn num_panels(&self) -> usize {
        self.shapes.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.atom_panel.len()
    }

    pub fn panel_atoms(&self, panel: usize) -> Range<usize> {
        self.panel_offsets[panel]..self.panel_offsets[panel + 1]
    }

    /// `(panel, u, v)` of flat atom `atom`, all 0-based.
    pub fn atom_position(&self, atom: usize) -> (usize, usize, usize) {
        let l = self.atom_panel[atom] as usize;
        let local = atom - self.panel_offsets[l];
        let n_col = self.shapes[l].n_col;
        (l, local / n_col, local % n_col)
    }

    pub fn levels(&self, atom: usize) -> usize {
        self.shapes[self.atom_panel[atom] as usize].k_levels
    }

    pub fn omega(&self, atom: usize) -> f64 {
        TAU / self.levels(atom) as f64
    }

    /// Start of `atom`'s block in per-(atom, level) tables.
    pub fn level_offset(&self, atom: usize) -> usize {
        self.level_offsets[atom]
    }

    pub fn total_levels(&self) -> usize {
        *self.level_offsets.last().unwrap()
    }

    /// `e^{j k ω}` for level `k` of `atom`.
    #[inline]
    pub fn phasor(&self, atom: usize, k: u16) -> Complex64 {
        self.phasors[self.level_offsets[atom] + k as usize]
    }

    /// Compact text form, e.g. `10x10x4;10x10x4`.
    pub fn describe(&self) -> String {
        self.shapes
            .iter()
            .map(|s| format!("{}x{}x{}", s.n_row, s.n_col, s.k_levels))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn parse_description(text: &str) -> Result<Self> {
        let bad = || Error::Format(format!("bad panel description {text:?}"));
        let mut shapes = Vec::new();
        for part in text.split(';').filter(|p| !p.is_empty()) {
            let dims: Vec<usize> = part
                .split('x')
                .map(|d| d.trim().parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if dims.len() != 3 {
                return Err(bad());
            }
            shapes.push(PanelShape {
                n_row: dims[0],
                n_col: dims[1],
                k_levels: dims[2],
            });
        }
        AtomLayout::new(shapes)
    }
}
