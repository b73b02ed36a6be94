//! Shared scene generators and independent geometric oracles for the
//! integration tests.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use mts_bcm::channel::{AttenuationModel, ChannelEnsemble, ChannelOptions, RicianFactors};
use mts_bcm::geometry::{MtsPanel, SceneGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const WAVELENGTH: f64 = 0.125;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn panel(
    id: usize,
    center: [f64; 3],
    azimuth: f64,
    n: usize,
    spacing: f64,
    k: usize,
) -> MtsPanel {
    MtsPanel {
        panel_id: id,
        center,
        boresight_azimuth: azimuth,
        n_row: n,
        n_col: n,
        atom_spacing: spacing,
        k_levels: k,
    }
}

pub fn per_class() -> AttenuationModel {
    AttenuationModel::PerClass {
        direct: 1e-4,
        tx_panel: 1e-2,
        panel_rx: 1e-2,
    }
}

pub fn pure_los(scene: &SceneGeometry) -> ChannelEnsemble {
    ChannelEnsemble::build(scene, &ChannelOptions::pure_los(per_class(), 1.0)).unwrap()
}

pub fn rician(scene: &SceneGeometry, delta: f64, tx_power: f64) -> ChannelEnsemble {
    let opts = ChannelOptions {
        attenuation: per_class(),
        rician: RicianFactors::uniform(delta),
        tx_power,
        blockage: None,
    };
    ChannelEnsemble::build(scene, &opts).unwrap()
}

/// Angles of `point` seen from `p`, from plain vector algebra in world
/// coordinates: (elevation above horizontal, azimuth from boresight).
pub fn angles_from(p: &MtsPanel, point: [f64; 3]) -> (f64, f64) {
    let d = [
        point[0] - p.center[0],
        point[1] - p.center[1],
        point[2] - p.center[2],
    ];
    let horizontal = d[0].hypot(d[1]);
    let elevation = d[2].atan2(horizontal);
    let mut azimuth = d[1].atan2(d[0]) - p.boresight_azimuth;
    while azimuth > PI {
        azimuth -= TAU;
    }
    while azimuth <= -PI {
        azimuth += TAU;
    }
    (elevation, azimuth)
}

/// Intersection of two horizontal rays given by origin and world bearing,
/// via a 2x2 cross-product solve.
pub fn ray_intersection(o1: [f64; 2], b1: f64, o2: [f64; 2], b2: f64) -> Option<[f64; 2]> {
    let (d1, d2) = ([b1.cos(), b1.sin()], [b2.cos(), b2.sin()]);
    let cross = d1[0] * d2[1] - d1[1] * d2[0];
    if cross.abs() < 1e-6 {
        return None;
    }
    let w = [o2[0] - o1[0], o2[1] - o1[1]];
    let s = (w[0] * d2[1] - w[1] * d2[0]) / cross;
    Some([o1[0] + s * d1[0], o1[1] + s * d1[1]])
}

pub struct SceneOptions {
    pub n: usize,
    pub k: usize,
    pub spacing: f64,
}

impl Default for SceneOptions {
    fn default() -> Self {
        SceneOptions {
            n: 8,
            k: 16,
            spacing: WAVELENGTH / 4.0,
        }
    }
}

fn far_field_distance(o: &SceneOptions) -> f64 {
    let aperture = (o.n as f64 * o.spacing) * 2f64.sqrt();
    2.0 * aperture * aperture / WAVELENGTH
}

/// Two wall panels facing each other across a room, transmitter and receiver
/// between them. Rejects draws where either bearing is nearly perpendicular
/// to the x axis, the bearings are nearly parallel, or an endpoint is inside
/// a panel's near field.
pub fn facing_panels_scene(seed: u64, o: &SceneOptions) -> SceneGeometry {
    let mut r = rng(seed);
    let ff = far_field_distance(o);
    loop {
        let half_width = r.random_range(3.0..4.0);
        let p1 = panel(
            1,
            [
                r.random_range(0.5..5.5),
                -half_width,
                r.random_range(1.5..2.5),
            ],
            FRAC_PI_2,
            o.n,
            o.spacing,
            o.k,
        );
        let p2 = panel(
            2,
            [
                r.random_range(0.5..5.5),
                half_width,
                r.random_range(1.5..2.5),
            ],
            -FRAC_PI_2,
            o.n,
            o.spacing,
            o.k,
        );
        let tx = [
            r.random_range(0.0..6.0),
            r.random_range(-1.2..1.2),
            r.random_range(0.5..1.5),
        ];
        let rx = [
            r.random_range(0.0..6.0),
            r.random_range(-1.2..1.2),
            r.random_range(0.5..1.5),
        ];
        let scene = SceneGeometry::new(tx, rx, vec![p1, p2], WAVELENGTH).unwrap();
        if well_conditioned(&scene, ff) {
            return scene;
        }
    }
}

fn well_conditioned(scene: &SceneGeometry, far_field: f64) -> bool {
    let mut bearings = Vec::new();
    for p in &scene.panels {
        for point in [scene.tx_position, scene.rx_position] {
            let d = mts_bcm::geometry::distance(p.center, point);
            if d < far_field {
                return false;
            }
        }
        let (_, psi) = angles_from(p, scene.tx_position);
        let bearing = p.boresight_azimuth + psi;
        if bearing.cos().abs() < 0.05 || psi.abs() > 1.2 {
            return false;
        }
        bearings.push(bearing);
    }
    (bearings[0] - bearings[1]).sin().abs() > 0.2
}

/// Adjacent-atom steps of the true phase difference, from the plane-wave
/// path-length model with phase growing by `2π/λ` per meter:
/// `(row step, column step)`.
pub fn true_steps(scene: &SceneGeometry, p: &MtsPanel) -> (f64, f64) {
    let (phi_t, psi_t) = angles_from(p, scene.tx_position);
    let (phi_r, psi_r) = angles_from(p, scene.rx_position);
    let kd = TAU / scene.wavelength * p.atom_spacing;
    (
        kd * (phi_r.sin() - phi_t.sin()),
        kd * (psi_t.sin() * phi_t.cos() - psi_r.sin() * phi_r.cos()),
    )
}

fn asin_clamped(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).asin()
}

/// Worst-case squared localization error when every recovered phase
/// difference is off the truth by at most half a grid step, so every
/// adjacent difference is off by at most one step `ω`.
///
/// Elevation is monotone in the row error, so its range is exact. The
/// azimuth range is swept over a fine elevation grid with the column error
/// at both extremes. Position error is maximized over a grid of the two
/// azimuth ranges (corners included) using ray intersection, then inflated
/// by 10% to cover grid resolution. Returns `None` if the box reaches a
/// wrap, a pole or parallel bearings, where no finite bound exists.
pub fn quantization_bound(scene: &SceneGeometry) -> Option<f64> {
    let mut psi_ranges = Vec::new();
    for p in &scene.panels {
        let omega = TAU / p.k_levels as f64;
        let kd = TAU / scene.wavelength * p.atom_spacing;
        let (row, col) = true_steps(scene, p);
        if row.abs() + omega >= PI || col.abs() + omega >= PI {
            return None;
        }
        let (phi_t, _) = angles_from(p, scene.tx_position);
        let (phi_r, psi_r) = angles_from(p, scene.rx_position);
        let phi_lo = asin_clamped(phi_t.sin() - omega / kd);
        let phi_hi = asin_clamped(phi_t.sin() + omega / kd);
        if phi_lo.abs().max(phi_hi.abs()) > FRAC_PI_2 - 1e-3 {
            return None;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let steps = 400;
        let mut phis: Vec<f64> = (0..=steps)
            .map(|i| phi_lo + (phi_hi - phi_lo) * i as f64 / steps as f64)
            .collect();
        if phi_lo < 0.0 && phi_hi > 0.0 {
            phis.push(0.0);
        }
        for phi in phis {
            for eps in [-omega, omega] {
                let arg = (col + eps) / (kd * phi.cos()) + psi_r.sin() * phi_r.cos() / phi.cos();
                let psi = asin_clamped(arg);
                lo = lo.min(psi);
                hi = hi.max(psi);
            }
        }
        psi_ranges.push((lo, hi));
    }

    let (p1, p2) = (&scene.panels[0], &scene.panels[1]);
    let truth = [scene.tx_position[0], scene.tx_position[1]];
    let grid = 20;
    let at = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / grid as f64;
    let mut worst: f64 = 0.0;
    for i in 0..=grid {
        for j in 0..=grid {
            let b1 = p1.boresight_azimuth + at(psi_ranges[0], i);
            let b2 = p2.boresight_azimuth + at(psi_ranges[1], j);
            let x = ray_intersection(
                [p1.center[0], p1.center[1]],
                b1,
                [p2.center[0], p2.center[1]],
                b2,
            )?;
            worst = worst.max((x[0] - truth[0]).powi(2) + (x[1] - truth[1]).powi(2));
        }
    }
    Some(1.1 * worst)
}
