//! Scaling studies: SNR growth with the number of atoms, and the cost of the
//! table post-processing in `N` and `K`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::resize_panels;
use crate::bcm::{self, GainAccumulator};
use crate::channel::{AttenuationModel, ChannelEnsemble, ChannelOptions};
use crate::geometry::{AtomLayout, MtsPanel, PanelShape, SceneGeometry};
use crate::sampling::collect_random;
use crate::scene_file::Scene;
use crate::Result;

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// One far-field pure-LOS panel whose direct link is as strong as one atom's
/// reflected link, so the coherent gain dominates quickly as `N` grows.
pub fn reference_scene(n_atoms: usize, k_levels: usize) -> Result<Scene> {
    let (rows, cols) = super::near_square(n_atoms);
    let geometry = SceneGeometry::new(
        [0.0, 0.0, 1.0],
        [6.0, 0.5, 1.2],
        vec![MtsPanel {
            panel_id: 1,
            center: [2.5, -3.0, 1.5],
            boresight_azimuth: FRAC_PI_2,
            n_row: rows,
            n_col: cols,
            atom_spacing: 0.03,
            k_levels,
        }],
        0.125,
    )?;
    Ok(Scene {
        geometry,
        channel: ChannelOptions::pure_los(
            AttenuationModel::PerClass {
                direct: 1e-4,
                tx_panel: 1e-2,
                panel_rx: 1e-2,
            },
            1.0,
        ),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrPoint {
    pub n: usize,
    pub expected_snr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnrScaling {
    pub points: Vec<SnrPoint>,
    pub slope: f64,
}

/// Expected SNR of the BCM selection as every panel is resized to `N` atoms.
/// With `samples = None` the selection uses closed-form conditional means;
/// otherwise `samples(N)` random measurements drawn from `seed`.
pub fn snr_scaling(
    scene: &Scene,
    ns: &[usize],
    samples: Option<&dyn Fn(usize) -> usize>,
    meas_noise_sigma: f64,
    seed: u64,
) -> Result<SnrScaling> {
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let geometry = resize_panels(&scene.geometry, n, None)?;
        let ensemble = ChannelEnsemble::build(&geometry, &scene.channel)?;
        let table = match samples {
            None => bcm::exact_conditional_table(&ensemble),
            Some(f) => {
                bcm::build_gain_table(&collect_random(&ensemble, f(n), meas_noise_sigma, seed)?)?
            }
        };
        let config = bcm::select_phases(&table);
        points.push(SnrPoint {
            n,
            expected_snr: ensemble.expected_snr(&config)?,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.expected_snr).collect();
    Ok(SnrScaling {
        slope: loglog_slope(&xs, &ys),
        points,
    })
}

/// Accumulator over `samples` cyclic configurations (`atom + t mod K`), which
/// fills every bin whenever `samples ≥ K`.
pub fn cyclic_accumulator(
    n_atoms: usize,
    k_levels: usize,
    samples: usize,
) -> Result<GainAccumulator> {
    let layout = Arc::new(AtomLayout::new(vec![PanelShape {
        n_row: 1,
        n_col: n_atoms,
        k_levels,
    }])?);
    let mut acc = GainAccumulator::new(layout);
    let mut row = vec![0u16; n_atoms];
    for t in 0..samples {
        for (a, k) in row.iter_mut().enumerate() {
            *k = ((a + t) % k_levels) as u16;
        }
        acc.push(&row, 1.0 + (t % 7) as f64)?;
    }
    Ok(acc)
}

/// Median wall time of turning a filled accumulator into a selection and a
/// phase-difference estimate (the part that does not depend on `T`).
pub fn postprocessing_time(
    n_atoms: usize,
    k_levels: usize,
    samples: usize,
    reps: usize,
) -> Result<f64> {
    let acc = cyclic_accumulator(n_atoms, k_levels, samples)?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let work = acc.clone();
        let start = Instant::now();
        let table = work.finish()?;
        let config = bcm::select_phases(&table);
        let delta = bcm::recover_delta(&table);
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box((config, delta));
    }
    Ok(median(&mut times))
}

/// Median wall time of accumulating `samples` cyclic rows, finishing and selecting.
pub fn build_select_time(
    n_atoms: usize,
    k_levels: usize,
    samples: usize,
    reps: usize,
) -> Result<f64> {
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        let table = cyclic_accumulator(n_atoms, k_levels, samples)?.finish()?;
        std::hint::black_box(bcm::select_phases(&table));
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(&mut times))
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingStudy {
    pub n_atoms: usize,
    pub k_levels: usize,
    pub samples: usize,
    pub base_s: f64,
    pub doubled_n_s: f64,
    pub doubled_k_s: f64,
}

impl TimingStudy {
    pub fn ratio_n(&self) -> f64 {
        self.doubled_n_s / self.base_s
    }

    pub fn ratio_k(&self) -> f64 {
        self.doubled_k_s / self.base_s
    }
}

pub fn timing_study(
    n_atoms: usize,
    k_levels: usize,
    samples: usize,
    reps: usize,
) -> Result<TimingStudy> {
    // Warm up allocator and caches once before measuring.
    postprocessing_time(n_atoms, k_levels, samples, 1)?;
    Ok(TimingStudy {
        n_atoms,
        k_levels,
        samples,
        base_s: postprocessing_time(n_atoms, k_levels, samples, reps)?,
        doubled_n_s: postprocessing_time(2 * n_atoms, k_levels, samples, reps)?,
        doubled_k_s: postprocessing_time(n_atoms, 2 * k_levels, samples, reps)?,
    })
}
