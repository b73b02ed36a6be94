//! Reference configurators: zero phase shifts, best-of-random beam scanning,
//! and a genie that knows the mean channels.

use crate::channel::ChannelEnsemble;
use crate::geometry::AtomLayout;
use crate::phase::argmax_first;
use crate::sampling::{collect_random, PhaseConfig, RssDataset};
use crate::{Error, Result};

pub fn zps(layout: &AtomLayout) -> PhaseConfig {
    PhaseConfig::zeros(layout)
}

/// Configuration with the largest measured RSS; the earliest one wins ties.
pub fn best_measured(dataset: &RssDataset) -> Result<PhaseConfig> {
    if dataset.is_empty() {
        return Err(Error::EmptySchedule);
    }
    Ok(dataset.schedule.config(argmax_first(&dataset.rss)))
}

/// Measures `samples` random configurations exactly as the BCM dataset of the
/// same seed would, and keeps the best one.
pub fn beam_scanning(
    ensemble: &ChannelEnsemble,
    samples: usize,
    meas_noise_sigma: f64,
    seed: u64,
) -> Result<PhaseConfig> {
    best_measured(&collect_random(ensemble, samples, meas_noise_sigma, seed)?)
}

/// Rotates every mean reflected channel onto the grid level closest to the
/// mean direct channel.
pub fn genie_closest_rotation(ensemble: &ChannelEnsemble) -> Result<PhaseConfig> {
    let hd = ensemble.direct_mean();
    if hd.norm() == 0.0 || hd.norm().is_nan() {
        return Err(Error::UndefinedReference);
    }
    let reference = hd.arg();
    let layout = ensemble.layout();
    let mut scores = Vec::new();
    let indices = (0..layout.num_atoms())
        .map(|atom| {
            let rotation = ensemble.reflected_mean(atom).arg() - reference;
            let omega = layout.omega(atom);
            scores.clear();
            scores.extend((0..layout.levels(atom)).map(|k| (k as f64 * omega + rotation).cos()));
            argmax_first(&scores) as u16
        })
        .collect();
    PhaseConfig::new(layout, indices)
}
