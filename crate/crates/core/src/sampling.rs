//! Phase configurations, random schedules and RSS dataset collection.
//!
//! Sample `t` draws its fading and measurement noise from its own stream
//! keyed by `(seed, t)`, so a dataset does not depend on the thread count
//! and the first `T` samples of a longer run equal a run of length `T`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelEnsemble};
use crate::geometry::AtomLayout;
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 1 << 20;

/// One phase-level index per atom, in layout order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseConfig {
    indices: Vec<u16>,
}

impl PhaseConfig {
    pub fn new(layout: &AtomLayout, indices: Vec<u16>) -> Result<Self> {
        let config = PhaseConfig { indices };
        config.validate(layout)?;
        Ok(config)
    }

    pub fn zeros(layout: &AtomLayout) -> Self {
        PhaseConfig {
            indices: vec![0; layout.num_atoms()],
        }
    }

    pub fn validate(&self, layout: &AtomLayout) -> Result<()> {
        check_indices(layout, &self.indices)
    }

    pub fn indices(&self) -> &[u16] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Applied phase `k·ω` of every atom.
    pub fn phases(&self, layout: &AtomLayout) -> Vec<f64> {
        self.indices
            .iter()
            .enumerate()
            .map(|(n, &k)| k as f64 * layout.omega(n))
            .collect()
    }
}

pub(crate) fn check_indices(layout: &AtomLayout, indices: &[u16]) -> Result<()> {
    if indices.len() != layout.num_atoms() {
        return Err(Error::DimensionMismatch {
            expected: layout.num_atoms(),
            found: indices.len(),
        });
    }
    for (atom, &k) in indices.iter().enumerate() {
        if k as usize >= layout.levels(atom) {
            return Err(Error::PhaseIndexOutOfRange {
                atom,
                index: k,
                levels: layout.levels(atom),
            });
        }
    }
    Ok(())
}

/// `T` configurations stored row-major (`T × N`). `T` is kept explicitly so
/// a layout without atoms still carries a sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    layout: Arc<AtomLayout>,
    samples: usize,
    indices: Vec<u16>,
}

impl Schedule {
    pub fn new(layout: Arc<AtomLayout>, samples: usize, indices: Vec<u16>) -> Result<Self> {
        let n = layout.num_atoms();
        if indices.len() != samples * n {
            return Err(Error::DimensionMismatch {
                expected: samples * n,
                found: indices.len(),
            });
        }
        for row in indices.chunks(n.max(1)) {
            check_indices(&layout, row)?;
        }
        Ok(Schedule {
            layout,
            samples,
            indices,
        })
    }

    /// Rows concatenated; `T` is inferred, so the layout must have atoms.
    pub fn from_rows(layout: Arc<AtomLayout>, indices: Vec<u16>) -> Result<Self> {
        let n = layout.num_atoms();
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !indices.len().is_multiple_of(n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: indices.len() % n,
            });
        }
        Self::new(layout, indices.len() / n, indices)
    }

    /// One configuration measured `samples` times.
    pub fn repeated(layout: Arc<AtomLayout>, config: &PhaseConfig, samples: usize) -> Result<Self> {
        config.validate(&layout)?;
        let indices = config
            .indices()
            .iter()
            .copied()
            .cycle()
            .take(samples * config.len())
            .collect();
        Ok(Schedule {
            layout,
            samples,
            indices,
        })
    }

    pub fn layout(&self) -> &Arc<AtomLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, t: usize) -> &[u16] {
        let n = self.layout.num_atoms();
        &self.indices[t * n..(t + 1) * n]
    }

    pub fn config(&self, t: usize) -> PhaseConfig {
        PhaseConfig {
            indices: self.row(t).to_vec(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u16]> {
        (0..self.samples).map(|t| self.row(t))
    }

    pub fn into_indices(self) -> Vec<u16> {
        self.indices
    }
}

/// Every atom draws its level independently and uniformly in each sample.
pub fn random_schedule(layout: Arc<AtomLayout>, samples: usize, seed: u64) -> Result<Schedule> {
    if samples == 0 {
        return Err(Error::EmptySchedule);
    }
    let n = layout.num_atoms();
    let mut indices = vec![0u16; samples * n];
    if n > 0 {
        indices.par_chunks_mut(n).enumerate().for_each(|(t, row)| {
            let mut rng = stream(seed, Purpose::Schedule, t as u64);
            for (atom, k) in row.iter_mut().enumerate() {
                *k = rng.random_range(0..layout.levels(atom)) as u16;
            }
        });
    }
    Ok(Schedule {
        layout,
        samples,
        indices,
    })
}

/// All `Π K` configurations in lexicographic order, first atom most significant.
pub fn exhaustive_schedule(layout: Arc<AtomLayout>, cap: u64) -> Result<Schedule> {
    let n = layout.num_atoms();
    let needed: f64 = (0..n).map(|a| layout.levels(a) as f64).product();
    if needed > cap as f64 {
        return Err(Error::CapExceeded { needed, cap });
    }
    let total = needed as usize;
    let mut indices = Vec::with_capacity(total * n);
    let mut current = vec![0u16; n];
    for _ in 0..total {
        indices.extend_from_slice(&current);
        for atom in (0..n).rev() {
            current[atom] += 1;
            if (current[atom] as usize) < layout.levels(atom) {
                break;
            }
            current[atom] = 0;
        }
    }
    Ok(Schedule {
        layout,
        samples: total,
        indices,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub master_seed: u64,
    pub scene_fingerprint: String,
}

/// Configurations paired with their measured RSS.
#[derive(Debug, Clone, PartialEq)]
pub struct RssDataset {
    pub schedule: Schedule,
    pub rss: Vec<f64>,
    pub meta: DatasetMeta,
}

impl RssDataset {
    pub fn new(schedule: Schedule, rss: Vec<f64>, meta: DatasetMeta) -> Result<Self> {
        if schedule.len() != rss.len() {
            return Err(Error::DimensionMismatch {
                expected: schedule.len(),
                found: rss.len(),
            });
        }
        Ok(RssDataset {
            schedule,
            rss,
            meta,
        })
    }

    pub fn layout(&self) -> &Arc<AtomLayout> {
        self.schedule.layout()
    }

    pub fn len(&self) -> usize {
        self.rss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rss.is_empty()
    }

    /// First `samples` records.
    pub fn truncated(&self, samples: usize) -> RssDataset {
        let samples = samples.min(self.len());
        let n = self.layout().num_atoms();
        RssDataset {
            schedule: Schedule {
                layout: self.layout().clone(),
                samples,
                indices: self.schedule.indices[..samples * n].to_vec(),
            },
            rss: self.rss[..samples].to_vec(),
            meta: self.meta.clone(),
        }
    }
}

/// Measures every configuration of `schedule` under fresh fading and noise.
pub fn collect_dataset(
    ensemble: &ChannelEnsemble,
    schedule: &Schedule,
    meas_noise_sigma: f64,
    seed: u64,
) -> Result<RssDataset> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    if schedule.layout().shapes() != ensemble.layout().shapes() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.num_atoms(),
            found: schedule.layout().num_atoms(),
        });
    }
    let rss = (0..schedule.len())
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, Purpose::Sample, t as u64);
            let realization = ensemble.draw_realization(&mut rng);
            let power = channel::power_unchecked(ensemble, &realization, schedule.row(t));
            channel::add_measurement_noise(power, meas_noise_sigma, &mut rng)
        })
        .collect::<Result<Vec<f64>>>()?;
    RssDataset::new(
        schedule.clone(),
        rss,
        DatasetMeta {
            master_seed: seed,
            scene_fingerprint: ensemble.scene_fingerprint().to_string(),
        },
    )
}

/// Random schedule and measurements from one seed.
pub fn collect_random(
    ensemble: &ChannelEnsemble,
    samples: usize,
    meas_noise_sigma: f64,
    seed: u64,
) -> Result<RssDataset> {
    let schedule = random_schedule(ensemble.layout().clone(), samples, seed)?;
    collect_dataset(ensemble, &schedule, meas_noise_sigma, seed)
}
