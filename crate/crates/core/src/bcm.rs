//! Conditional sample means, phase selection and phase-difference recovery.
//!
//! For each atom and level `k`, the conditional mean averages the RSS over
//! the samples where that atom sat at level `k`. Under uniform random
//! schedules its expectation is `E[S] + C·A·cos(kω − Δ)`, so the level with
//! the largest conditional mean both maximizes SNR atom by atom and is the
//! nearest grid point to the phase difference `Δ`.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::channel::ChannelEnsemble;
use crate::geometry::AtomLayout;
use crate::phase::{argmax_first, wrap_pi, wrap_two_pi};
use crate::sampling::{check_indices, PhaseConfig, RssDataset};
use crate::{Error, Result};

/// Per-(atom, level) statistics, laid out by [`AtomLayout::level_offset`].
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    layout: Arc<AtomLayout>,
    pub cond_mean: Vec<f64>,
    pub j_hat: Vec<f64>,
    pub counts: Vec<u64>,
    pub global_mean: f64,
    /// Samples behind the table; zero for closed-form tables.
    pub samples: usize,
}

impl GainTable {
    pub fn layout(&self) -> &Arc<AtomLayout> {
        &self.layout
    }

    fn range(&self, atom: usize) -> std::ops::Range<usize> {
        let start = self.layout.level_offset(atom);
        start..start + self.layout.levels(atom)
    }

    pub fn cond_means(&self, atom: usize) -> &[f64] {
        &self.cond_mean[self.range(atom)]
    }

    pub fn gains(&self, atom: usize) -> &[f64] {
        &self.j_hat[self.range(atom)]
    }

    pub fn bin_counts(&self, atom: usize) -> &[u64] {
        &self.counts[self.range(atom)]
    }

    /// Largest conditional mean of `atom`, smallest index on ties.
    pub fn best_level(&self, atom: usize) -> u16 {
        argmax_first(self.cond_means(atom)) as u16
    }

    /// Same table with every RSS value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> GainTable {
        GainTable {
            cond_mean: self.cond_mean.iter().map(|x| x * factor).collect(),
            j_hat: self.j_hat.iter().map(|x| x * factor).collect(),
            global_mean: self.global_mean * factor,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["panel", "u", "v", "k", "count", "cond_mean", "j_hat"])?;
        for atom in 0..self.layout.num_atoms() {
            let (l, u, v) = self.layout.atom_position(atom);
            let base = self.layout.level_offset(atom);
            for k in 0..self.layout.levels(atom) {
                w.write_record([
                    l.to_string(),
                    u.to_string(),
                    v.to_string(),
                    k.to_string(),
                    self.counts[base + k].to_string(),
                    self.cond_mean[base + k].to_string(),
                    self.j_hat[base + k].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Single-pass running sums per bin.
#[derive(Debug, Clone)]
pub struct GainAccumulator {
    layout: Arc<AtomLayout>,
    sums: Vec<f64>,
    counts: Vec<u64>,
    total: f64,
    samples: usize,
}

impl GainAccumulator {
    pub fn new(layout: Arc<AtomLayout>) -> Self {
        let bins = layout.total_levels();
        GainAccumulator {
            layout,
            sums: vec![0.0; bins],
            counts: vec![0; bins],
            total: 0.0,
            samples: 0,
        }
    }

    pub fn push(&mut self, indices: &[u16], rss: f64) -> Result<()> {
        check_indices(&self.layout, indices)?;
        self.push_unchecked(indices, rss);
        Ok(())
    }

    #[inline]
    fn push_unchecked(&mut self, indices: &[u16], rss: f64) {
        for (atom, &k) in indices.iter().enumerate() {
            let bin = self.layout.level_offset(atom) + k as usize;
            self.sums[bin] += rss;
            self.counts[bin] += 1;
        }
        self.total += rss;
        self.samples += 1;
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Divides the sums out; fails on the first empty bin.
    pub fn finish(self) -> Result<GainTable> {
        if self.samples == 0 {
            return Err(Error::EmptySchedule);
        }
        let global_mean = self.total / self.samples as f64;
        for atom in 0..self.layout.num_atoms() {
            let base = self.layout.level_offset(atom);
            for k in 0..self.layout.levels(atom) {
                if self.counts[base + k] == 0 {
                    let (panel, u, v) = self.layout.atom_position(atom);
                    return Err(Error::EmptyBin { panel, u, v, k });
                }
            }
        }
        let cond_mean: Vec<f64> = self
            .sums
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| s / c as f64)
            .collect();
        let j_hat = cond_mean.iter().map(|m| m - global_mean).collect();
        Ok(GainTable {
            layout: self.layout,
            cond_mean,
            j_hat,
            counts: self.counts,
            global_mean,
            samples: self.samples,
        })
    }
}

pub fn build_gain_table(dataset: &RssDataset) -> Result<GainTable> {
    let mut acc = GainAccumulator::new(dataset.layout().clone());
    for (row, &rss) in dataset.schedule.rows().zip(&dataset.rss) {
        acc.push_unchecked(row, rss);
    }
    acc.finish()
}

/// Parallel over atoms. Each bin is summed in sample order, so the result is
/// bit-identical to [`build_gain_table`].
pub fn build_gain_table_par(dataset: &RssDataset) -> Result<GainTable> {
    let layout = dataset.layout().clone();
    let n = layout.num_atoms();
    let mut acc = GainAccumulator::new(layout.clone());
    let per_atom: Vec<(Vec<f64>, Vec<u64>)> = (0..n)
        .into_par_iter()
        .map(|atom| {
            let k = layout.levels(atom);
            let mut sums = vec![0.0; k];
            let mut counts = vec![0u64; k];
            for (row, &rss) in dataset.schedule.rows().zip(&dataset.rss) {
                let level = row[atom] as usize;
                sums[level] += rss;
                counts[level] += 1;
            }
            (sums, counts)
        })
        .collect();
    for (atom, (sums, counts)) in per_atom.into_iter().enumerate() {
        let base = layout.level_offset(atom);
        acc.sums[base..base + sums.len()].copy_from_slice(&sums);
        acc.counts[base..base + counts.len()].copy_from_slice(&counts);
    }
    for &rss in &dataset.rss {
        acc.total += rss;
    }
    acc.samples = dataset.len();
    acc.finish()
}

/// Picks the level with the largest conditional mean for every atom.
pub fn select_phases(table: &GainTable) -> PhaseConfig {
    let indices = (0..table.layout.num_atoms())
        .map(|atom| table.best_level(atom))
        .collect();
    PhaseConfig::new(&table.layout, indices).expect("argmax indices are in range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub k_star: Vec<u16>,
    /// Recovered phase differences in `(0, 2π]`.
    pub delta_star: Vec<f64>,
}

/// Quantized phase-difference estimate `Δ* = k*·ω`, with level 0 reported as 2π.
pub fn recover_delta(table: &GainTable) -> DeltaEstimate {
    let n = table.layout.num_atoms();
    let mut k_star = Vec::with_capacity(n);
    let mut delta_star = Vec::with_capacity(n);
    for atom in 0..n {
        let k = table.best_level(atom);
        k_star.push(k);
        delta_star.push(wrap_two_pi(k as f64 * table.layout.omega(atom)));
    }
    DeltaEstimate { k_star, delta_star }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcmResult {
    pub theta_bcm: PhaseConfig,
    pub k_star: Vec<u16>,
    pub delta_star: Vec<f64>,
}

impl BcmResult {
    pub fn from_table(table: &GainTable) -> Self {
        let theta_bcm = select_phases(table);
        let DeltaEstimate { k_star, delta_star } = recover_delta(table);
        BcmResult {
            theta_bcm,
            k_star,
            delta_star,
        }
    }

    pub fn write_csv<W: Write>(&self, layout: &AtomLayout, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["panel", "u", "v", "theta_index", "delta_star"])?;
        for (atom, (&k, d)) in self
            .theta_bcm
            .indices()
            .iter()
            .zip(&self.delta_star)
            .enumerate()
        {
            let (l, u, v) = layout.atom_position(atom);
            w.write_record([
                l.to_string(),
                u.to_string(),
                v.to_string(),
                k.to_string(),
                d.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Closed-form gain-function parameters of every atom.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueGainParams {
    /// `2|E h_d||E h_n|`.
    pub amplitude: Vec<f64>,
    /// `∠E h_d − ∠E h_n`, wrapped into `(0, 2π]`.
    pub delta_true: Vec<f64>,
    pub omega: Vec<f64>,
    /// The constant in front of the cosine; the transmit power.
    pub scale: f64,
}

impl TrueGainParams {
    pub fn from_ensemble(ensemble: &ChannelEnsemble) -> Self {
        let hd = ensemble.direct_mean();
        let layout = ensemble.layout();
        let mut amplitude = Vec::with_capacity(ensemble.num_atoms());
        let mut delta_true = Vec::with_capacity(ensemble.num_atoms());
        for atom in 0..ensemble.num_atoms() {
            let hn = ensemble.reflected_mean(atom);
            amplitude.push(2.0 * hd.norm() * hn.norm());
            delta_true.push(wrap_two_pi(hd.arg() - hn.arg()));
        }
        TrueGainParams {
            amplitude,
            delta_true,
            omega: (0..layout.num_atoms()).map(|a| layout.omega(a)).collect(),
            scale: ensemble.tx_power,
        }
    }

    /// `C·A·cos(kω − Δ)` for one atom.
    pub fn exact_gain(&self, atom: usize, k: u16) -> f64 {
        self.scale
            * self.amplitude[atom]
            * (k as f64 * self.omega[atom] - self.delta_true[atom]).cos()
    }

    /// Level closest to `Δ` on the grid (smallest index on ties).
    pub fn closest_level(&self, atom: usize) -> u16 {
        let k_levels = (TAU / self.omega[atom]).round() as usize;
        let dist: Vec<f64> = (0..k_levels)
            .map(|k| -wrap_pi(k as f64 * self.omega[atom] - self.delta_true[atom]).abs())
            .collect();
        argmax_first(&dist) as u16
    }
}

/// Conditional means replaced by their expectations under uniform schedules.
pub fn exact_conditional_table(ensemble: &ChannelEnsemble) -> GainTable {
    let layout = ensemble.layout().clone();
    let params = TrueGainParams::from_ensemble(ensemble);
    let global_mean = ensemble.mean_rss_uniform();
    let bins = layout.total_levels();
    let mut cond_mean = Vec::with_capacity(bins);
    let mut j_hat = Vec::with_capacity(bins);
    for atom in 0..layout.num_atoms() {
        for k in 0..layout.levels(atom) {
            let g = params.exact_gain(atom, k as u16);
            j_hat.push(g);
            cond_mean.push(global_mean + g);
        }
    }
    GainTable {
        layout,
        cond_mean,
        j_hat,
        counts: vec![0; bins],
        global_mean,
        samples: 0,
    }
}
