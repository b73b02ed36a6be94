//! Rician channel synthesis, SNR and the RSS measurement model.
//!
//! Every elementary link is
//! `h = √γ (√(δ/(1+δ)) h̄ + √(1/(1+δ)) h̃)` with `|h̄| = 1` and `h̃ ~ CN(0, 1)`.
//! The reflected channel of an atom is the product of its two hops. Noise
//! power is normalized to 1, so received power and SNR coincide.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{self, AtomLayout, Endpoint, SceneGeometry};
use crate::sampling::PhaseConfig;
use crate::{Error, Result};

pub const DEFAULT_BLOCKAGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    Direct,
    TxPanel,
    PanelRx,
}

/// How link distance maps to the attenuation factor `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum AttenuationModel {
    Constant {
        gamma: f64,
    },
    PerClass {
        direct: f64,
        tx_panel: f64,
        panel_rx: f64,
    },
    /// `γ(d) = min(scale·(λ/(4πd))^exponent, gamma_max)`.
    PowerLaw {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        gamma_max: Option<f64>,
    },
}

impl AttenuationModel {
    pub fn free_space() -> Self {
        AttenuationModel::PowerLaw {
            scale: 1.0,
            exponent: 2.0,
            gamma_max: None,
        }
    }

    pub fn gamma(&self, class: LinkClass, distance: f64, wavelength: f64) -> Result<f64> {
        let g = match *self {
            AttenuationModel::Constant { gamma } => gamma,
            AttenuationModel::PerClass {
                direct,
                tx_panel,
                panel_rx,
            } => match class {
                LinkClass::Direct => direct,
                LinkClass::TxPanel => tx_panel,
                LinkClass::PanelRx => panel_rx,
            },
            AttenuationModel::PowerLaw {
                scale,
                exponent,
                gamma_max,
            } => {
                if let Some(cap) = gamma_max {
                    if !(cap > 0.0 && cap < 1.0) {
                        return Err(Error::Configuration(format!(
                            "gamma_max {cap} must lie in (0, 1)"
                        )));
                    }
                }
                let g =
                    scale * (wavelength / (4.0 * std::f64::consts::PI * distance)).powf(exponent);
                gamma_max.map_or(g, |cap| g.min(cap))
            }
        };
        if !(g > 0.0 && g < 1.0) {
            return Err(Error::Configuration(format!(
                "attenuation {g} for a {class:?} link at {distance} m is outside (0, 1)"
            )));
        }
        Ok(g)
    }
}

/// Rician factors `δ` per link class. `f64::INFINITY` means no fading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianFactors {
    pub direct: f64,
    pub tx_panel: f64,
    pub panel_rx: f64,
}

impl RicianFactors {
    pub fn uniform(delta: f64) -> Self {
        RicianFactors {
            direct: delta,
            tx_panel: delta,
            panel_rx: delta,
        }
    }

    pub fn pure_los() -> Self {
        Self::uniform(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOptions {
    pub attenuation: AttenuationModel,
    pub rician: RicianFactors,
    /// Linear transmit power (noise power is 1).
    pub tx_power: f64,
    /// Multiplies the direct-link attenuation when the direct path is blocked.
    pub blockage: Option<f64>,
}

impl ChannelOptions {
    pub fn pure_los(attenuation: AttenuationModel, tx_power: f64) -> Self {
        ChannelOptions {
            attenuation,
            rician: RicianFactors::pure_los(),
            tx_power,
            blockage: None,
        }
    }
}

pub fn dbm_to_linear(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianLink {
    pub attenuation: f64,
    pub rician_factor: f64,
    pub los_phase: f64,
}

impl RicianLink {
    pub fn new(attenuation: f64, rician_factor: f64, los_phase: f64) -> Result<Self> {
        if !(attenuation > 0.0 && attenuation < 1.0) {
            return Err(Error::Configuration(format!(
                "attenuation {attenuation} outside (0, 1)"
            )));
        }
        if rician_factor.is_nan() || rician_factor <= 0.0 {
            return Err(Error::Configuration(format!(
                "Rician factor {rician_factor} must be positive"
            )));
        }
        Ok(RicianLink {
            attenuation,
            rician_factor,
            los_phase,
        })
    }

    pub fn los_weight(&self) -> f64 {
        if self.rician_factor.is_infinite() {
            1.0
        } else {
            (self.rician_factor / (1.0 + self.rician_factor)).sqrt()
        }
    }

    pub fn fading_weight(&self) -> f64 {
        if self.rician_factor.is_infinite() {
            0.0
        } else {
            (1.0 / (1.0 + self.rician_factor)).sqrt()
        }
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::from_polar(self.attenuation.sqrt() * self.los_weight(), self.los_phase)
    }

    /// `E|h|² = γ`.
    pub fn second_moment(&self) -> f64 {
        self.attenuation
    }

    pub fn variance(&self) -> f64 {
        if self.rician_factor.is_infinite() {
            0.0
        } else {
            self.attenuation / (1.0 + self.rician_factor)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let fading = self.fading_weight();
        let mut h = Complex64::from_polar(self.los_weight(), self.los_phase);
        if fading > 0.0 {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            h += Complex64::new(re * s, im * s) * fading;
        }
        h * self.attenuation.sqrt()
    }
}

/// Channel statistics of every link in a scene.
#[derive(Debug, Clone)]
pub struct ChannelEnsemble {
    layout: Arc<AtomLayout>,
    pub direct: RicianLink,
    pub tx_to_atom: Vec<RicianLink>,
    pub atom_to_rx: Vec<RicianLink>,
    pub tx_power: f64,
    scene_fingerprint: String,
}

/// One fading draw of every channel; `reflected` holds hop products.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub direct: Complex64,
    pub reflected: Vec<Complex64>,
}

impl ChannelEnsemble {
    pub fn build(scene: &SceneGeometry, options: &ChannelOptions) -> Result<Self> {
        scene.validate()?;
        if !(options.tx_power > 0.0 && options.tx_power.is_finite()) {
            return Err(Error::Configuration("tx_power must be positive".into()));
        }
        let lambda = scene.wavelength;
        let d_tr = scene.direct_distance();
        let mut gamma_direct = options.attenuation.gamma(LinkClass::Direct, d_tr, lambda)?;
        if let Some(b) = options.blockage {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::Configuration(format!(
                    "blockage factor {b} outside (0, 1]"
                )));
            }
            gamma_direct *= b;
        }
        let mut direct_phase = 0.0;
        let mut tx_to_atom = Vec::with_capacity(scene.num_atoms());
        let mut atom_to_rx = Vec::with_capacity(scene.num_atoms());
        for l in 0..scene.panels.len() {
            let phases = geometry::los_phases(scene, l)?;
            direct_phase = phases.direct;
            let d_t = geometry::link_angles(scene, l, Endpoint::Tx)?.distance;
            let d_r = geometry::link_angles(scene, l, Endpoint::Rx)?.distance;
            let g_t = options.attenuation.gamma(LinkClass::TxPanel, d_t, lambda)?;
            let g_r = options.attenuation.gamma(LinkClass::PanelRx, d_r, lambda)?;
            for (&pt, &pr) in phases.tx_hop.values.iter().zip(&phases.rx_hop.values) {
                tx_to_atom.push(RicianLink::new(g_t, options.rician.tx_panel, pt)?);
                atom_to_rx.push(RicianLink::new(g_r, options.rician.panel_rx, pr)?);
            }
        }
        if scene.panels.is_empty() {
            direct_phase = crate::phase::wrap_pi(scene.xi() * d_tr);
        }
        Ok(ChannelEnsemble {
            layout: Arc::new(scene.layout()),
            direct: RicianLink::new(gamma_direct, options.rician.direct, direct_phase)?,
            tx_to_atom,
            atom_to_rx,
            tx_power: options.tx_power,
            scene_fingerprint: scene.fingerprint(),
        })
    }

    /// Assembles an ensemble from explicit links (no geometry).
    pub fn from_links(
        layout: AtomLayout,
        direct: RicianLink,
        tx_to_atom: Vec<RicianLink>,
        atom_to_rx: Vec<RicianLink>,
        tx_power: f64,
    ) -> Result<Self> {
        let n = layout.num_atoms();
        for len in [tx_to_atom.len(), atom_to_rx.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(ChannelEnsemble {
            layout: Arc::new(layout),
            direct,
            tx_to_atom,
            atom_to_rx,
            tx_power,
            scene_fingerprint: String::from("none"),
        })
    }

    pub fn layout(&self) -> &Arc<AtomLayout> {
        &self.layout
    }

    pub fn num_atoms(&self) -> usize {
        self.layout.num_atoms()
    }

    pub fn scene_fingerprint(&self) -> &str {
        &self.scene_fingerprint
    }

    /// Same direct link, no panels.
    pub fn without_panels(&self) -> ChannelEnsemble {
        ChannelEnsemble {
            layout: Arc::new(AtomLayout::new(Vec::new()).unwrap()),
            direct: self.direct,
            tx_to_atom: Vec::new(),
            atom_to_rx: Vec::new(),
            tx_power: self.tx_power,
            scene_fingerprint: self.scene_fingerprint.clone(),
        }
    }

    pub fn with_tx_power(&self, tx_power: f64) -> ChannelEnsemble {
        ChannelEnsemble {
            tx_power,
            ..self.clone()
        }
    }

    pub fn direct_mean(&self) -> Complex64 {
        self.direct.mean()
    }

    pub fn reflected_mean(&self, atom: usize) -> Complex64 {
        self.tx_to_atom[atom].mean() * self.atom_to_rx[atom].mean()
    }

    /// Variance of a hop product: `E|X|²E|Y|² − |E X|²|E Y|²`.
    pub fn reflected_variance(&self, atom: usize) -> f64 {
        let (x, y) = (&self.tx_to_atom[atom], &self.atom_to_rx[atom]);
        let v = x.second_moment() * y.second_moment() - self.reflected_mean(atom).norm_sqr();
        v.max(0.0)
    }

    pub fn draw_realization<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let direct = self.direct.sample(rng);
        let reflected = self
            .tx_to_atom
            .iter()
            .zip(&self.atom_to_rx)
            .map(|(x, y)| x.sample(rng) * y.sample(rng))
            .collect();
        ChannelRealization { direct, reflected }
    }

    fn check(&self, config: &PhaseConfig) -> Result<()> {
        config.validate(&self.layout)
    }

    /// Closed-form `E[S]` for a fixed configuration.
    pub fn expected_snr(&self, config: &PhaseConfig) -> Result<f64> {
        self.check(config)?;
        let mut coherent = self.direct_mean();
        let mut variance = self.direct.variance();
        for (atom, &k) in config.indices().iter().enumerate() {
            coherent += self.reflected_mean(atom) * self.layout.phasor(atom, k);
            variance += self.reflected_variance(atom);
        }
        Ok(self.tx_power * (coherent.norm_sqr() + variance))
    }

    /// `tx_power` times the summed variances: the SNR floor no configuration can go below.
    pub fn variance_floor(&self) -> f64 {
        let v: f64 = (0..self.num_atoms())
            .map(|n| self.reflected_variance(n))
            .sum();
        self.tx_power * (self.direct.variance() + v)
    }

    /// `E[S]` when every atom draws its level uniformly at random.
    pub fn mean_rss_uniform(&self) -> f64 {
        let reflected: f64 = self
            .tx_to_atom
            .iter()
            .zip(&self.atom_to_rx)
            .map(|(x, y)| x.second_moment() * y.second_moment())
            .sum();
        self.tx_power * (self.direct.second_moment() + reflected)
    }
}

impl ChannelRealization {
    fn coherent_sum(&self, layout: &AtomLayout, indices: &[u16]) -> Complex64 {
        let mut acc = self.direct;
        for (atom, (&h, &k)) in self.reflected.iter().zip(indices).enumerate() {
            acc += h * layout.phasor(atom, k);
        }
        acc
    }
}

/// `tx_power · |h_direct + Σ h_n e^{jθ_n}|²`.
pub fn instantaneous_power(
    ensemble: &ChannelEnsemble,
    realization: &ChannelRealization,
    config: &PhaseConfig,
) -> Result<f64> {
    ensemble.check(config)?;
    if realization.reflected.len() != config.len() {
        return Err(Error::DimensionMismatch {
            expected: config.len(),
            found: realization.reflected.len(),
        });
    }
    Ok(power_unchecked(ensemble, realization, config.indices()))
}

pub(crate) fn power_unchecked(
    ensemble: &ChannelEnsemble,
    realization: &ChannelRealization,
    indices: &[u16],
) -> f64 {
    ensemble.tx_power
        * realization
            .coherent_sum(&ensemble.layout, indices)
            .norm_sqr()
}

/// Received power plus zero-mean Gaussian measurement noise, clamped at zero.
pub fn measure_rss<R: Rng + ?Sized>(
    ensemble: &ChannelEnsemble,
    realization: &ChannelRealization,
    config: &PhaseConfig,
    meas_noise_sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    let power = instantaneous_power(ensemble, realization, config)?;
    add_measurement_noise(power, meas_noise_sigma, rng)
}

pub(crate) fn add_measurement_noise<R: Rng + ?Sized>(
    power: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Configuration(format!(
            "measurement noise sigma {sigma} must be non-negative"
        )));
    }
    if sigma == 0.0 {
        return Ok(power);
    }
    let noise = Normal::new(0.0, sigma).expect("sigma checked").sample(rng);
    Ok((power + noise).max(0.0))
}
