mod common;

use std::f64::consts::TAU;
use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use mts_bcm::baselines::genie_closest_rotation;
use mts_bcm::bcm::{self, TrueGainParams};
use mts_bcm::channel::{ChannelEnsemble, RicianLink};
use mts_bcm::geometry::{self, AtomLayout, PanelShape};
use mts_bcm::harness::scaling::loglog_slope;
use mts_bcm::phase::wrap_pi;
use mts_bcm::sampling::{collect_random, random_schedule, DatasetMeta, PhaseConfig, RssDataset};

use common::{facing_panels_scene, SceneOptions};

fn line_ensemble(n: usize, k: usize, delta: f64, tx_power: f64) -> ChannelEnsemble {
    let layout = AtomLayout::new(vec![PanelShape {
        n_row: 1,
        n_col: n,
        k_levels: k,
    }])
    .unwrap();
    let direct = RicianLink::new(0.8, delta, 0.4).unwrap();
    let tx = (0..n)
        .map(|i| RicianLink::new(0.45, delta, 1.1 * i as f64).unwrap())
        .collect();
    let rx = (0..n)
        .map(|i| RicianLink::new(0.3, delta, -0.7 * i as f64 + 2.0).unwrap())
        .collect();
    ChannelEnsemble::from_links(layout, direct, tx, rx, tx_power).unwrap()
}

#[test]
fn gain_error_decays_as_inverse_square_root() {
    let ens = line_ensemble(2, 2, f64::INFINITY, 1.0);
    let params = TrueGainParams::from_ensemble(&ens);
    let sizes = [1_000usize, 10_000, 100_000, 1_000_000];
    let seeds = 8;
    let mut mean_err = vec![0.0; sizes.len()];
    for seed in 0..seeds {
        // Prefixes of one long dataset are datasets of the shorter length.
        let full = collect_random(&ens, *sizes.last().unwrap(), 0.05, seed).unwrap();
        for (i, &t) in sizes.iter().enumerate() {
            let table = bcm::build_gain_table(&full.truncated(t)).unwrap();
            let mut sup: f64 = 0.0;
            for atom in 0..2 {
                for k in 0..2u16 {
                    let err = table.gains(atom)[k as usize] - params.exact_gain(atom, k);
                    sup = sup.max(err.abs());
                }
            }
            mean_err[i] += sup / seeds as f64;
        }
    }
    let xs: Vec<f64> = sizes.iter().map(|&t| t as f64).collect();
    let slope = loglog_slope(&xs, &mean_err);
    assert!(
        (slope + 0.5).abs() <= 0.1,
        "slope {slope}, errors {mean_err:?}"
    );
}

#[test]
fn sampled_gain_matches_closed_form_with_fading() {
    // Fading on every link and a non-unit transmit power: the constant in
    // front of the cosine must still be the transmit power.
    let ens = line_ensemble(2, 4, 5.0, 2.5);
    let params = TrueGainParams::from_ensemble(&ens);
    let samples = 1_000_000;
    let d = collect_random(&ens, samples, 0.0, 3).unwrap();
    let table = bcm::build_gain_table(&d).unwrap();
    let layout = d.layout().clone();
    let n = samples as f64;
    let total_var = d
        .rss
        .iter()
        .map(|s| (s - table.global_mean).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    for atom in 0..2 {
        let start = layout.level_offset(atom);
        for k in 0..4 {
            let (mut sum2, mut count) = (0.0, 0.0);
            for (t, row) in d.schedule.rows().enumerate() {
                if row[atom] as usize == k {
                    sum2 += (d.rss[t] - table.cond_mean[start + k]).powi(2);
                    count += 1.0;
                }
            }
            let se = (sum2 / (count - 1.0) / count + total_var / n).sqrt();
            let err = table.j_hat[start + k] - params.exact_gain(atom, k as u16);
            assert!(err.abs() <= 4.0 * se, "atom {atom} k {k}: {err} vs se {se}");
        }
    }
}

#[test]
fn exact_selection_beats_random_configurations() {
    let opts = SceneOptions {
        n: 4,
        k: 4,
        ..Default::default()
    };
    for seed in 0..10 {
        let scene = facing_panels_scene(seed, &opts);
        for ens in [common::pure_los(&scene), common::rician(&scene, 3.0, 1.0)] {
            let chosen = bcm::select_phases(&bcm::exact_conditional_table(&ens));
            let best = ens.expected_snr(&chosen).unwrap();
            let layout = ens.layout();
            let mut r = common::rng(seed);
            let draws = 1000;
            let random_mean = (0..draws)
                .map(|_| {
                    let idx = (0..layout.num_atoms())
                        .map(|a| r.random_range(0..layout.levels(a)) as u16)
                        .collect();
                    ens.expected_snr(&PhaseConfig::new(layout, idx).unwrap())
                        .unwrap()
                })
                .sum::<f64>()
                / draws as f64;
            assert!(best > random_mean, "scene {seed}: {best} vs {random_mean}");
        }
    }
}

#[test]
fn exact_selection_equals_genie_on_random_scenes() {
    for seed in 0..50 {
        let k = [2, 3, 4, 8][seed as usize % 4];
        let scene = facing_panels_scene(
            seed + 500,
            &SceneOptions {
                n: 5,
                k,
                ..Default::default()
            },
        );
        let ens = common::pure_los(&scene);
        let bcm = bcm::select_phases(&bcm::exact_conditional_table(&ens));
        let genie = genie_closest_rotation(&ens).unwrap();
        assert_eq!(bcm, genie, "scene {seed}");
    }
}

#[test]
fn recovered_delta_is_within_half_a_step_of_geometry() {
    for seed in 0..20 {
        let scene = facing_panels_scene(
            seed + 900,
            &SceneOptions {
                n: 6,
                k: 8,
                ..Default::default()
            },
        );
        let table = bcm::exact_conditional_table(&common::pure_los(&scene));
        let delta = bcm::recover_delta(&table);
        let mut atom = 0;
        for l in 0..scene.panels.len() {
            let truth = geometry::true_phase_difference(&scene, l).unwrap();
            let half = TAU / scene.panels[l].k_levels as f64 / 2.0;
            for &d in &truth.values {
                let off = wrap_pi(delta.delta_star[atom] - d).abs();
                assert!(off <= half + 1e-12, "scene {seed} atom {atom}: {off}");
                atom += 1;
            }
        }
    }
}

fn arbitrary_dataset() -> impl Strategy<Value = RssDataset> {
    (
        prop::collection::vec((1usize..4, 1usize..4, 2usize..6), 1..3),
        any::<u64>(),
        20usize..300,
    )
        .prop_map(|(shapes, seed, samples)| {
            let shapes = shapes
                .into_iter()
                .map(|(n_row, n_col, k_levels)| PanelShape {
                    n_row,
                    n_col,
                    k_levels,
                })
                .collect();
            let layout = Arc::new(AtomLayout::new(shapes).unwrap());
            let schedule = random_schedule(layout, samples, seed).unwrap();
            let mut r = common::rng(seed);
            let rss = (0..samples).map(|_| r.random_range(0.0..5.0)).collect();
            let meta = DatasetMeta {
                master_seed: seed,
                scene_fingerprint: String::new(),
            };
            RssDataset::new(schedule, rss, meta).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parallel_build_matches_serial_and_counts_sum_to_t(d in arbitrary_dataset()) {
        let serial = bcm::build_gain_table(&d);
        let parallel = bcm::build_gain_table_par(&d);
        match (serial, parallel) {
            (Ok(s), Ok(p)) => {
                prop_assert_eq!(&s, &p);
                for atom in 0..d.layout().num_atoms() {
                    prop_assert_eq!(s.bin_counts(atom).iter().sum::<u64>(), d.len() as u64);
                    for (c, j) in s.cond_means(atom).iter().zip(s.gains(atom)) {
                        prop_assert_eq!(c - s.global_mean, *j);
                    }
                }
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "serial {:?} vs parallel {:?}", a.is_ok(), b.is_ok()),
        }
    }
}
