mod common;

use std::sync::Arc;

use proptest::prelude::*;

use mts_bcm::bcm;
use mts_bcm::dataset_io::{self, Encoding};
use mts_bcm::geometry::{AtomLayout, PanelShape};
use mts_bcm::harness::snr_boost;
use mts_bcm::sampling::{
    collect_dataset, collect_random, exhaustive_schedule, random_schedule, Schedule,
};
use mts_bcm::scene_file::load_scene;

use common::{facing_panels_scene, SceneOptions};

fn layout(shapes: &[(usize, usize, usize)]) -> Arc<AtomLayout> {
    let shapes = shapes
        .iter()
        .map(|&(n_row, n_col, k_levels)| PanelShape {
            n_row,
            n_col,
            k_levels,
        })
        .collect();
    Arc::new(AtomLayout::new(shapes).unwrap())
}

#[test]
fn level_frequencies_concentrate() {
    for k in [2usize, 3, 5] {
        let l = layout(&[(2, 2, k), (1, 3, 2)]);
        let t = 100_000;
        let s = random_schedule(l.clone(), t, k as u64).unwrap();
        let mut counts = vec![0u64; l.total_levels()];
        for row in s.rows() {
            for (atom, &level) in row.iter().enumerate() {
                counts[l.level_offset(atom) + level as usize] += 1;
            }
        }
        for atom in 0..l.num_atoms() {
            let levels = l.levels(atom);
            let p = 1.0 / levels as f64;
            let sd = (t as f64 * p * (1.0 - p)).sqrt();
            let start = l.level_offset(atom);
            let bins = &counts[start..start + levels];
            assert_eq!(bins.iter().sum::<u64>(), t as u64);
            for &c in bins {
                assert!(
                    (c as f64 - t as f64 * p).abs() <= 4.0 * sd,
                    "K = {k}, atom {atom}: {bins:?}"
                );
            }
        }
    }
}

#[test]
fn exhaustive_bins_are_exactly_even() {
    let l = layout(&[(1, 2, 3), (1, 1, 2)]);
    let s = exhaustive_schedule(l.clone(), 1 << 20).unwrap();
    assert_eq!(s.len(), 18);
    let mut counts = vec![0usize; l.total_levels()];
    for row in s.rows() {
        for (atom, &level) in row.iter().enumerate() {
            counts[l.level_offset(atom) + level as usize] += 1;
        }
    }
    for atom in 0..l.num_atoms() {
        let start = l.level_offset(atom);
        let levels = l.levels(atom);
        assert!(counts[start..start + levels]
            .iter()
            .all(|&c| c == 18 / levels));
    }
}

#[test]
fn dataset_mean_matches_uniform_rss_formula() {
    // Link (γ, δ): |E h|² = γδ/(1+δ), Var h = γ/(1+δ). A hop product has
    // mean m_t m_r and variance γ_t γ_r − |m_t m_r|².
    let (gd, dd) = (0.6, 3.0);
    let hops: Vec<((f64, f64), (f64, f64))> = (0..6)
        .map(|i| {
            (
                (0.1 + 0.05 * i as f64, 2.0 + i as f64),
                (0.4 - 0.03 * i as f64, 8.0),
            )
        })
        .collect();
    let tx_power = 40.0;
    let mean_sq = |g: f64, d: f64| g * d / (1.0 + d);
    let formula = tx_power
        * (mean_sq(gd, dd)
            + gd / (1.0 + dd)
            + hops
                .iter()
                .map(|&((gt, dt), (gr, dr))| {
                    let m = mean_sq(gt, dt) * mean_sq(gr, dr);
                    m + (gt * gr - m)
                })
                .sum::<f64>());

    let l = layout(&[(2, 3, 4)]);
    let link = |g, d, phase| mts_bcm::channel::RicianLink::new(g, d, phase).unwrap();
    let ens = mts_bcm::channel::ChannelEnsemble::from_links(
        (*l).clone(),
        link(gd, dd, 0.3),
        hops.iter()
            .enumerate()
            .map(|(i, h)| link(h.0 .0, h.0 .1, i as f64))
            .collect(),
        hops.iter()
            .enumerate()
            .map(|(i, h)| link(h.1 .0, h.1 .1, -2.0 * i as f64))
            .collect(),
        tx_power,
    )
    .unwrap();
    assert!((formula - ens.mean_rss_uniform()).abs() <= 1e-12 * formula);

    let t = 100_000;
    let d = collect_random(&ens, t, 0.0, 21).unwrap();
    let n = t as f64;
    let mean = d.rss.iter().sum::<f64>() / n;
    let sd = (d.rss.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(
        (mean - formula).abs() <= 4.0 * sd / n.sqrt(),
        "{mean} vs {formula}"
    );
}

#[test]
fn monte_carlo_boost_matches_closed_form() {
    let scene = load_scene(
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes/placement_b.toml"),
    )
    .unwrap();
    let ens = mts_bcm::channel::ChannelEnsemble::build(&scene.geometry, &scene.channel).unwrap();
    let cfg = mts_bcm::baselines::genie_closest_rotation(&ens).unwrap();
    let closed = snr_boost(&ens, &cfg, &ens.without_panels()).unwrap();

    let t = 50_000;
    let mean_sd =
        |e: &mts_bcm::channel::ChannelEnsemble, c: &mts_bcm::sampling::PhaseConfig, seed| {
            let s = Schedule::repeated(e.layout().clone(), c, t).unwrap();
            let d = collect_dataset(e, &s, 0.0, seed).unwrap();
            let m = d.rss.iter().sum::<f64>() / t as f64;
            let v = d.rss.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (t - 1) as f64;
            (m, (v / t as f64).sqrt())
        };
    let (num, se_num) = mean_sd(&ens, &cfg, 1);
    let empty = ens.without_panels();
    let (den, se_den) = mean_sd(
        &empty,
        &mts_bcm::sampling::PhaseConfig::zeros(empty.layout()),
        2,
    );
    // Delta method on 10 log10(num/den).
    let se_db =
        10.0 / std::f64::consts::LN_10 * ((se_num / num).powi(2) + (se_den / den).powi(2)).sqrt();
    let mc = 10.0 * (num / den).log10();
    assert!(
        (mc - closed).abs() <= 4.0 * se_db,
        "{mc} vs {closed} (se {se_db})"
    );
}

#[test]
fn collection_and_tables_ignore_thread_count() {
    let scene = facing_panels_scene(
        8,
        &SceneOptions {
            n: 4,
            k: 4,
            ..Default::default()
        },
    );
    let ens = common::rician(&scene, 2.0, 50.0);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            let d = collect_random(&ens, 5_000, 0.01, 77).unwrap();
            let t = bcm::build_gain_table_par(&d).unwrap();
            (d, t)
        })
    };
    let (d1, t1) = run(1);
    let (d4, t4) = run(4);
    assert_eq!(d1, d4);
    assert_eq!(t1, t4);
    assert_eq!(t1, bcm::build_gain_table(&d1).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dataset_files_round_trip_bit_exactly(
        shapes in prop::collection::vec((1usize..3, 1usize..4, 2usize..9), 1..4),
        seed in any::<u64>(),
        samples in 1usize..60,
        sigma in 0.0f64..0.3,
    ) {
        let shapes: Vec<(usize, usize, usize)> = shapes;
        let scene_layout = layout(&shapes);
        let links = |g: f64| {
            (0..scene_layout.num_atoms())
                .map(|i| mts_bcm::channel::RicianLink::new(g, 3.0, i as f64).unwrap())
                .collect::<Vec<_>>()
        };
        let ens = mts_bcm::channel::ChannelEnsemble::from_links(
            (*scene_layout).clone(),
            mts_bcm::channel::RicianLink::new(0.5, 3.0, 0.1).unwrap(),
            links(0.3),
            links(0.2),
            1.0,
        )
        .unwrap();
        let d = collect_random(&ens, samples, sigma, seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (name, enc) in [("d.csv", Encoding::Csv), ("d.bin", Encoding::Binary)] {
            let path = dir.path().join(name);
            dataset_io::save(&d, &path, enc).unwrap();
            let back = dataset_io::load(&path).unwrap();
            prop_assert_eq!(&back.schedule, &d.schedule);
            prop_assert_eq!(&back.meta, &d.meta);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back.rss), bits(&d.rss));
        }
    }
}
