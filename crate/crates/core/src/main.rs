use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mts_bcm::bcm::{self, BcmResult};
use mts_bcm::channel::{AttenuationModel, ChannelEnsemble, ChannelOptions};
use mts_bcm::dataset_io::{self, Encoding};
use mts_bcm::geometry::{MtsPanel, SceneGeometry};
use mts_bcm::harness::output::{emit_results, plot_rows};
use mts_bcm::harness::scaling::{reference_scene, snr_scaling, timing_study};
use mts_bcm::harness::{run_experiment, ExperimentConfig};
use mts_bcm::sampling::{
    collect_dataset, exhaustive_schedule, random_schedule, DEFAULT_EXHAUSTIVE_CAP,
};
use mts_bcm::scene_file::{load_scene, Scene};
use mts_bcm::Result;

#[derive(Parser)]
#[command(
    name = "mts-bcm",
    version,
    about = "Blind metasurface configuration from RSS samples"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its result files.
    Run(RunArgs),
    /// SNR growth in N (closed-form conditional means) and post-processing cost in N and K.
    Scaling(ScalingArgs),
    /// Compare sampled and closed-form conditional means on an exhaustive tiny instance.
    OracleCheck(OracleArgs),
    /// Collect and inspect RSS datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the summary printed to stdout.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct ScalingArgs {
    /// Scene whose panels are resized; defaults to a built-in pure-LOS scene with K = 2.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "16,64,256")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 65536)]
    timing_atoms: usize,
    #[arg(long, default_value_t = 8)]
    timing_levels: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
}

#[derive(Args)]
struct OracleArgs {
    /// Scene to check; defaults to two single-atom panels with K = 2.
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Csv,
    Binary,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Measure a random schedule on a scene and save it.
    Collect {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        encoding: EncodingArg,
    },
    /// Print a dataset's header and bin statistics.
    Inspect { file: PathBuf },
}

fn run(args: RunArgs) -> Result<bool> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    let records = run_experiment(&config)?;
    let files = emit_results(&records, config.sweep.axis_name(), &config.output_dir)?;
    let rows = plot_rows(&records);
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for row in &rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => println!("{}", serde_json::to_string_pretty(&rows)?),
    }
    let failures: Vec<_> = records.iter().filter(|r| r.failed()).collect();
    for r in &failures {
        eprintln!(
            "cell failed: {} {}={} seed {}: {}",
            r.algorithm,
            config.sweep.axis_name(),
            r.sweep_value,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(failures.is_empty())
}

fn scaling(args: ScalingArgs) -> Result<bool> {
    let scene = match &args.scene {
        Some(p) => load_scene(p)?,
        None => reference_scene(16, 2)?,
    };
    let snr = snr_scaling(&scene, &args.n, None, 0.0, 0)?;
    for p in &snr.points {
        println!("N = {:>6}  expected SNR = {:.6e}", p.n, p.expected_snr);
    }
    println!("log-log slope of SNR in N: {:.4}", snr.slope);
    let t = timing_study(args.timing_atoms, args.timing_levels, 32, args.reps)?;
    println!(
        "post-processing, N = {}, K = {}: {:.3e} s; 2N: x{:.3}; 2K: x{:.3}",
        t.n_atoms,
        t.k_levels,
        t.base_s,
        t.ratio_n(),
        t.ratio_k()
    );
    Ok(true)
}

fn tiny_scene() -> Result<Scene> {
    let panel = |id, y: f64, az: f64| MtsPanel {
        panel_id: id,
        center: [1.5, y, 1.0],
        boresight_azimuth: az,
        n_row: 1,
        n_col: 1,
        atom_spacing: 0.03,
        k_levels: 2,
    };
    let geometry = SceneGeometry::new(
        [0.0, 0.2, 0.5],
        [3.5, -0.3, 0.6],
        vec![
            panel(1, -1.5, std::f64::consts::FRAC_PI_2),
            panel(2, 1.5, -std::f64::consts::FRAC_PI_2),
        ],
        0.125,
    )?;
    Ok(Scene {
        geometry,
        channel: ChannelOptions::pure_los(AttenuationModel::free_space(), 1.0),
    })
}

fn oracle_check(args: OracleArgs) -> Result<bool> {
    let mut scene = match &args.scene {
        Some(p) => load_scene(p)?,
        None => tiny_scene()?,
    };
    scene.channel.rician = mts_bcm::channel::RicianFactors::pure_los();
    let ensemble = ChannelEnsemble::build(&scene.geometry, &scene.channel)?;
    let schedule = exhaustive_schedule(ensemble.layout().clone(), DEFAULT_EXHAUSTIVE_CAP)?;
    let dataset = collect_dataset(&ensemble, &schedule, 0.0, 0)?;
    let sampled = bcm::build_gain_table(&dataset)?;
    let exact = bcm::exact_conditional_table(&ensemble);
    let worst = sampled
        .cond_mean
        .iter()
        .zip(&exact.cond_mean)
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    let same = BcmResult::from_table(&sampled).theta_bcm == BcmResult::from_table(&exact).theta_bcm;
    println!("configurations enumerated: {}", schedule.len());
    println!("max relative difference of conditional means: {worst:.3e}");
    println!("same selection: {same}");
    Ok(worst <= 1e-9 && same)
}

fn dataset(cmd: DatasetCommand) -> Result<bool> {
    match cmd {
        DatasetCommand::Collect {
            scene,
            samples,
            seed,
            sigma,
            out,
            encoding,
        } => {
            let scene = load_scene(&scene)?;
            let ensemble = ChannelEnsemble::build(&scene.geometry, &scene.channel)?;
            let schedule = random_schedule(ensemble.layout().clone(), samples, seed)?;
            let d = collect_dataset(&ensemble, &schedule, sigma, seed)?;
            let encoding = match encoding {
                EncodingArg::Csv => Encoding::Csv,
                EncodingArg::Binary => Encoding::Binary,
            };
            dataset_io::save(&d, &out, encoding)?;
            eprintln!("wrote {} samples to {}", d.len(), out.display());
        }
        DatasetCommand::Inspect { file } => inspect(&file)?,
    }
    Ok(true)
}

fn inspect(file: &Path) -> Result<()> {
    let d = dataset_io::load(file)?;
    println!("samples: {}", d.len());
    println!("panels: {}", d.layout().describe());
    println!("master seed: {}", d.meta.master_seed);
    println!("scene fingerprint: {}", d.meta.scene_fingerprint);
    let mean = d.rss.iter().sum::<f64>() / d.len().max(1) as f64;
    println!("mean rss: {mean}");
    match bcm::build_gain_table(&d) {
        Ok(t) => {
            let min = t.counts.iter().min().copied().unwrap_or(0);
            let max = t.counts.iter().max().copied().unwrap_or(0);
            println!("bin counts: min {min}, max {max}");
        }
        Err(e) => println!("gain table: {e}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Scaling(args) => scaling(args),
        Command::OracleCheck(args) => oracle_check(args),
        Command::Dataset(cmd) => dataset(cmd),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
