use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use ballot_core::ballot::{run, RunConfig, Variant};
use ballot_core::datagen::{make_centers, sample_ball_model, sample_gmm, BallModelSpec, CenterKind, NoiseLaw};
use ballot_core::harness::{run_experiment, ExperimentConfig, ExperimentKind};
use ballot_core::init::{coupon_collect_init, diameter_init, kmeanspp, CouponParams};
use ballot_core::io::{load_dataset, write_dataset};
use ballot_core::metrics::{basin_threshold, log_decay_reference, misclustering_bound, misclustering_rate};
use ballot_core::model::centroid_update;
use ballot_core::rng::rng_from_seed;
use ballot_core::transport::SinkhornParams;

#[derive(Parser)]
#[command(name = "ballot", version, about = "Balanced k-means with an optimal-transport assignment step")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a planted dataset and write it as CSV.
    Gen(GenArgs),
    /// Cluster a dataset file and print the run trace as JSON.
    Cluster(ClusterArgs),
    /// Run a batch experiment and write CSV and SVG results.
    Experiment(ExperimentArgs),
    /// Print recovery thresholds and misclustering bounds.
    Bounds(BoundsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Ball,
    Gmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Centers {
    Segment,
    Equilateral,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Ball,
    Sphere,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "ball")]
    model: Model,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Center separation for segment and equilateral centers.
    #[arg(long, default_value_t = 3.0)]
    delta: f64,
    /// Center layout; defaults to segment for k=2, equilateral for k=3,
    /// gaussian otherwise.
    #[arg(long, value_enum)]
    centers: Option<Centers>,
    /// Standard deviation of gaussian center coordinates.
    #[arg(long, default_value_t = 5.0)]
    scale: f64,
    #[arg(long, value_enum, default_value = "ball")]
    noise: Noise,
    /// Radial noise `U^alpha`; overrides --noise.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Kmeanspp,
    Planted,
    Diameter,
    Coupon,
}

#[derive(clap::Args)]
struct ClusterArgs {
    /// Dataset CSV.
    input: PathBuf,
    #[arg(long, default_value = "ballot", value_parser = parse_algo)]
    algo: Variant,
    #[arg(long, value_enum, default_value = "kmeanspp")]
    init: Init,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    term_eps: f64,
    /// Entropic regularization for eballot.
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
    /// Sinkhorn marginal tolerance for eballot.
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Failure budget for --init coupon.
    #[arg(long, default_value_t = 0.4)]
    epsilon: f64,
    /// Separation assumed by --init coupon.
    #[arg(long, default_value_t = 3.0)]
    delta: f64,
    /// Write the JSON trace here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_algo(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: ballot_core::Error| e.to_string())
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run an experiment with default settings instead of a config file.
    #[arg(long, conflicts_with = "config")]
    experiment: Option<String>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Restrict to these algorithms (comma separated).
    #[arg(long, value_delimiter = ',', value_parser = parse_algo)]
    algo: Option<Vec<Variant>>,
    /// Worker threads for independent trials.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(clap::Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 25)]
    d: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// Separations for the basin table.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2.1, 2.2, 2.3, 2.4, 2.5, 2.6, 2.7, 2.8, 2.9, 3.0])]
    deltas: Vec<f64>,
    /// Values of Delta cos theta for the misclustering table.
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
}

fn output(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn gen(args: GenArgs) -> anyhow::Result<()> {
    let mut rng = rng_from_seed(args.seed);
    let kind = match args.centers {
        Some(Centers::Segment) => CenterKind::Segment { delta: args.delta },
        Some(Centers::Equilateral) => CenterKind::Equilateral { delta: args.delta },
        Some(Centers::Gaussian) => CenterKind::Gaussian { scale: args.scale },
        None => match args.k {
            2 => CenterKind::Segment { delta: args.delta },
            3 => CenterKind::Equilateral { delta: args.delta },
            _ => CenterKind::Gaussian { scale: args.scale },
        },
    };
    let (centers, _) = make_centers(kind, args.k, args.d, &mut rng)?;
    let data = match args.model {
        Model::Ball => {
            let noise = match (args.alpha, args.noise) {
                (Some(alpha), _) => NoiseLaw::RadialPow { alpha },
                (None, Noise::Ball) => NoiseLaw::UniformBall,
                (None, Noise::Sphere) => NoiseLaw::UniformSphere,
            };
            sample_ball_model(&BallModelSpec { n: args.n, centers, noise, seed: args.seed })?
        }
        Model::Gmm => sample_gmm(&centers, args.n, &mut rng)?,
    };
    let mut out = output(args.out.as_ref())?;
    write_dataset(&data, &mut out)?;
    out.flush()?;
    Ok(())
}

fn cluster(args: ClusterArgs) -> anyhow::Result<()> {
    let data = load_dataset(&args.input).with_context(|| format!("cannot load {}", args.input.display()))?;
    let k = data.k();
    let mut rng = rng_from_seed(args.seed);
    let mu0 = match args.init {
        Init::Kmeanspp => kmeanspp(&data, k, &mut rng)?,
        Init::Planted => {
            let Some(planted) = data.planted() else {
                bail!("--init planted needs a labeled dataset");
            };
            centroid_update(&data, &planted.to_coupling())?
        }
        Init::Diameter => {
            if k != 2 {
                bail!("--init diameter needs k=2, dataset has k={k}");
            }
            diameter_init(&data)?
        }
        Init::Coupon => {
            let params = CouponParams::new(args.epsilon, args.delta, k)?;
            match coupon_collect_init(&data, &params, &mut rng)? {
                Ok(init) => init.centroids,
                Err(fail) => bail!(
                    "proto-mean graph is not {k} disjoint cliques (component sizes {:?})",
                    fail.component_sizes
                ),
            }
        }
    };
    let cfg = RunConfig {
        term_eps: args.term_eps,
        max_iters: args.max_iters,
        variant: args.algo,
        sinkhorn: SinkhornParams { lambda: args.lambda, marginal_tol: args.tol, ..SinkhornParams::default() },
    };
    let trace = run(&data, &mu0, &cfg)?;
    let mut doc = trace.to_json();
    if let Some(planted) = data.planted() {
        let rep = misclustering_rate(planted, &trace.assignment)?;
        doc["recovery"] = serde_json::json!({
            "exact": rep.exact,
            "misclustering_rate": rep.misclustering_rate,
        });
    }
    let mut out = output(args.out.as_ref())?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn experiment(args: ExperimentArgs) -> anyhow::Result<()> {
    let mut cfg = match (&args.config, &args.experiment) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("cannot load {}", path.display()))?,
        (None, Some(id)) => ExperimentConfig::defaults(id.parse::<ExperimentKind>()?),
        (None, None) => bail!("pass --config FILE or --experiment ID"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(algos) = args.algo {
        cfg.algos = algos;
    }
    let result = run_experiment(&cfg, args.jobs)?;
    let failed = result.records.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{}: {} records ({failed} failed) -> {}, {}, {}",
        cfg.experiment,
        result.records.len(),
        result.csv_path.display(),
        result.summary_path.display(),
        result.svg_path.display()
    );
    print!("{}", fs::read_to_string(&result.summary_path)?);
    Ok(())
}

fn bounds(args: BoundsArgs) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "# one-step basin radius")?;
    writeln!(out, "delta,k2,k_gt_2")?;
    for &d in &args.deltas {
        writeln!(out, "{d},{:.12},{:.12}", basin_threshold(d, 2)?, basin_threshold(d, 3)?)?;
    }
    let etas = args.etas.unwrap_or_else(|| (1..=20).map(|i| (0.075 * i as f64 * 1e6).round() / 1e6).collect());
    writeln!(out, "# one-step misclustering bound, d={} n={} eps={}", args.d, args.n, args.eps)?;
    writeln!(out, "delta_cos_theta,bound,asymptotic")?;
    for &x in &etas {
        writeln!(
            out,
            "{x},{:.12},{:.12e}",
            misclustering_bound(args.d, args.n, x, args.eps)?,
            log_decay_reference(args.d, x)
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Cluster(a) => cluster(a),
        Command::Experiment(a) => experiment(a),
        Command::Bounds(a) => bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
