//! Batch experiment runner: JSON configuration, deterministic per-trial
//! seeding, a bounded worker pool, CSV and SVG output.

mod experiments;
pub mod svg;

use std::fmt;
use std::fs;
use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ballot::Variant;
use crate::error::{Error, Result};
use crate::io::format_f64;
use crate::rng::{derive_seed, tag};
use crate::transport::SinkhornParams;

pub use experiments::{median, one_step_labels, oriented_init, proto_radius, runtime_slope};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RecoveryVsDelta,
    RuntimeScaling,
    GmmEstimation,
    BasinHeatmapK2,
    BasinHeatmapK3,
    LogdecayRate,
    PhasePlot,
    CouponInit,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::RecoveryVsDelta,
        ExperimentKind::RuntimeScaling,
        ExperimentKind::GmmEstimation,
        ExperimentKind::BasinHeatmapK2,
        ExperimentKind::BasinHeatmapK3,
        ExperimentKind::LogdecayRate,
        ExperimentKind::PhasePlot,
        ExperimentKind::CouponInit,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::RecoveryVsDelta => "recovery_vs_delta",
            ExperimentKind::RuntimeScaling => "runtime_scaling",
            ExperimentKind::GmmEstimation => "gmm_estimation",
            ExperimentKind::BasinHeatmapK2 => "basin_heatmap_k2",
            ExperimentKind::BasinHeatmapK3 => "basin_heatmap_k3",
            ExperimentKind::LogdecayRate => "logdecay_rate",
            ExperimentKind::PhasePlot => "phase_plot",
            ExperimentKind::CouponInit => "coupon_init",
        }
    }

    /// Names of the grid coordinates, in CSV column order.
    pub fn grid_names(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::RecoveryVsDelta => &["delta"],
            ExperimentKind::RuntimeScaling => &["n"],
            ExperimentKind::GmmEstimation => &["dataset"],
            ExperimentKind::BasinHeatmapK2 | ExperimentKind::BasinHeatmapK3 => &["delta", "radius"],
            ExperimentKind::LogdecayRate => &["eta", "delta"],
            ExperimentKind::PhasePlot => &["delta", "cos_theta"],
            ExperimentKind::CouponInit => &[],
        }
    }

    /// Names of the auxiliary scalar columns.
    pub fn aux_names(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::GmmEstimation => &["w2"],
            ExperimentKind::LogdecayRate => &["delta_cos_theta", "bound"],
            ExperimentKind::PhasePlot => &["delta_cos_theta"],
            ExperimentKind::CouponInit => &["r", "structure_ok"],
            _ => &[],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown experiment {s:?}")))
    }
}

/// Experiment configuration. Every field except `experiment` has a
/// per-experiment default; see [`ExperimentConfig::defaults`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub out: PathBuf,
    pub trials: usize,
    pub algos: Vec<Variant>,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Planted separations.
    pub deltas: Vec<f64>,
    /// Initialization perturbation radii (basin heat maps).
    pub radii: Vec<f64>,
    /// Sample sizes (runtime scaling).
    pub n_list: Vec<usize>,
    /// Values of `Delta cos theta` (log-decay experiment).
    pub etas: Vec<f64>,
    /// Values of `cos theta` (phase plot).
    pub cos_thetas: Vec<f64>,
    /// Number of independent datasets (GMM experiment); `trials` runs each.
    pub datasets: usize,
    pub epsilon: f64,
    /// Per-algorithm median cutoff for runtime scaling, in milliseconds.
    pub cutoff_ms: f64,
    /// Write wall-clock times to the CSV. Off by default except for
    /// runtime scaling so that reruns produce identical files.
    pub record_timing: bool,
    pub max_iters: usize,
    pub term_eps: f64,
    pub sinkhorn: SinkhornParams,
}

fn grid(start: f64, step: f64, count: usize) -> Vec<f64> {
    // rounded to 10 decimals so that 1.5 + 3*0.05 prints as 1.65
    (0..count).map(|i| ((start + step * i as f64) * 1e10).round() / 1e10).collect()
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            seed: 0,
            out: PathBuf::from("results"),
            trials: 20,
            algos: vec![Variant::Exact],
            n: 100,
            d: 2,
            k: 2,
            deltas: Vec::new(),
            radii: Vec::new(),
            n_list: Vec::new(),
            etas: Vec::new(),
            cos_thetas: Vec::new(),
            datasets: 1,
            epsilon: 0.05,
            cutoff_ms: 10_000.0,
            record_timing: false,
            max_iters: 100,
            term_eps: 1e-9,
            sinkhorn: SinkhornParams::default(),
        };
        match kind {
            ExperimentKind::RecoveryVsDelta => {
                cfg.trials = 200;
                cfg.algos = Variant::ALL.to_vec();
                cfg.deltas = grid(1.5, 0.05, 17);
            }
            ExperimentKind::RuntimeScaling => {
                cfg.trials = 10;
                cfg.algos = Variant::ALL.to_vec();
                cfg.deltas = vec![3.0];
                cfg.n_list = (4..=18).map(|p| 1usize << p).collect();
                cfg.record_timing = true;
            }
            ExperimentKind::GmmEstimation => {
                cfg.trials = 10;
                cfg.datasets = 50;
                cfg.n = 2000;
                cfg.k = 5;
                cfg.algos = vec![Variant::Exact, Variant::Entropic, Variant::Lloyd];
            }
            ExperimentKind::BasinHeatmapK2 => {
                cfg.trials = 200;
                cfg.deltas = grid(2.1, 0.1, 10);
                cfg.radii = grid(0.1, 0.1, 10);
            }
            ExperimentKind::BasinHeatmapK3 => {
                cfg.trials = 200;
                cfg.n = 300;
                cfg.k = 3;
                cfg.deltas = grid(2.1, 0.1, 10);
                cfg.radii = grid(0.1, 0.1, 10);
            }
            ExperimentKind::LogdecayRate => {
                cfg.trials = 10;
                cfg.n = 2000;
                cfg.d = 25;
                cfg.etas = grid(0.075, 0.075, 20);
                cfg.deltas = grid(2.1, 0.1, 20);
            }
            ExperimentKind::PhasePlot => {
                cfg.trials = 20;
                cfg.n = 10_000;
                cfg.deltas = grid(2.1, 0.1, 20);
                cfg.cos_thetas = grid(0.05, 0.05, 20);
            }
            ExperimentKind::CouponInit => {
                cfg.trials = 1500;
                cfg.n = 1200;
                cfg.k = 3;
                cfg.deltas = vec![3.0];
                cfg.epsilon = 0.4;
            }
        }
        cfg
    }

    /// Parse a JSON object; missing keys take the experiment's defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidArgument("experiment config must be a JSON object".into()))?;
        let kind: ExperimentKind = serde_json::from_value(
            obj.get("experiment")
                .cloned()
                .ok_or_else(|| Error::InvalidArgument("config is missing \"experiment\"".into()))?,
        )?;
        let mut merged = serde_json::to_value(Self::defaults(kind))?;
        let target = merged.as_object_mut().expect("struct serializes to an object");
        for (key, v) in obj {
            target.insert(key.clone(), v.clone());
        }
        let cfg: Self = serde_json::from_value(merged)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("{}: {msg}", self.experiment)));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.algos.is_empty() {
            return bad("algos must be nonempty");
        }
        let needs: &[(&str, bool)] = match self.experiment {
            ExperimentKind::RecoveryVsDelta => &[("deltas", self.deltas.is_empty())],
            ExperimentKind::RuntimeScaling => &[("n_list", self.n_list.is_empty())],
            ExperimentKind::GmmEstimation => &[("datasets", self.datasets == 0)],
            ExperimentKind::BasinHeatmapK2 | ExperimentKind::BasinHeatmapK3 => {
                &[("deltas", self.deltas.is_empty()), ("radii", self.radii.is_empty())]
            }
            ExperimentKind::LogdecayRate => &[("etas", self.etas.is_empty()), ("deltas", self.deltas.is_empty())],
            ExperimentKind::PhasePlot => {
                &[("deltas", self.deltas.is_empty()), ("cos_thetas", self.cos_thetas.is_empty())]
            }
            ExperimentKind::CouponInit => &[("deltas", self.deltas.is_empty())],
        };
        for (name, empty) in needs {
            if *empty {
                return bad(&format!("grid {name} must be nonempty"));
            }
        }
        if self.k == 0 || !self.n.is_multiple_of(self.k) {
            return Err(Error::Unbalanced { n: self.n, k: self.k });
        }
        if self.max_iters == 0 || !(self.term_eps > 0.0) {
            return bad("max_iters and term_eps must be positive");
        }
        self.sinkhorn.validate()
    }

    /// Seed of one trial: a pure function of the master seed, the
    /// experiment, the grid indices and the trial index.
    pub fn trial_seed(&self, grid_index: &[usize], trial: usize) -> u64 {
        let mut path = vec![tag(self.experiment.id())];
        path.extend(grid_index.iter().map(|&i| i as u64));
        path.push(trial as u64);
        derive_seed(self.seed, &path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub experiment: ExperimentKind,
    pub grid: Vec<f64>,
    pub trial: usize,
    pub seed: u64,
    pub algo: Variant,
    pub exact: bool,
    pub misclustering_rate: f64,
    pub iters: usize,
    pub millis: f64,
    pub aux: Vec<f64>,
    /// Set when the trial failed; the other outcome fields are then
    /// placeholders.
    pub error: Option<String>,
}

impl TrialRecord {
    pub(crate) fn failed(
        experiment: ExperimentKind,
        grid: Vec<f64>,
        trial: usize,
        seed: u64,
        algo: Variant,
        msg: String,
    ) -> Self {
        Self {
            experiment,
            grid,
            trial,
            seed,
            algo,
            exact: false,
            misclustering_rate: f64::NAN,
            iters: 0,
            millis: f64::NAN,
            aux: vec![f64::NAN; experiment.aux_names().len()],
            error: Some(msg),
        }
    }

    pub fn aux(&self, name: &str) -> Option<f64> {
        let idx = self.experiment.aux_names().iter().position(|&a| a == name)?;
        self.aux.get(idx).copied()
    }
}

/// Unit of parallel work: everything a worker needs to produce the
/// records of one (grid point, trial).
#[derive(Clone, Debug)]
pub(crate) struct TrialJob {
    pub grid_index: Vec<usize>,
    pub grid: Vec<f64>,
    pub trial: usize,
    pub seed: u64,
}

pub(crate) fn guarded<F>(job: &TrialJob, cfg: &ExperimentConfig, algos: &[Variant], body: F) -> Vec<TrialRecord>
where
    F: FnOnce() -> Result<Vec<TrialRecord>>,
{
    let fail = |msg: String| {
        algos
            .iter()
            .map(|&a| TrialRecord::failed(cfg.experiment, job.grid.clone(), job.trial, job.seed, a, msg.clone()))
            .collect()
    };
    match panic::catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(records)) => records,
        Ok(Err(e)) => fail(e.to_string()),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "trial panicked".into());
            fail(format!("panic: {msg}"))
        }
    }
}

/// Run jobs on a pool of `jobs` threads; results keep job order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
    pub svg_path: PathBuf,
}

/// Execute the experiment grid and write `<id>.csv`, `<id>_summary.csv`
/// and `<id>.svg` into `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;
    let records = experiments::run_records(cfg, jobs)?;
    let id = cfg.experiment.id();
    let csv_path = cfg.out.join(format!("{id}.csv"));
    write_atomic(&csv_path, &records_csv(cfg, &records))?;
    let summary = experiments::summarize(cfg, &records);
    let summary_path = cfg.out.join(format!("{id}_summary.csv"));
    write_atomic(&summary_path, &summary.to_csv())?;
    let svg_path = cfg.out.join(format!("{id}.svg"));
    write_atomic(&svg_path, &experiments::plot(cfg, &summary, &records))?;
    Ok(ExperimentOutput { records, csv_path, summary_path, svg_path })
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn fmt_cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format_f64(x)
    }
}

fn fmt_grid(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// The per-trial CSV: grid columns, then
/// `algo,trial,seed,exact,misclustering_rate,iters,millis`, then auxiliary
/// columns, then `error` when any trial failed.
pub fn records_csv(cfg: &ExperimentConfig, records: &[TrialRecord]) -> String {
    let kind = cfg.experiment;
    let with_error = records.iter().any(|r| r.error.is_some());
    let mut header: Vec<&str> = kind.grid_names().to_vec();
    header.extend(["algo", "trial", "seed", "exact", "misclustering_rate", "iters", "millis"]);
    header.extend(kind.aux_names());
    if with_error {
        header.push("error");
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in records {
        let mut row: Vec<String> = r.grid.iter().map(|&g| fmt_grid(g)).collect();
        row.push(r.algo.algo_name().into());
        row.push(r.trial.to_string());
        row.push(r.seed.to_string());
        row.push(if r.exact { "1" } else { "0" }.into());
        row.push(fmt_cell(r.misclustering_rate));
        row.push(r.iters.to_string());
        row.push(if cfg.record_timing { format!("{:.3}", r.millis) } else { String::new() });
        row.extend(r.aux.iter().map(|&a| fmt_cell(a)));
        if with_error {
            row.push(r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Aggregated table behind each plot.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Summary {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}
