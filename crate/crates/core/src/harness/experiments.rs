use std::time::Instant;

use ndarray::{Array1, Array2};

use super::svg::{self, Axis, Scale, Series};
use super::{guarded, parallel_map, ExperimentConfig, ExperimentKind, Summary, TrialJob, TrialRecord};
use crate::ballot::{run, RunConfig, Variant};
use crate::datagen::{make_centers, sample_ball_model_with, sample_gmm, BallModelSpec, CenterKind, NoiseLaw};
use crate::error::{Error, Result};
use crate::init::{coupon_collect_init, kmeanspp, perturbed_truth_init, random_unit_vector, CouponParams};
use crate::metrics::{basin_threshold, delta_cos_theta, log_decay_reference, misclustering_bound, misclustering_rate, wasserstein2_centroids};
use crate::model::{Centroids, ClusterAssignment, Dataset};
use crate::rng::{derive_seed, rng_from_seed, tag, Rng};

fn sub_rng(seed: u64, name: &str) -> Rng {
    rng_from_seed(derive_seed(seed, &[tag(name)]))
}

fn run_config(cfg: &ExperimentConfig, variant: Variant) -> RunConfig {
    RunConfig { term_eps: cfg.term_eps, max_iters: cfg.max_iters, variant, sinkhorn: cfg.sinkhorn }
}

pub fn median(values: &[f64]) -> f64 {
    svg::five_numbers(values).map_or(f64::NAN, |f| f[2])
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn runtime_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Labels of the first assignment update `F^1` from `mu0`.
pub fn one_step_labels(data: &Dataset, mu0: &Centroids, cfg: &RunConfig) -> Result<ClusterAssignment> {
    let one = RunConfig { max_iters: 1, ..*cfg };
    Ok(run(data, mu0, &one)?.assignment)
}

/// Two-center initialization whose difference direction makes angle
/// `acos(cos_theta)` with the planted difference, in a uniformly random
/// orthogonal plane. Placed symmetrically about the planted midpoint with
/// the planted separation.
pub fn oriented_init(centers: &Centroids, cos_theta: f64, rng: &mut Rng) -> Result<Centroids> {
    if centers.k() != 2 {
        return Err(Error::InvalidArgument("oriented initialization needs k=2".into()));
    }
    if !(0.0..=1.0).contains(&cos_theta) {
        return Err(Error::InvalidArgument(format!("cos theta must lie in [0,1], got {cos_theta}")));
    }
    let d = centers.d();
    let diff: Array1<f64> = &centers.center(1) - &centers.center(0);
    let sep = diff.dot(&diff).sqrt();
    let e = &diff / sep;
    let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
    let dir = if d == 1 || sin_theta == 0.0 {
        e.clone()
    } else {
        let perp = loop {
            let g = random_unit_vector(d, rng);
            let p = &g - &(&e * g.dot(&e));
            let norm = p.dot(&p).sqrt();
            if norm > 1e-8 {
                break p / norm;
            }
        };
        &e * cos_theta + &perp * sin_theta
    };
    let mid: Array1<f64> = (&centers.center(0) + &centers.center(1)) / 2.0;
    let mut mu = Array2::zeros((2, d));
    mu.row_mut(0).assign(&(&mid - &(&dir * (sep / 2.0))));
    mu.row_mut(1).assign(&(&mid + &(&dir * (sep / 2.0))));
    Centroids::new(mu)
}

/// Smallest `r` such that every listed point lies within `r` of some center.
pub fn proto_radius(data: &Dataset, centers: &Centroids, idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| {
            (0..centers.k())
                .map(|j| {
                    let diff = &data.point(i) - &centers.center(j);
                    diff.dot(&diff).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn ball_data(n: usize, centers: &Centroids, noise: NoiseLaw, rng: &mut Rng) -> Result<Dataset> {
    sample_ball_model_with(&BallModelSpec { n, centers: centers.clone(), noise, seed: 0 }, rng)
}

fn planted_centers_for(kind: ExperimentKind, delta: f64, k: usize, d: usize) -> Result<Centroids> {
    let shape = match (kind, k) {
        (_, 2) => CenterKind::Segment { delta },
        (_, 3) => CenterKind::Equilateral { delta },
        _ => {
            return Err(Error::InvalidArgument(format!("{kind} supports k=2 (segment) or k=3 (triangle), got {k}")));
        }
    };
    let (centers, _) = make_centers(shape, k, d, &mut rng_from_seed(0))?;
    Ok(centers)
}

struct Outcome {
    exact: bool,
    rate: f64,
    iters: usize,
    millis: f64,
    aux: Vec<f64>,
}

fn record(cfg: &ExperimentConfig, job: &TrialJob, algo: Variant, o: Outcome) -> TrialRecord {
    TrialRecord {
        experiment: cfg.experiment,
        grid: job.grid.clone(),
        trial: job.trial,
        seed: job.seed,
        algo,
        exact: o.exact,
        misclustering_rate: o.rate,
        iters: o.iters,
        millis: o.millis,
        aux: o.aux,
        error: None,
    }
}

fn full_run(data: &Dataset, mu0: &Centroids, cfg: &ExperimentConfig, algo: Variant, aux_of: impl Fn(&Centroids) -> Result<Vec<f64>>) -> Result<Outcome> {
    let start = Instant::now();
    let trace = run(data, mu0, &run_config(cfg, algo))?;
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let planted = data.planted().ok_or_else(|| Error::InvalidArgument("dataset has no planted labels".into()))?;
    let rep = misclustering_rate(planted, &trace.assignment)?;
    Ok(Outcome {
        exact: rep.exact,
        rate: rep.misclustering_rate,
        iters: trace.iters(),
        millis,
        aux: aux_of(&trace.centroids)?,
    })
}

fn one_step(data: &Dataset, mu0: &Centroids, cfg: &ExperimentConfig, algo: Variant, aux: Vec<f64>) -> Result<Outcome> {
    let start = Instant::now();
    let labels = one_step_labels(data, mu0, &run_config(cfg, algo))?;
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let rep = misclustering_rate(data.planted().expect("sampled data is planted"), &labels)?;
    Ok(Outcome { exact: rep.exact, rate: rep.misclustering_rate, iters: 1, millis, aux })
}

fn jobs_for(cfg: &ExperimentConfig, axes: &[Vec<f64>]) -> Vec<TrialJob> {
    let mut cells: Vec<(Vec<usize>, Vec<f64>)> = vec![(Vec::new(), Vec::new())];
    for axis in axes {
        let mut next = Vec::new();
        for (idx, vals) in &cells {
            for (i, &v) in axis.iter().enumerate() {
                let mut idx = idx.clone();
                let mut vals = vals.clone();
                idx.push(i);
                vals.push(v);
                next.push((idx, vals));
            }
        }
        cells = next;
    }
    let mut jobs = Vec::new();
    for (grid_index, grid) in cells {
        for trial in 0..cfg.trials {
            let seed = cfg.trial_seed(&grid_index, trial);
            jobs.push(TrialJob { grid_index: grid_index.clone(), grid: grid.clone(), trial, seed });
        }
    }
    jobs
}

fn run_grid<F>(cfg: &ExperimentConfig, jobs: usize, axes: &[Vec<f64>], trial: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(&TrialJob) -> Result<Vec<TrialRecord>> + Sync + Send,
{
    let work = jobs_for(cfg, axes);
    let nested = parallel_map(&work, jobs, |job| guarded(job, cfg, &cfg.algos, || trial(job)))?;
    Ok(nested.into_iter().flatten().collect())
}

pub(crate) fn run_records(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<TrialRecord>> {
    match cfg.experiment {
        ExperimentKind::RecoveryVsDelta => run_grid(cfg, jobs, std::slice::from_ref(&cfg.deltas), |job| {
            let centers = planted_centers_for(cfg.experiment, job.grid[0], cfg.k, cfg.d)?;
            let data = ball_data(cfg.n, &centers, NoiseLaw::UniformBall, &mut sub_rng(job.seed, "data"))?;
            let mu0 = kmeanspp(&data, cfg.k, &mut sub_rng(job.seed, "init"))?;
            cfg.algos
                .iter()
                .map(|&algo| Ok(record(cfg, job, algo, full_run(&data, &mu0, cfg, algo, |_| Ok(vec![]))?)))
                .collect()
        }),
        ExperimentKind::RuntimeScaling => runtime_records(cfg),
        ExperimentKind::GmmEstimation => {
            let datasets: Vec<f64> = (0..cfg.datasets).map(|i| i as f64).collect();
            run_grid(cfg, jobs, &[datasets], |job| {
                let ds = job.grid_index[0] as u64;
                let data_seed = derive_seed(cfg.seed, &[tag(cfg.experiment.id()), tag("dataset"), ds]);
                let mut rng = rng_from_seed(data_seed);
                let (centers, _) = make_centers(CenterKind::Gaussian { scale: 5.0 }, cfg.k, cfg.d, &mut rng)?;
                let data = sample_gmm(&centers, cfg.n, &mut rng)?;
                let mu0 = kmeanspp(&data, cfg.k, &mut sub_rng(job.seed, "init"))?;
                cfg.algos
                    .iter()
                    .map(|&algo| {
                        let o = full_run(&data, &mu0, cfg, algo, |mu| Ok(vec![wasserstein2_centroids(mu, &centers)?]))?;
                        Ok(record(cfg, job, algo, o))
                    })
                    .collect()
            })
        }
        ExperimentKind::BasinHeatmapK2 | ExperimentKind::BasinHeatmapK3 => {
            run_grid(cfg, jobs, &[cfg.deltas.clone(), cfg.radii.clone()], |job| {
                let centers = planted_centers_for(cfg.experiment, job.grid[0], cfg.k, cfg.d)?;
                let data = ball_data(cfg.n, &centers, NoiseLaw::UniformSphere, &mut sub_rng(job.seed, "data"))?;
                let mu0 = perturbed_truth_init(&centers, job.grid[1], &mut sub_rng(job.seed, "init"))?;
                cfg.algos
                    .iter()
                    .map(|&algo| Ok(record(cfg, job, algo, one_step(&data, &mu0, cfg, algo, vec![])?)))
                    .collect()
            })
        }
        ExperimentKind::LogdecayRate | ExperimentKind::PhasePlot => {
            let axes = if cfg.experiment == ExperimentKind::LogdecayRate {
                vec![cfg.etas.clone(), cfg.deltas.clone()]
            } else {
                vec![cfg.deltas.clone(), cfg.cos_thetas.clone()]
            };
            run_grid(cfg, jobs, &axes, |job| {
                let (delta, cos_theta) = if cfg.experiment == ExperimentKind::LogdecayRate {
                    (job.grid[1], job.grid[0] / job.grid[1])
                } else {
                    (job.grid[0], job.grid[1])
                };
                let centers = planted_centers_for(cfg.experiment, delta, 2, cfg.d)?;
                let data = ball_data(cfg.n, &centers, NoiseLaw::UniformSphere, &mut sub_rng(job.seed, "data"))?;
                let mu0 = oriented_init(&centers, cos_theta.min(1.0), &mut sub_rng(job.seed, "init"))?;
                let (sep, cos) = delta_cos_theta(&mu0, &centers)?;
                let dct = sep * cos;
                let mut aux = vec![dct];
                if cfg.experiment == ExperimentKind::LogdecayRate {
                    aux.push(misclustering_bound(cfg.d, cfg.n, dct, cfg.epsilon)?);
                }
                cfg.algos
                    .iter()
                    .map(|&algo| Ok(record(cfg, job, algo, one_step(&data, &mu0, cfg, algo, aux.clone())?)))
                    .collect()
            })
        }
        ExperimentKind::CouponInit => run_grid(cfg, jobs, &[], |job| {
            let delta = cfg.deltas[0];
            let centers = planted_centers_for(cfg.experiment, delta, cfg.k, cfg.d)?;
            let params = CouponParams::new(cfg.epsilon, delta, cfg.k)?;
            let noise = NoiseLaw::radial_for_second_moment(params.sigma_sq_max())?;
            let data = ball_data(cfg.n, &centers, noise, &mut sub_rng(job.seed, "data"))?;
            let outcome = coupon_collect_init(&data, &params, &mut sub_rng(job.seed, "init"))?;
            let proto = match &outcome {
                Ok(init) => init.proto_indices.clone(),
                Err(fail) => fail.proto_indices.clone(),
            };
            let r = proto_radius(&data, &centers, &proto);
            cfg.algos
                .iter()
                .map(|&algo| {
                    let o = match &outcome {
                        Ok(init) => one_step(&data, &init.centroids, cfg, algo, vec![r, 1.0])?,
                        Err(_) => Outcome { exact: false, rate: f64::NAN, iters: 0, millis: 0.0, aux: vec![r, 0.0] },
                    };
                    Ok(record(cfg, job, algo, o))
                })
                .collect()
        }),
    }
}

/// Timing runs execute one at a time so that measurements do not compete
/// for cores. An algorithm stops growing `n` once its median exceeds
/// `cutoff_ms`; within one `n`, it stops early once a majority of the
/// planned trials are already over the cutoff.
fn runtime_records(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    let delta = cfg.deltas[0];
    let centers = planted_centers_for(cfg.experiment, delta, cfg.k, cfg.d)?;
    let mut out = Vec::new();
    let mut stopped = vec![false; cfg.algos.len()];
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        if stopped.iter().all(|&s| s) {
            break;
        }
        let mut times: Vec<Vec<f64>> = vec![Vec::new(); cfg.algos.len()];
        for trial in 0..cfg.trials {
            let seed = cfg.trial_seed(&[ni], trial);
            let job = TrialJob { grid_index: vec![ni], grid: vec![n as f64], trial, seed };
            let live: Vec<Variant> = cfg
                .algos
                .iter()
                .enumerate()
                .filter(|&(a, _)| !stopped[a] && times[a].iter().filter(|&&t| t > cfg.cutoff_ms).count() * 2 <= cfg.trials)
                .map(|(_, &v)| v)
                .collect();
            if live.is_empty() {
                break;
            }
            let recs = guarded(&job, cfg, &live, || {
                if n % cfg.k != 0 {
                    return Err(Error::Unbalanced { n, k: cfg.k });
                }
                let data = ball_data(n, &centers, NoiseLaw::UniformBall, &mut sub_rng(seed, "data"))?;
                let mu0 = kmeanspp(&data, cfg.k, &mut sub_rng(seed, "init"))?;
                live.iter()
                    .map(|&algo| Ok(record(cfg, &job, algo, full_run(&data, &mu0, cfg, algo, |_| Ok(vec![]))?)))
                    .collect()
            });
            for r in recs {
                let a = cfg.algos.iter().position(|&v| v == r.algo).expect("algo from config");
                times[a].push(r.millis);
                out.push(r);
            }
        }
        for (a, t) in times.iter().enumerate() {
            if !t.is_empty() && median(t) > cfg.cutoff_ms {
                stopped[a] = true;
            }
        }
    }
    Ok(out)
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn fraction(records: &[&TrialRecord]) -> f64 {
    let ok: Vec<&&TrialRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    if ok.is_empty() {
        return f64::NAN;
    }
    ok.iter().filter(|r| r.exact).count() as f64 / ok.len() as f64
}

fn select(records: &[TrialRecord], pred: impl Fn(&TrialRecord) -> bool) -> Vec<&TrialRecord> {
    records.iter().filter(|r| pred(r)).collect()
}

fn fmt_num(x: f64) -> String {
    super::fmt_grid(x)
}

pub(crate) fn summarize(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Summary {
    let mut s = Summary::default();
    let h = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    match cfg.experiment {
        ExperimentKind::RecoveryVsDelta => {
            s.header = h(&["delta", "algo", "recovery_fraction", "trials", "failed"]);
            for &delta in &cfg.deltas {
                for &algo in &cfg.algos {
                    let sel = select(records, |r| r.grid[0] == delta && r.algo == algo);
                    let failed = sel.iter().filter(|r| r.error.is_some()).count();
                    s.rows.push(vec![fmt_num(delta), algo.to_string(), cell(fraction(&sel)), sel.len().to_string(), failed.to_string()]);
                }
            }
        }
        ExperimentKind::RuntimeScaling => {
            s.header = h(&["n", "algo", "median_millis", "trials", "slope"]);
            for &algo in &cfg.algos {
                let (ns, meds) = runtime_medians(cfg, records, algo);
                let slope = runtime_slope(&ns, &meds);
                for (n, m) in ns.iter().zip(&meds) {
                    let count = select(records, |r| r.grid[0] == *n && r.algo == algo && r.error.is_none()).len();
                    s.rows.push(vec![fmt_num(*n), algo.to_string(), format!("{m:.4}"), count.to_string(), format!("{slope:.4}")]);
                }
            }
        }
        ExperimentKind::GmmEstimation => {
            s.header = h(&["algo", "min", "q1", "median", "q3", "max", "runs"]);
            for &algo in &cfg.algos {
                let w: Vec<f64> = select(records, |r| r.algo == algo).iter().filter_map(|r| r.aux("w2")).collect();
                let mut row = vec![algo.to_string()];
                match svg::five_numbers(&w) {
                    Some(f) => row.extend(f.iter().map(|&x| cell(x))),
                    None => row.extend(std::iter::repeat_n(String::new(), 5)),
                }
                row.push(w.len().to_string());
                s.rows.push(row);
            }
        }
        ExperimentKind::BasinHeatmapK2 | ExperimentKind::BasinHeatmapK3 => {
            s.header = h(&["delta", "radius", "algo", "recovery_fraction", "threshold", "below_threshold"]);
            for &delta in &cfg.deltas {
                let thr = basin_threshold(delta, cfg.k).unwrap_or(f64::NAN);
                for &radius in &cfg.radii {
                    for &algo in &cfg.algos {
                        let sel = select(records, |r| r.grid == [delta, radius] && r.algo == algo);
                        s.rows.push(vec![
                            fmt_num(delta),
                            fmt_num(radius),
                            algo.to_string(),
                            cell(fraction(&sel)),
                            cell(thr),
                            (if radius < thr { "1" } else { "0" }).into(),
                        ]);
                    }
                }
            }
        }
        ExperimentKind::LogdecayRate => {
            s.header = h(&["eta", "algo", "min", "q1", "median", "q3", "max", "bound", "reference", "fraction_within_bound", "trials"]);
            for &eta in &cfg.etas {
                for &algo in &cfg.algos {
                    let sel = select(records, |r| r.grid[0] == eta && r.algo == algo && r.error.is_none());
                    let rates: Vec<f64> = sel.iter().map(|r| r.misclustering_rate).collect();
                    let bound = misclustering_bound(cfg.d, cfg.n, eta, cfg.epsilon).unwrap_or(f64::NAN);
                    let within = sel
                        .iter()
                        .filter(|r| r.misclustering_rate <= r.aux("bound").unwrap_or(f64::NAN))
                        .count() as f64
                        / sel.len().max(1) as f64;
                    let mut row = vec![fmt_num(eta), algo.to_string()];
                    match svg::five_numbers(&rates) {
                        Some(f) => row.extend(f.iter().map(|&x| cell(x))),
                        None => row.extend(std::iter::repeat_n(String::new(), 5)),
                    }
                    row.extend([cell(bound), cell(log_decay_reference(cfg.d, eta)), cell(within), sel.len().to_string()]);
                    s.rows.push(row);
                }
            }
        }
        ExperimentKind::PhasePlot => {
            s.header = h(&["delta", "cos_theta", "algo", "mean_misclustering_rate", "recovery_fraction"]);
            for &delta in &cfg.deltas {
                for &c in &cfg.cos_thetas {
                    for &algo in &cfg.algos {
                        let sel = select(records, |r| r.grid == [delta, c] && r.algo == algo && r.error.is_none());
                        let mean = sel.iter().map(|r| r.misclustering_rate).sum::<f64>() / sel.len().max(1) as f64;
                        s.rows.push(vec![fmt_num(delta), fmt_num(c), algo.to_string(), cell(mean), cell(fraction(&sel))]);
                    }
                }
            }
        }
        ExperimentKind::CouponInit => {
            s.header = h(&["r", "fraction_r_at_most"]);
            let rs: Vec<f64> = select(records, |r| r.algo == cfg.algos[0]).iter().filter_map(|r| r.aux("r")).collect();
            for i in 0..=100 {
                let t = i as f64 / 100.0;
                let frac = rs.iter().filter(|&&r| r <= t).count() as f64 / rs.len().max(1) as f64;
                s.rows.push(vec![fmt_num(t), cell(frac)]);
            }
        }
    }
    s
}

fn runtime_medians(cfg: &ExperimentConfig, records: &[TrialRecord], algo: Variant) -> (Vec<f64>, Vec<f64>) {
    let mut ns = Vec::new();
    let mut meds = Vec::new();
    for &n in &cfg.n_list {
        let t: Vec<f64> = select(records, |r| r.grid[0] == n as f64 && r.algo == algo && r.error.is_none())
            .iter()
            .map(|r| r.millis)
            .collect();
        if t.is_empty() {
            continue;
        }
        let m = median(&t);
        // only points at or under the cutoff enter the fit
        if m > cfg.cutoff_ms {
            break;
        }
        ns.push(n as f64);
        meds.push(m);
    }
    (ns, meds)
}

pub(crate) fn plot(cfg: &ExperimentConfig, summary: &Summary, records: &[TrialRecord]) -> String {
    let col = |name: &str| summary.header.iter().position(|h| h == name).expect("summary column");
    let num = |row: &Vec<String>, name: &str| row[col(name)].parse::<f64>().unwrap_or(f64::NAN);
    match cfg.experiment {
        ExperimentKind::RecoveryVsDelta => {
            let series: Vec<Series> = cfg
                .algos
                .iter()
                .map(|&a| {
                    let pts = summary
                        .rows
                        .iter()
                        .filter(|r| r[col("algo")] == a.algo_name())
                        .map(|r| (num(r, "delta"), num(r, "recovery_fraction")))
                        .collect();
                    Series::new(a.algo_name(), pts)
                })
                .collect();
            svg::line_plot(
                "exact recovery vs separation",
                Axis::fit("Delta", Scale::Linear, cfg.deltas.iter()),
                Axis::fixed("recovery fraction", Scale::Linear, 0.0, 1.0),
                &series,
            )
        }
        ExperimentKind::RuntimeScaling => {
            let mut all = Vec::new();
            let series: Vec<Series> = cfg
                .algos
                .iter()
                .map(|&a| {
                    let (ns, meds) = runtime_medians(cfg, records, a);
                    all.extend(meds.iter().copied());
                    let slope = runtime_slope(&ns, &meds);
                    Series::new(&format!("{} ({slope:.2})", a.algo_name()), ns.into_iter().zip(meds).collect())
                })
                .collect();
            let xs: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
            svg::line_plot(
                "median runtime",
                Axis::fit("n", Scale::Log10, xs.iter()),
                Axis::fit("milliseconds", Scale::Log10, all.iter()),
                &series,
            )
        }
        ExperimentKind::GmmEstimation => {
            let groups: Vec<(String, Vec<f64>)> = cfg
                .algos
                .iter()
                .map(|&a| {
                    (a.to_string(), select(records, |r| r.algo == a).iter().filter_map(|r| r.aux("w2")).collect())
                })
                .collect();
            svg::categorical_box_plot("centroid 2-Wasserstein error", "W2", &groups)
        }
        ExperimentKind::BasinHeatmapK2 | ExperimentKind::BasinHeatmapK3 => {
            let algo = cfg.algos[0];
            let values: Vec<Vec<f64>> = cfg
                .deltas
                .iter()
                .map(|&d| {
                    cfg.radii
                        .iter()
                        .map(|&r| fraction(&select(records, |t| t.grid == [d, r] && t.algo == algo)))
                        .collect()
                })
                .collect();
            let curve = |k: usize| {
                let fine: Vec<(f64, f64)> = (0..=100)
                    .map(|i| {
                        let d = cfg.deltas[0] + (cfg.deltas[cfg.deltas.len() - 1] - cfg.deltas[0]) * i as f64 / 100.0;
                        (d, basin_threshold(d, k).unwrap_or(f64::NAN))
                    })
                    .collect();
                fine
            };
            let mut curves = vec![Series::new("threshold", curve(cfg.k))];
            if cfg.k > 2 {
                curves.push(Series::new("k=2 threshold", curve(2)).dashed());
            }
            svg::heatmap("one-step recovery fraction", ("Delta", &cfg.deltas), ("initial distance", &cfg.radii), &values, &curves)
        }
        ExperimentKind::LogdecayRate => {
            let algo = cfg.algos[0];
            let groups: Vec<(f64, Vec<f64>)> = cfg
                .etas
                .iter()
                .map(|&e| {
                    let v = select(records, |r| r.grid[0] == e && r.algo == algo)
                        .iter()
                        .map(|r| r.misclustering_rate)
                        .filter(|&x| x > 0.0)
                        .collect();
                    (e, v)
                })
                .collect();
            let reference: Vec<(f64, f64)> = cfg.etas.iter().map(|&e| (e, log_decay_reference(cfg.d, e))).collect();
            let mut ys: Vec<f64> = groups.iter().flat_map(|g| g.1.iter().copied()).collect();
            ys.extend(reference.iter().map(|p| p.1));
            svg::box_plot(
                "one-step misclustering rate",
                Axis::fit("Delta cos theta", Scale::Linear, cfg.etas.iter()),
                Axis::fit("misclustering rate", Scale::Log10, ys.iter()),
                &groups,
                &[Series::new("exp(-(d-1)x^2/8)", reference).dashed()],
            )
        }
        ExperimentKind::PhasePlot => {
            let algo = cfg.algos[0];
            let values: Vec<Vec<f64>> = cfg
                .deltas
                .iter()
                .map(|&d| {
                    cfg.cos_thetas
                        .iter()
                        .map(|&c| {
                            let sel = select(records, |r| r.grid == [d, c] && r.algo == algo && r.error.is_none());
                            1.0 - 2.0 * sel.iter().map(|r| r.misclustering_rate).sum::<f64>() / sel.len().max(1) as f64
                        })
                        .collect()
                })
                .collect();
            let guarantee: Vec<(f64, f64)> = cfg.deltas.iter().map(|&d| (d, (2.0 / d).min(1.0))).collect();
            svg::heatmap(
                "one-step accuracy (white = exact)",
                ("Delta", &cfg.deltas),
                ("cos theta", &cfg.cos_thetas),
                &values,
                &[Series::new("Delta cos theta = 2", guarantee)],
            )
        }
        ExperimentKind::CouponInit => {
            let pts: Vec<(f64, f64)> = summary.rows.iter().map(|r| (num(r, "r"), 1.0 - num(r, "fraction_r_at_most"))).collect();
            let basin = cfg.deltas[0] / 2.0 - 1.0;
            svg::line_plot(
                "proto-mean radius survival",
                Axis::fixed("r", Scale::Linear, 0.0, 1.0),
                Axis::fixed("fraction of trials with radius > r", Scale::Linear, 0.0, 1.0),
                &[Series::new("survival", pts), Series::new("Delta/2 - 1", vec![(basin, 0.0), (basin, 1.0)]).dashed()],
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn slope_of_power_laws() {
        let xs: Vec<f64> = (4..12).map(|p| (1u64 << p) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        assert!((runtime_slope(&xs, &ys) - 1.5).abs() < 1e-12);
        assert!(runtime_slope(&xs[..1], &ys[..1]).is_nan());
    }

    #[test]
    fn oriented_init_has_requested_cosine() {
        let centers = Centroids::new(array![[-1.5, 0.0, 0.0], [1.5, 0.0, 0.0]]).unwrap();
        for (i, c) in [0.0, 0.05, 0.3, 2.0 / 3.0, 1.0].into_iter().enumerate() {
            let mu0 = oriented_init(&centers, c, &mut rng_from_seed(i as u64)).unwrap();
            let (sep, cos) = delta_cos_theta(&mu0, &centers).unwrap();
            assert_eq!(sep, 3.0);
            assert!((cos - c).abs() < 1e-12, "{cos} vs {c}");
        }
        assert!(oriented_init(&centers, 1.2, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn proto_radius_is_max_of_nearest_distances() {
        let data = Dataset::new(array![[0.1, 0.0], [3.0, 0.4], [9.0, 9.0]], 1, None).unwrap();
        let centers = Centroids::new(array![[0.0, 0.0], [3.0, 0.0]]).unwrap();
        assert!((proto_radius(&data, &centers, &[0, 1]) - 0.4).abs() < 1e-15);
    }
}
