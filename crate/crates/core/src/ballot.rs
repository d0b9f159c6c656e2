//! Alternating minimization drivers: exact BalLOT, entropic E-BalLOT and the
//! Lloyd and replicated-centroid matching baselines.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::assignment::linear_sum_assignment;
use crate::error::{Error, Result};
use crate::model::{
    centroid_update, objective_value, squared_distances, Centroids, ClusterAssignment, Coupling,
    Dataset,
};
use crate::transport::{exact_kantorovich, round_to_polytope, sinkhorn, CostMatrix, SinkhornParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Exact optimal-transport assignment (BalLOT).
    #[serde(rename = "ballot", alias = "exact")]
    Exact,
    /// Sinkhorn followed by rounding (E-BalLOT).
    #[serde(rename = "eballot", alias = "entropic")]
    Entropic,
    /// Unbalanced nearest-centroid baseline.
    #[serde(rename = "lloyd")]
    Lloyd,
    /// Hungarian matching against `n/k` copies of each centroid.
    #[serde(rename = "matching", alias = "hungarian")]
    Matching,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Exact, Variant::Entropic, Variant::Lloyd, Variant::Matching];

    /// Name used on the command line and in CSV output.
    pub fn algo_name(self) -> &'static str {
        match self {
            Variant::Exact => "ballot",
            Variant::Entropic => "eballot",
            Variant::Lloyd => "lloyd",
            Variant::Matching => "matching",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.algo_name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ballot" | "exact" => Ok(Variant::Exact),
            "eballot" | "entropic" => Ok(Variant::Entropic),
            "lloyd" => Ok(Variant::Lloyd),
            "matching" | "hungarian" => Ok(Variant::Matching),
            other => Err(Error::InvalidArgument(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Stop once `||mu^{t+1} - mu^t||_F < term_eps`.
    pub term_eps: f64,
    pub max_iters: usize,
    pub variant: Variant,
    pub sinkhorn: SinkhornParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            term_eps: 1e-9,
            max_iters: 100,
            variant: Variant::Exact,
            sinkhorn: SinkhornParams::default(),
        }
    }
}

impl RunConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self { variant, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.term_eps > 0.0) {
            return Err(Error::InvalidArgument("term_eps must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.variant == Variant::Entropic {
            self.sinkhorn.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    /// `f(F^{t+1}, mu^{t+1})`.
    pub objective: f64,
    /// `||mu^{t+1} - mu^t||_F`.
    pub displacement: f64,
    pub integral: bool,
    pub millis: f64,
    /// `f(F^{t+1}, mu^t)`: the new coupling priced at the old centroids.
    pub assignment_objective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub variant: Variant,
    pub iterations: Vec<IterationRecord>,
    pub coupling: Coupling,
    pub centroids: Centroids,
    pub assignment: ClusterAssignment,
    pub termination: Termination,
    /// Centroids the run started from.
    pub initial: Centroids,
}

#[derive(Serialize)]
struct TraceJson<'a> {
    variant: &'a str,
    termination: Termination,
    iterations_used: usize,
    iterations: &'a [IterationRecord],
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
}

impl RunTrace {
    pub fn iters(&self) -> usize {
        self.iterations.len()
    }

    /// JSON document with the per-iteration records, final 1-based labels
    /// and final centroids.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = TraceJson {
            variant: self.variant.algo_name(),
            termination: self.termination,
            iterations_used: self.iters(),
            iterations: &self.iterations,
            labels: self.assignment.labels().iter().map(|l| l + 1).collect(),
            centroids: self.centroids.to_rows(),
        };
        serde_json::to_value(doc).expect("trace serializes")
    }
}

fn check_inputs(data: &Dataset, mu: &Centroids) -> Result<()> {
    if mu.k() != data.k() {
        return Err(Error::Dimension(format!(
            "initialization has {} centroids, dataset expects k={}",
            mu.k(),
            data.k()
        )));
    }
    if mu.d() != data.d() {
        return Err(Error::Dimension(format!(
            "initialization has d={}, dataset has d={}",
            mu.d(),
            data.d()
        )));
    }
    Ok(())
}

/// One BalLOT step: optimal balanced assignment at `mu`, then `k X F`.
pub fn ballot_step(data: &Dataset, mu: &Centroids) -> Result<(Coupling, Centroids)> {
    check_inputs(data, mu)?;
    let cost = CostMatrix::squared_euclidean(data, mu)?;
    let f = exact_kantorovich(&cost, data.n(), data.k())?;
    let next = centroid_update(data, &f)?;
    Ok((f, next))
}

/// Hungarian matching of the points to `n/k` copies of each centroid,
/// folded back to an integral `n x k` coupling.
pub fn matching_assignment(data: &Dataset, mu: &Centroids) -> Result<Coupling> {
    check_inputs(data, mu)?;
    let (n, k) = (data.n(), data.k());
    let copies = n / k;
    let cost = squared_distances(data.points(), mu.view());
    let matched = linear_sum_assignment(n, n, |i, slot| cost[[i, slot / copies]])?;
    let labels = matched.into_iter().map(|slot| slot / copies).collect();
    Ok(ClusterAssignment::new(labels, k)?.to_coupling())
}

fn assignment_step(
    data: &Dataset,
    mu: &Centroids,
    cfg: &RunConfig,
) -> Result<(Coupling, CostMatrix)> {
    let cost = CostMatrix::squared_euclidean(data, mu)?;
    let f = match cfg.variant {
        Variant::Exact => exact_kantorovich(&cost, data.n(), data.k())?,
        Variant::Entropic => {
            let approx = sinkhorn(&cost, &cfg.sinkhorn)?;
            round_to_polytope(approx.coupling.weights())?
        }
        Variant::Matching => matching_assignment(data, mu)?,
        Variant::Lloyd => unreachable!("lloyd has its own driver"),
    };
    Ok((f, cost))
}

/// Alternate assignment and centroid updates until the centroids stop
/// moving or `max_iters` is reached.
pub fn run(data: &Dataset, mu0: &Centroids, cfg: &RunConfig) -> Result<RunTrace> {
    cfg.validate()?;
    check_inputs(data, mu0)?;
    if cfg.variant == Variant::Lloyd {
        return lloyd_run(data, mu0, cfg);
    }

    let mut mu = mu0.clone();
    let mut iterations = Vec::new();
    let mut last = None;
    let mut termination = Termination::MaxIters;
    for t in 0..cfg.max_iters {
        let start = Instant::now();
        let (f, cost) = assignment_step(data, &mu, cfg)?;
        let assignment_objective = f.inner(cost.view());
        let next = centroid_update(data, &f)?;
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let objective = objective_value(data, &f, &next)?;
        let displacement = mu.frobenius_sq_dist(&next).sqrt();
        iterations.push(IterationRecord {
            t,
            objective,
            displacement,
            integral: f.is_integral(),
            millis,
            assignment_objective,
        });
        mu = next;
        last = Some(f);
        if displacement < cfg.term_eps {
            termination = Termination::Converged;
            break;
        }
    }
    let coupling = last.expect("max_iters >= 1");
    let assignment = coupling.row_argmax();
    Ok(RunTrace {
        variant: cfg.variant,
        iterations,
        coupling,
        centroids: mu,
        assignment,
        termination,
        initial: mu0.clone(),
    })
}

fn nearest_labels(cost: &Array2<f64>) -> Vec<usize> {
    cost.outer_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &c) in row.iter().enumerate() {
                if c < row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Give every empty cluster the point farthest from its current centroid,
/// taken from a cluster that keeps at least one member.
fn repair_empty(labels: &mut [usize], cost: &Array2<f64>, k: usize) {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_cost = f64::NEG_INFINITY;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] > 1 && cost[[i, l]] > far_cost {
                far_cost = cost[[i, l]];
                far = Some(i);
            }
        }
        if let Some(i) = far {
            sizes[labels[i]] -= 1;
            labels[i] = empty;
            sizes[empty] = 1;
        }
    }
}

fn cluster_means(data: &Dataset, labels: &[usize], k: usize, prev: &Centroids) -> Result<Centroids> {
    let d = data.d();
    let mut sums = Array2::<f64>::zeros((k, d));
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        let mut row = sums.row_mut(l);
        row += &data.point(i);
        counts[l] += 1;
    }
    for j in 0..k {
        if counts[j] == 0 {
            sums.row_mut(j).assign(&prev.center(j));
        } else {
            let c = counts[j] as f64;
            sums.row_mut(j).mapv_inplace(|v| v / c);
        }
    }
    Centroids::new(sums)
}

/// Lloyd's algorithm: nearest-centroid assignment then cluster means.
/// Clusters may end up unbalanced.
pub fn lloyd_run(data: &Dataset, mu0: &Centroids, cfg: &RunConfig) -> Result<RunTrace> {
    cfg.validate()?;
    check_inputs(data, mu0)?;
    let (n, k) = (data.n(), data.k());
    let inv_n = 1.0 / n as f64;

    let mut mu = mu0.clone();
    let mut iterations = Vec::new();
    let mut labels = Vec::new();
    let mut termination = Termination::MaxIters;
    for t in 0..cfg.max_iters {
        let start = Instant::now();
        let cost = squared_distances(data.points(), mu.view());
        let mut next_labels = nearest_labels(&cost);
        repair_empty(&mut next_labels, &cost, k);
        let assignment_objective: f64 =
            next_labels.iter().enumerate().map(|(i, &l)| cost[[i, l]]).sum::<f64>() * inv_n;
        let next = cluster_means(data, &next_labels, k, &mu)?;
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let after = squared_distances(data.points(), next.view());
        let objective: f64 =
            next_labels.iter().enumerate().map(|(i, &l)| after[[i, l]]).sum::<f64>() * inv_n;
        let displacement = mu.frobenius_sq_dist(&next).sqrt();
        iterations.push(IterationRecord {
            t,
            objective,
            displacement,
            integral: true,
            millis,
            assignment_objective,
        });
        mu = next;
        let unchanged = next_labels == labels;
        labels = next_labels;
        if displacement < cfg.term_eps || unchanged {
            termination = Termination::Converged;
            break;
        }
    }
    let assignment = ClusterAssignment::new(labels, k)?;
    let mut w = Array2::zeros((n, k));
    for (i, &l) in assignment.labels().iter().enumerate() {
        w[[i, l]] = inv_n;
    }
    Ok(RunTrace {
        variant: Variant::Lloyd,
        iterations,
        coupling: Coupling::new(w)?,
        centroids: mu,
        assignment,
        termination,
        initial: mu0.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{make_centers, sample_ball_model, BallModelSpec, CenterKind, NoiseLaw};
    use crate::init::kmeanspp;
    use crate::metrics::misclustering_rate;
    use crate::model::descent_identity_residual;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng as _;

    fn line4() -> Dataset {
        Dataset::new(array![[0.0], [1.0], [2.0], [3.0]], 2, None).unwrap()
    }

    fn two_balls(delta: f64, n: usize, seed: u64) -> Dataset {
        let (centers, _) =
            make_centers(CenterKind::Segment { delta }, 2, 2, &mut rng_from_seed(0)).unwrap();
        sample_ball_model(&BallModelSpec { n, centers, noise: NoiseLaw::UniformBall, seed }).unwrap()
    }

    fn planted_centers(data: &Dataset) -> Centroids {
        let rows: Vec<Vec<f64>> = serde_json::from_value(data.meta["centers"].clone()).unwrap();
        Centroids::from_rows(&rows).unwrap()
    }

    #[test]
    fn line_instance_step() {
        let mu = Centroids::new(array![[0.5], [2.5]]).unwrap();
        let (f, next) = ballot_step(&line4(), &mu).unwrap();
        assert_eq!(f.row_argmax().labels(), &[0, 0, 1, 1]);
        assert_eq!(next.view(), array![[0.5], [2.5]]);
    }

    #[test]
    fn duplicate_centroids_still_feasible() {
        let mu = Centroids::new(array![[1.0], [1.0]]).unwrap();
        let (f, _) = ballot_step(&line4(), &mu).unwrap();
        assert!(f.is_feasible());
        assert!(f.is_integral());
        let (g, _) = ballot_step(&line4(), &mu).unwrap();
        assert_eq!(f.weights(), g.weights());
    }

    #[test]
    fn planted_init_recovers_quickly() {
        for seed in 0..20 {
            let data = two_balls(3.0, 100, seed);
            let trace = run(&data, &planted_centers(&data), &RunConfig::default()).unwrap();
            assert_eq!(trace.termination, Termination::Converged);
            assert!(trace.iters() <= 3, "seed {seed}: {} iterations", trace.iters());
            assert!(misclustering_rate(data.planted().unwrap(), &trace.assignment).unwrap().exact);
        }
    }

    #[test]
    fn single_cluster_is_the_global_mean() {
        let data = Dataset::new(array![[0.0, 1.0], [2.0, 5.0], [4.0, 0.0]], 1, None).unwrap();
        let mu0 = Centroids::new(array![[0.0, 1.0]]).unwrap();
        let trace = run(&data, &mu0, &RunConfig::default()).unwrap();
        assert!((trace.iterations[0].displacement - trace.centroids.frobenius_sq_dist(&mu0).sqrt()).abs() < 1e-15);
        let mean = array![[2.0, 2.0]];
        for (a, b) in trace.centroids.view().iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(trace.iters() <= 2);
        let at_mean = run(&data, &Centroids::new(mean).unwrap(), &RunConfig::default()).unwrap();
        assert_eq!(at_mean.iters(), 1);
    }

    #[test]
    fn matching_objective_equals_exact() {
        let mut rng = rng_from_seed(31);
        for _ in 0..100 {
            let pts = Array2::from_shape_fn((8, 2), |_| rng.random_range(-2.0..2.0));
            let mu = Centroids::new(Array2::from_shape_fn((2, 2), |_| rng.random_range(-2.0..2.0))).unwrap();
            let data = Dataset::new(pts, 2, None).unwrap();
            let cost = CostMatrix::squared_euclidean(&data, &mu).unwrap();
            let exact = exact_kantorovich(&cost, 8, 2).unwrap().inner(cost.view());
            let matched = matching_assignment(&data, &mu).unwrap().inner(cost.view());
            assert!((exact - matched).abs() <= 1e-9 * exact.max(1.0));
        }
        let mu = Centroids::new(array![[0.5], [2.5]]).unwrap();
        assert_eq!(matching_assignment(&line4(), &mu).unwrap().row_argmax().labels(), &[0, 0, 1, 1]);
    }

    #[test]
    fn descent_identity_and_telescoping() {
        for seed in 0..30 {
            let data = two_balls(2.2, 60, 100 + seed);
            let mu0 = kmeanspp(&data, 2, &mut rng_from_seed(seed)).unwrap();
            let trace = run(&data, &mu0, &RunConfig::default()).unwrap();
            let mut prev_obj = f64::INFINITY;
            let mut telescoped = 0.0;
            for rec in &trace.iterations {
                assert!(rec.integral);
                assert!(rec.objective <= rec.assignment_objective + 1e-12);
                assert!(rec.assignment_objective <= prev_obj + 1e-12);
                let lhs = rec.assignment_objective;
                let rhs = rec.objective + rec.displacement * rec.displacement / 2.0;
                assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
                telescoped += rec.displacement * rec.displacement;
                prev_obj = rec.objective;
            }
            let first = &trace.iterations[0];
            assert!(telescoped <= 2.0 * first.assignment_objective * (1.0 + 1e-6));
            // cross-check the first step against the model-level residual
            let (f, next) = ballot_step(&data, &mu0).unwrap();
            let before = objective_value(&data, &f, &mu0).unwrap();
            let after = objective_value(&data, &f, &next).unwrap();
            assert!(descent_identity_residual(before, after, &mu0, &next, 2) < 1e-9);
        }
    }

    #[test]
    fn entropic_tracks_exact_on_separated_data() {
        let data = two_balls(3.0, 100, 5);
        let mu0 = kmeanspp(&data, 2, &mut rng_from_seed(5)).unwrap();
        let exact = run(&data, &mu0, &RunConfig::default()).unwrap();
        let ent = run(&data, &mu0, &RunConfig::with_variant(Variant::Entropic)).unwrap();
        let r = misclustering_rate(&exact.assignment, &ent.assignment).unwrap();
        assert!(r.exact);
        assert!(ent.coupling.is_feasible());
    }

    #[test]
    fn lloyd_baselines() {
        let data = two_balls(3.0, 40, 9);
        let planted = planted_centers(&data);
        let trace = lloyd_run(&data, &planted, &RunConfig::with_variant(Variant::Lloyd)).unwrap();
        assert!(misclustering_rate(data.planted().unwrap(), &trace.assignment).unwrap().exact);

        // both seeds inside the left ball
        let left: Vec<usize> =
            (0..40).filter(|&i| data.planted().unwrap().labels()[i] == 0).take(2).collect();
        let mu0 = crate::init::centroids_from_indices(&data, &left).unwrap();
        let trace = lloyd_run(&data, &mu0, &RunConfig::with_variant(Variant::Lloyd)).unwrap();
        let sizes = trace.assignment.cluster_sizes();
        assert!(sizes.iter().all(|&s| s > 0));

        let pts = array![[0.0], [1.0], [5.0]];
        let data = Dataset::new(pts.clone(), 3, None).unwrap();
        let mu0 = Centroids::new(pts).unwrap();
        let trace = run(&data, &mu0, &RunConfig::with_variant(Variant::Lloyd)).unwrap();
        assert_eq!(trace.iterations.last().unwrap().objective, 0.0);
    }

    #[test]
    fn lloyd_repairs_empty_clusters() {
        let data = Dataset::new(array![[0.0], [0.1], [0.2], [10.0]], 2, None).unwrap();
        // second centroid far from everything: starts empty
        let mu0 = Centroids::new(array![[5.0], [1e6]]).unwrap();
        let trace = lloyd_run(&data, &mu0, &RunConfig::with_variant(Variant::Lloyd)).unwrap();
        assert!(trace.assignment.cluster_sizes().iter().all(|&s| s > 0));
    }

    #[test]
    fn trace_json_shape() {
        let mu = Centroids::new(array![[0.5], [2.5]]).unwrap();
        let trace = run(&line4(), &mu, &RunConfig::default()).unwrap();
        let v = trace.to_json();
        assert_eq!(v["labels"], serde_json::json!([1, 1, 2, 2]));
        let it = &v["iterations"][0];
        for key in ["t", "objective", "displacement", "integral", "millis"] {
            assert!(it.get(key).is_some(), "{key}");
        }
        assert_eq!(v["termination"], "converged");
    }

    #[test]
    fn config_and_shape_validation() {
        let mu = Centroids::new(array![[0.5], [2.5], [3.0]]).unwrap();
        assert!(run(&line4(), &mu, &RunConfig::default()).is_err());
        let cfg = RunConfig { term_eps: 0.0, ..RunConfig::default() };
        assert!(run(&line4(), &Centroids::new(array![[0.0], [1.0]]).unwrap(), &cfg).is_err());
        assert_eq!("eballot".parse::<Variant>().unwrap(), Variant::Entropic);
        assert!("kmeans".parse::<Variant>().is_err());
    }
}
