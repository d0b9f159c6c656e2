//! Initial centroid choices.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Centroids, Dataset};
use crate::rng::Rng;

/// k-means++ seeding: the first center uniformly, each later one with
/// probability proportional to the squared distance to the nearest chosen
/// center. Returns the chosen indices alongside the centroids.
pub fn kmeanspp_indices(data: &Dataset, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k-means++ needs 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;

    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data, i, first)).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // fewer than k distinct points: fall back to a uniform unused index
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(data, i, next));
        }
        d2[next] = 0.0;
    }
    Ok(chosen)
}

pub fn kmeanspp(data: &Dataset, k: usize, rng: &mut Rng) -> Result<Centroids> {
    let idx = kmeanspp_indices(data, k, rng)?;
    centroids_from_indices(data, &idx)
}

fn sq_dist(data: &Dataset, a: usize, b: usize) -> f64 {
    data.point(a)
        .iter()
        .zip(data.point(b).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

pub fn centroids_from_indices(data: &Dataset, idx: &[usize]) -> Result<Centroids> {
    let mut mu = Array2::zeros((idx.len(), data.d()));
    for (j, &i) in idx.iter().enumerate() {
        mu.row_mut(j).assign(&data.point(i));
    }
    Centroids::new(mu)
}

/// A pair of points realizing the diameter, lexicographically smallest
/// among ties.
pub fn diameter_pair(data: &Dataset) -> Result<(usize, usize)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidArgument("diameter needs at least two points".into()));
    }
    let mut best = (0, 1);
    let mut best_d = f64::NEG_INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            let d = sq_dist(data, a, b);
            if d > best_d {
                best_d = d;
                best = (a, b);
            }
        }
    }
    Ok(best)
}

/// Two-cluster initialization at a diameter pair.
pub fn diameter_init(data: &Dataset) -> Result<Centroids> {
    let (a, b) = diameter_pair(data)?;
    centroids_from_indices(data, &[a, b])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouponParams {
    pub epsilon: f64,
    pub delta_sep: f64,
    pub k: usize,
}

impl CouponParams {
    pub fn new(epsilon: f64, delta_sep: f64, k: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {epsilon}")));
        }
        if !(delta_sep > 2.0) {
            return Err(Error::InvalidArgument(format!("separation must exceed 2, got {delta_sep}")));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(Self { epsilon, delta_sep, k })
    }

    /// `ceil(k log(2k / epsilon))`.
    pub fn samples(&self) -> usize {
        let k = self.k as f64;
        let raw = k * (2.0 * k / self.epsilon).ln();
        (raw.ceil() as usize).max(self.k)
    }

    /// Proto-means closer than this are adjacent: `min(Delta - 2, 2)`.
    pub fn adjacency_threshold(&self) -> f64 {
        (self.delta_sep - 2.0).min(2.0)
    }

    /// Largest noise second moment covered by the success guarantee.
    pub fn sigma_sq_max(&self) -> f64 {
        let r = self.delta_sep / 2.0 - 1.0;
        0.5 * self.epsilon * r * r / self.samples() as f64
    }
}

/// Proto-mean graph that did not split into `k` disjoint cliques.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructureFailure {
    pub proto_indices: Vec<usize>,
    /// Size of each connected component.
    pub component_sizes: Vec<usize>,
    /// Whether each component is complete.
    pub complete: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct CouponInit {
    pub centroids: Centroids,
    pub proto_indices: Vec<usize>,
    /// One data index per clique (its lowest index).
    pub representatives: Vec<usize>,
}

pub type CouponOutcome = std::result::Result<CouponInit, StructureFailure>;

/// Sample `K` proto-means without replacement and keep one representative
/// per clique when the proximity graph is `k` disjoint cliques.
pub fn coupon_collect_init(data: &Dataset, params: &CouponParams, rng: &mut Rng) -> Result<CouponOutcome> {
    let samples = params.samples();
    if samples > data.n() {
        return Err(Error::InvalidArgument(format!(
            "need {samples} proto-means but the dataset has {} points",
            data.n()
        )));
    }
    if params.k != data.k() {
        return Err(Error::Dimension(format!("params k={} vs dataset k={}", params.k, data.k())));
    }
    let proto = index::sample(rng, data.n(), samples).into_vec();
    Ok(cluster_proto_means(data, &proto, params))
}

/// The clique test on a fixed set of proto-means.
pub fn cluster_proto_means(data: &Dataset, proto: &[usize], params: &CouponParams) -> CouponOutcome {
    let m = proto.len();
    let thr = params.adjacency_threshold();
    let thr_sq = thr * thr;
    let adj: Vec<Vec<bool>> = (0..m)
        .map(|a| (0..m).map(|b| a != b && sq_dist(data, proto[a], proto[b]) <= thr_sq).collect())
        .collect();

    let mut comp = vec![usize::MAX; m];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for s in 0..m {
        if comp[s] != usize::MAX {
            continue;
        }
        let id = members.len();
        let mut stack = vec![s];
        comp[s] = id;
        let mut group = Vec::new();
        while let Some(a) = stack.pop() {
            group.push(a);
            for b in 0..m {
                if adj[a][b] && comp[b] == usize::MAX {
                    comp[b] = id;
                    stack.push(b);
                }
            }
        }
        members.push(group);
    }
    let complete: Vec<bool> = members
        .iter()
        .map(|g| g.iter().all(|&a| g.iter().all(|&b| a == b || adj[a][b])))
        .collect();

    if members.len() != params.k || complete.iter().any(|c| !c) {
        return Err(StructureFailure {
            proto_indices: proto.to_vec(),
            component_sizes: members.iter().map(Vec::len).collect(),
            complete,
        });
    }
    let mut reps: Vec<usize> = members
        .iter()
        .map(|g| g.iter().map(|&a| proto[a]).min().expect("nonempty component"))
        .collect();
    reps.sort_unstable();
    let centroids = centroids_from_indices(data, &reps).expect("finite data");
    Ok(CouponInit { centroids, proto_indices: proto.to_vec(), representatives: reps })
}

/// Uniform direction on the unit sphere in `R^d`.
pub fn random_unit_vector(d: usize, rng: &mut Rng) -> Array1<f64> {
    loop {
        let g: Array1<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.dot(&g).sqrt();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

/// Move every center by exactly `delta` in an independent uniform direction.
pub fn perturbed_truth_init(centers: &Centroids, delta: f64, rng: &mut Rng) -> Result<Centroids> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("perturbation radius must be >= 0, got {delta}")));
    }
    let mut mu = centers.view().to_owned();
    for mut row in mu.outer_iter_mut() {
        let u = random_unit_vector(centers.d(), rng);
        row.scaled_add(delta, &u);
    }
    Centroids::new(mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;

    fn dataset(pts: Array2<f64>, k: usize) -> Dataset {
        Dataset::new(pts, k, None).unwrap()
    }

    #[test]
    fn kmeanspp_k_equals_n_selects_everything() {
        let data = dataset(array![[0.0], [1.0], [5.0], [7.5]], 4);
        let mut idx = kmeanspp_indices(&data, 4, &mut rng_from_seed(3)).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn kmeanspp_two_far_points() {
        let data = dataset(array![[0.0, 0.0], [100.0, 0.0]], 2);
        for seed in 0..50 {
            let mut idx = kmeanspp_indices(&data, 2, &mut rng_from_seed(seed)).unwrap();
            idx.sort_unstable();
            assert_eq!(idx, vec![0, 1]);
        }
    }

    #[test]
    fn kmeanspp_matches_d2_law() {
        // points 0, 1, 3 on a line; law of the second pick given the first
        let coords = [0.0, 1.0, 3.0];
        let data = dataset(array![[0.0], [1.0], [3.0]], 1);
        let mut expected = [0.0; 3];
        for first in 0..3 {
            let w: Vec<f64> = coords.iter().map(|x: &f64| (x - coords[first]).powi(2)).collect();
            let total: f64 = w.iter().sum();
            for j in 0..3 {
                expected[j] += w[j] / total / 3.0;
            }
        }
        let trials = 100_000;
        let mut counts = [0usize; 3];
        for seed in 0..trials {
            let idx = kmeanspp_indices(&data, 2, &mut rng_from_seed(seed)).unwrap();
            counts[idx[1]] += 1;
        }
        for j in 0..3 {
            let p = expected[j];
            let sd = (p * (1.0 - p) / trials as f64).sqrt();
            let got = counts[j] as f64 / trials as f64;
            assert!((got - p).abs() <= 3.0 * sd, "index {j}: {got} vs {p}");
        }
    }

    #[test]
    fn kmeanspp_no_duplicates_with_repeated_points() {
        let data = dataset(array![[0.0], [0.0], [0.0], [2.0], [2.0], [9.0]], 3);
        for seed in 0..200 {
            let idx = kmeanspp_indices(&data, 3, &mut rng_from_seed(seed)).unwrap();
            let mut vals: Vec<i64> = idx.iter().map(|&i| data.point(i)[0] as i64).collect();
            vals.sort_unstable();
            vals.dedup();
            assert_eq!(vals.len(), 3, "seed {seed}: {idx:?}");
        }
        assert!(kmeanspp_indices(&data, 7, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn diameter_two_points_and_errors() {
        let data = dataset(array![[1.0, 2.0], [3.0, -1.0]], 2);
        assert_eq!(diameter_pair(&data).unwrap(), (0, 1));
        let one = dataset(array![[1.0]], 1);
        assert!(diameter_init(&one).is_err());
    }

    #[test]
    fn diameter_ties_are_lexicographic() {
        // square: both diagonals have the same length
        let data = dataset(array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], 2);
        assert_eq!(diameter_pair(&data).unwrap(), (0, 2));
    }

    #[test]
    fn diameter_matches_brute_force() {
        let mut rng = rng_from_seed(11);
        let pts = Array2::from_shape_fn((50, 3), |_| rng.random_range(-1.0..1.0));
        let data = dataset(pts.clone(), 1);
        let mut best = (0, 0, -1.0);
        for a in 0..50 {
            for b in 0..50 {
                if a < b {
                    let d: f64 = (0..3).map(|c| (pts[[a, c]] - pts[[b, c]]).powi(2)).sum();
                    if d > best.2 {
                        best = (a, b, d);
                    }
                }
            }
        }
        assert_eq!(diameter_pair(&data).unwrap(), (best.0, best.1));
    }

    #[test]
    fn diameter_splits_two_separated_balls() {
        // unit balls centred at (0,0) and (2 sqrt 2, 0), four symmetric
        // points each
        let s = 2.0f64.sqrt() * 2.0;
        let mut rows = Vec::new();
        for (cx, _) in [(0.0, 0), (s, 1)] {
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                rows.push([cx + dx, dy]);
            }
        }
        let pts = Array2::from_shape_fn((8, 2), |(i, c)| rows[i][c]);
        let (a, b) = diameter_pair(&dataset(pts, 2)).unwrap();
        assert!(a < 4 && b >= 4, "{a} {b}");
    }

    #[test]
    fn coupon_params_closed_forms() {
        let p = CouponParams::new(0.4, 3.0, 3).unwrap();
        assert_eq!(p.samples(), 9);
        assert_eq!(p.adjacency_threshold(), 1.0);
        assert!((p.sigma_sq_max() - 0.2 * 0.25 / 9.0).abs() < 1e-17);
        assert_eq!(CouponParams::new(0.1, 10.0, 2).unwrap().adjacency_threshold(), 2.0);
        assert!(CouponParams::new(0.4, 2.0, 3).is_err());
        assert!(CouponParams::new(1.0, 3.0, 3).is_err());
    }

    #[test]
    fn coupon_success_when_protos_near_distinct_centers() {
        // three tight groups around vertices at distance 3
        let centers = [[0.0, 0.0], [3.0, 0.0], [1.5, 3.0f64.sqrt() * 1.5]];
        let mut rng = rng_from_seed(5);
        let pts = Array2::from_shape_fn((12, 2), |(i, c)| centers[i % 3][c] + rng.random_range(-0.2..0.2));
        let data = dataset(pts, 3);
        let p = CouponParams::new(0.4, 3.0, 3).unwrap();
        let out = coupon_collect_init(&data, &p, &mut rng_from_seed(1)).unwrap().unwrap();
        assert_eq!(out.proto_indices.len(), 9);
        let mut groups: Vec<usize> = out.representatives.iter().map(|r| r % 3).collect();
        groups.sort_unstable();
        assert_eq!(groups, vec![0, 1, 2]);
    }

    #[test]
    fn coupon_failure_reports_components() {
        // a path graph is connected but not a clique
        let data = dataset(array![[0.0], [0.9], [1.8], [10.0], [20.0], [30.0]], 3);
        let p = CouponParams::new(0.4, 3.0, 3).unwrap();
        let err = cluster_proto_means(&data, &[0, 1, 2, 3], &p).unwrap_err();
        assert_eq!(err.component_sizes, vec![3, 1]);
        assert_eq!(err.complete, vec![false, true]);
        let big = dataset(array![[0.0], [1.0], [2.0]], 3);
        assert!(coupon_collect_init(&big, &p, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn perturbation_is_exactly_delta() {
        let centers = Centroids::new(array![[0.0, 0.0, 0.0], [3.0, 1.0, -2.0]]).unwrap();
        let same = perturbed_truth_init(&centers, 0.0, &mut rng_from_seed(2)).unwrap();
        assert_eq!(same, centers);
        for seed in 0..100 {
            let mu = perturbed_truth_init(&centers, 0.8, &mut rng_from_seed(seed)).unwrap();
            for j in 0..2 {
                let d: f64 = (0..3).map(|c| (mu.view()[[j, c]] - centers.view()[[j, c]]).powi(2)).sum();
                assert!((d.sqrt() - 0.8).abs() < 1e-12);
            }
        }
        assert!(perturbed_truth_init(&centers, -1.0, &mut rng_from_seed(0)).is_err());
    }
}
