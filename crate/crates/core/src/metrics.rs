//! Recovery metrics and closed-form recovery thresholds.

use crate::assignment::linear_sum_assignment;
use crate::error::{Error, Result};
use crate::model::{Centroids, ClusterAssignment};

/// Largest k for which label permutations are enumerated outright.
const EXHAUSTIVE_K: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    /// Zero disagreements under the best relabeling.
    pub exact: bool,
    pub misclustering_rate: f64,
    pub disagreements: usize,
    /// `best_permutation[a]` is the found label matched to truth label `a`.
    pub best_permutation: Vec<usize>,
    pub delta_cos_theta: Option<f64>,
}

fn for_each_permutation(k: usize, mut visit: impl FnMut(&[usize])) {
    // Heap's algorithm
    let mut p: Vec<usize> = (0..k).collect();
    let mut c = vec![0usize; k];
    visit(&p);
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            visit(&p);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Maximize `sum_a weight[a][perm[a]]` over permutations of `0..k`.
fn best_matching(weight: &[Vec<f64>]) -> Result<Vec<usize>> {
    let k = weight.len();
    if k <= EXHAUSTIVE_K {
        let mut best = f64::NEG_INFINITY;
        let mut arg = (0..k).collect::<Vec<_>>();
        for_each_permutation(k, |p| {
            let s: f64 = p.iter().enumerate().map(|(a, &b)| weight[a][b]).sum();
            if s > best {
                best = s;
                arg.copy_from_slice(p);
            }
        });
        Ok(arg)
    } else {
        linear_sum_assignment(k, k, |a, b| -weight[a][b])
    }
}

/// Fraction of points mislabeled under the best relabeling of `found`.
pub fn misclustering_rate(truth: &ClusterAssignment, found: &ClusterAssignment) -> Result<RecoveryReport> {
    if truth.len() != found.len() {
        return Err(Error::Dimension(format!("{} vs {} labels", truth.len(), found.len())));
    }
    if truth.k() != found.k() {
        return Err(Error::Dimension(format!("k={} vs k={}", truth.k(), found.k())));
    }
    let (n, k) = (truth.len(), truth.k());
    let mut agree = vec![vec![0usize; k]; k];
    for (&a, &b) in truth.labels().iter().zip(found.labels()) {
        agree[a][b] += 1;
    }
    let weight: Vec<Vec<f64>> = agree.iter().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
    let perm = best_matching(&weight)?;
    let matched: usize = perm.iter().enumerate().map(|(a, &b)| agree[a][b]).sum();
    let disagreements = n - matched;
    Ok(RecoveryReport {
        exact: disagreements == 0,
        misclustering_rate: if n == 0 { 0.0 } else { disagreements as f64 / n as f64 },
        disagreements,
        best_permutation: perm,
        delta_cos_theta: None,
    })
}

/// `(Delta, cos theta)` for two-center configurations: the planted
/// separation and the absolute cosine between the two difference vectors.
pub fn delta_cos_theta(mu0: &Centroids, mu_nat: &Centroids) -> Result<(f64, f64)> {
    if mu0.k() != 2 || mu_nat.k() != 2 {
        return Err(Error::InvalidArgument("delta_cos_theta is defined for k=2".into()));
    }
    if mu0.d() != mu_nat.d() {
        return Err(Error::Dimension(format!("d={} vs d={}", mu0.d(), mu_nat.d())));
    }
    let a = &mu0.center(0) - &mu0.center(1);
    let b = &mu_nat.center(0) - &mu_nat.center(1);
    let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidArgument("coincident centers have no direction".into()));
    }
    let cos = (a.dot(&b) / (na * nb)).abs().min(1.0);
    Ok((nb, cos))
}

/// High-probability ceiling on the one-step misclustering rate for k=2:
/// `sqrt(exp(-(d-1)/4 x^2) + sqrt(log(n / (2 eps)) / n))` with `x = Delta cos theta`.
pub fn misclustering_bound(d: usize, n: usize, delta_cos_theta: f64, epsilon: f64) -> Result<f64> {
    if d < 2 || n < 2 {
        return Err(Error::InvalidArgument(format!("need d >= 2 and n >= 2, got d={d}, n={n}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    if !(delta_cos_theta >= 0.0 && delta_cos_theta.is_finite()) {
        return Err(Error::InvalidArgument(format!("Delta cos theta must be >= 0, got {delta_cos_theta}")));
    }
    let nf = n as f64;
    let signal = (-(d as f64 - 1.0) / 4.0 * delta_cos_theta * delta_cos_theta).exp();
    let sampling = ((nf / (2.0 * epsilon)).ln() / nf).sqrt();
    Ok((signal + sampling).sqrt())
}

/// Large-n decay rate of the bound: `exp(-(d-1)/8 x^2)`.
pub fn log_decay_reference(d: usize, delta_cos_theta: f64) -> f64 {
    (-(d as f64 - 1.0) / 8.0 * delta_cos_theta * delta_cos_theta).exp()
}

/// Radius around the planted centers inside which one step recovers the
/// planted clustering: `Delta/2 - 1`, or `sqrt((Delta/2)^2 - 1)` when `k = 2`.
pub fn basin_threshold(delta: f64, k: usize) -> Result<f64> {
    if !(delta > 2.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("separation must exceed 2, got {delta}")));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("basin threshold needs k >= 2".into()));
    }
    let h = delta / 2.0;
    Ok(if k == 2 { (h * h - 1.0).sqrt() } else { h - 1.0 })
}

/// 2-Wasserstein distance between two uniform k-point sets.
pub fn wasserstein2_centroids(a: &Centroids, b: &Centroids) -> Result<f64> {
    if a.k() != b.k() || a.d() != b.d() {
        return Err(Error::Dimension(format!("{}x{} vs {}x{}", a.k(), a.d(), b.k(), b.d())));
    }
    let k = a.k();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let diff = &a.center(i) - &b.center(j);
                    diff.dot(&diff)
                })
                .collect()
        })
        .collect();
    let neg: Vec<Vec<f64>> = cost.iter().map(|r| r.iter().map(|c| -c).collect()).collect();
    let perm = best_matching(&neg)?;
    let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((total / k as f64).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::{array, Array2};
    use rand::Rng as _;

    fn labels(v: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn heap_visits_every_permutation_once() {
        for k in 0..=5usize {
            let mut seen = std::collections::BTreeSet::new();
            for_each_permutation(k, |p| {
                seen.insert(p.to_vec());
            });
            assert_eq!(seen.len(), (1..=k).product::<usize>().max(1));
        }
    }

    #[test]
    fn identical_and_swapped_labels() {
        let t = labels(&[0, 0, 1, 1], 2);
        assert!(misclustering_rate(&t, &t).unwrap().exact);
        let r = misclustering_rate(&t, &labels(&[1, 1, 0, 0], 2)).unwrap();
        assert!(r.exact);
        assert_eq!(r.best_permutation, vec![1, 0]);
    }

    #[test]
    fn half_wrong_by_enumeration() {
        let t = labels(&[0, 0, 1, 1], 2);
        let f = labels(&[0, 1, 0, 1], 2);
        // identity: 2 wrong; swap: 2 wrong
        let r = misclustering_rate(&t, &f).unwrap();
        assert_eq!(r.misclustering_rate, 0.5);
        assert!(!r.exact);
    }

    #[test]
    fn symmetric_and_relabel_invariant() {
        let mut rng = rng_from_seed(4);
        for k in [2usize, 3, 5, 9, 11] {
            for _ in 0..20 {
                let a: Vec<usize> = (0..40).map(|_| rng.random_range(0..k)).collect();
                let b: Vec<usize> = (0..40).map(|_| rng.random_range(0..k)).collect();
                let (ta, tb) = (labels(&a, k), labels(&b, k));
                let r1 = misclustering_rate(&ta, &tb).unwrap().disagreements;
                let r2 = misclustering_rate(&tb, &ta).unwrap().disagreements;
                assert_eq!(r1, r2);
                let shift: Vec<usize> = b.iter().map(|&l| (l + 1) % k).collect();
                assert_eq!(misclustering_rate(&ta, &labels(&shift, k)).unwrap().disagreements, r1);
            }
        }
    }

    #[test]
    fn hungarian_fallback_agrees_with_brute_force_for_small_k() {
        let mut rng = rng_from_seed(8);
        for k in 2..=6usize {
            for _ in 0..20 {
                let w: Vec<Vec<f64>> =
                    (0..k).map(|_| (0..k).map(|_| rng.random_range(0..20) as f64).collect()).collect();
                let brute = best_matching(&w).unwrap();
                let lsa = linear_sum_assignment(k, k, |a, b| -w[a][b]).unwrap();
                let score = |p: &[usize]| p.iter().enumerate().map(|(a, &b)| w[a][b]).sum::<f64>();
                assert_eq!(score(&brute), score(&lsa));
            }
        }
    }

    #[test]
    fn mismatched_inputs() {
        assert!(misclustering_rate(&labels(&[0, 1], 2), &labels(&[0, 1, 1], 2)).is_err());
        assert!(misclustering_rate(&labels(&[0, 1], 2), &labels(&[0, 1], 3)).is_err());
    }

    #[test]
    fn cos_theta_examples() {
        let nat = Centroids::new(array![[-1.5, 0.0], [1.5, 0.0]]).unwrap();
        assert_eq!(delta_cos_theta(&nat, &nat).unwrap(), (3.0, 1.0));
        let ortho = Centroids::new(array![[0.0, -1.0], [0.0, 1.0]]).unwrap();
        assert_eq!(delta_cos_theta(&ortho, &nat).unwrap().1, 0.0);
        let same = Centroids::new(array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(delta_cos_theta(&same, &nat).is_err());
    }

    #[test]
    fn cos_theta_right_angle_perturbation() {
        // each center moved by delta perpendicular to the axis, in opposite
        // directions: the new difference is (Delta, 2 delta), so
        // cos theta = Delta / sqrt(Delta^2 + 4 delta^2).
        for (big, small) in [(3.0f64, 0.5f64), (2.5, 1.0), (4.0, 0.1)] {
            let nat = Centroids::new(array![[0.0, 0.0], [big, 0.0]]).unwrap();
            let mu0 = Centroids::new(array![[0.0, small], [big, -small]]).unwrap();
            let (d, c) = delta_cos_theta(&mu0, &nat).unwrap();
            let want = (1.0 / (1.0 + (2.0 * small / big).powi(2))).sqrt();
            assert_eq!(d, big);
            assert!((c - want).abs() < 1e-15);
        }
    }

    #[test]
    fn bound_matches_high_precision_values() {
        // independent 40-digit evaluation of the closed form
        let cases = [
            (0.075, 1.018_421_231_861_357_2),
            (0.5, 0.541_755_284_176_251_6),
            (1.0, 0.269_902_537_893_084_1),
            (1.5, 0.265_273_441_459_087_1),
        ];
        for (x, want) in cases {
            let got = misclustering_bound(25, 2000, x, 0.05).unwrap();
            assert!(((got - want) / want).abs() < 1e-12, "{x}: {got} vs {want}");
        }
        let decay = [(0.075, 0.983_266_585_276_619), (1.0, 0.049_787_068_367_863_944), (1.5, 0.001_170_879_620_791_174_4)];
        for (x, want) in decay {
            let got = log_decay_reference(25, x);
            assert!(((got - want) / want).abs() < 1e-12);
        }
    }

    #[test]
    fn bound_floor_and_monotonicity() {
        let n = 500usize;
        let eps = 0.1;
        let floor = (1.0 + ((n as f64 / (2.0 * eps)).ln() / n as f64).sqrt()).sqrt();
        assert!((misclustering_bound(3, n, 0.0, eps).unwrap() - floor).abs() < 1e-15);
        for d in 2..20 {
            for step in 0..30 {
                let x = 0.1 * step as f64;
                let b = misclustering_bound(d, n, x, eps).unwrap();
                assert!(misclustering_bound(d + 1, n, x, eps).unwrap() <= b);
                assert!(misclustering_bound(d, n, x + 0.1, eps).unwrap() <= b);
                assert!(misclustering_bound(d, n * 2, x, eps).unwrap() <= b);
            }
        }
        assert!(misclustering_bound(1, n, 1.0, eps).is_err());
        assert!(misclustering_bound(3, n, 1.0, 1.0).is_err());
    }

    #[test]
    fn basin_thresholds() {
        assert_eq!(basin_threshold(3.0, 3).unwrap(), 0.5);
        assert!((basin_threshold(3.0, 2).unwrap() - 1.118_033_988_749_895).abs() < 1e-15);
        assert!((basin_threshold(2.1, 2).unwrap() - 0.320_156_211_871_642_45).abs() < 1e-15);
        for i in 1..200 {
            let delta = 2.0 + 0.05 * i as f64;
            assert!(basin_threshold(delta, 2).unwrap() >= basin_threshold(delta, 4).unwrap());
        }
        assert!(basin_threshold(2.0, 2).is_err());
    }

    #[test]
    fn wasserstein_examples() {
        let a = Centroids::new(array![[0.0], [1.0]]).unwrap();
        let b = Centroids::new(array![[0.1], [0.9]]).unwrap();
        assert!((wasserstein2_centroids(&a, &b).unwrap() - 0.1).abs() < 1e-15);
        let b_swapped = Centroids::new(array![[0.9], [0.1]]).unwrap();
        assert!((wasserstein2_centroids(&a, &b_swapped).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(wasserstein2_centroids(&a, &a).unwrap(), 0.0);
        let c = Centroids::new(array![[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(wasserstein2_centroids(&a, &c).is_err());
    }

    #[test]
    fn wasserstein_is_a_metric() {
        let mut rng = rng_from_seed(12);
        for k in [1usize, 3, 10] {
            for _ in 0..50 {
                let mut draw = || Centroids::new(Array2::from_shape_fn((k, 2), |_| rng.random_range(-3.0..3.0))).unwrap();
                let (a, b, c) = (draw(), draw(), draw());
                let ab = wasserstein2_centroids(&a, &b).unwrap();
                assert!((ab - wasserstein2_centroids(&b, &a).unwrap()).abs() < 1e-12);
                let ac = wasserstein2_centroids(&a, &c).unwrap();
                let cb = wasserstein2_centroids(&c, &b).unwrap();
                assert!(ab <= ac + cb + 1e-9);
                let mut rows = a.to_rows();
                rows.reverse();
                assert!(wasserstein2_centroids(&a, &Centroids::from_rows(&rows).unwrap()).unwrap() < 1e-12);
            }
        }
    }
}
