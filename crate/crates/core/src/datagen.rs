//! Planted-cluster samplers: the stochastic ball model and a balanced
//! Gaussian mixture.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::random_unit_vector;
use crate::model::{Centroids, ClusterAssignment, Dataset};
use crate::rng::{rng_from_seed, Rng};

/// Law of the displacement `g` around each planted center. All laws are
/// rotationally invariant and supported on the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NoiseLaw {
    UniformBall,
    UniformSphere,
    /// Radius `U^alpha` with `U ~ Unif[0,1]`.
    RadialPow { alpha: f64 },
}

impl NoiseLaw {
    /// Radial law with `E||g||^2 = sigma_sq`, using `E[U^{2 alpha}] = 1/(2 alpha + 1)`.
    pub fn radial_for_second_moment(sigma_sq: f64) -> Result<Self> {
        if !(sigma_sq > 0.0 && sigma_sq <= 1.0) {
            return Err(Error::InvalidArgument(format!("second moment must lie in (0,1], got {sigma_sq}")));
        }
        Ok(NoiseLaw::RadialPow { alpha: (1.0 - sigma_sq) / (2.0 * sigma_sq) })
    }

    fn radius(&self, d: usize, rng: &mut Rng) -> f64 {
        match *self {
            NoiseLaw::UniformBall => rng.random::<f64>().powf(1.0 / d as f64),
            NoiseLaw::UniformSphere => 1.0,
            NoiseLaw::RadialPow { alpha } => rng.random::<f64>().powf(alpha),
        }
    }

    fn validate(&self) -> Result<()> {
        if let NoiseLaw::RadialPow { alpha } = *self {
            if !(alpha >= 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidArgument(format!("radial exponent must be >= 0, got {alpha}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BallModelSpec {
    pub n: usize,
    pub centers: Centroids,
    pub noise: NoiseLaw,
    pub seed: u64,
}

impl BallModelSpec {
    pub fn d(&self) -> usize {
        self.centers.d()
    }

    pub fn k(&self) -> usize {
        self.centers.k()
    }
}

/// Smallest pairwise distance between centers (infinite for `k = 1`).
pub fn min_separation(centers: &Centroids) -> f64 {
    let mu = centers.view();
    let mut best = f64::INFINITY;
    for a in 0..centers.k() {
        for b in a + 1..centers.k() {
            let d: f64 = mu.row(a).iter().zip(mu.row(b).iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d.sqrt());
        }
    }
    best
}

fn balanced_labels(n: usize, k: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if k == 0 || n == 0 || !n.is_multiple_of(k) {
        return Err(Error::Unbalanced { n, k });
    }
    let m = n / k;
    let mut labels: Vec<usize> = (0..n).map(|i| i / m).collect();
    labels.shuffle(rng);
    Ok(labels)
}

fn planted_dataset(points: Array2<f64>, labels: Vec<usize>, centers: &Centroids) -> Result<Dataset> {
    let k = centers.k();
    let planted = ClusterAssignment::new(labels, k)?;
    let sep = min_separation(centers);
    let mut data = Dataset::new(points, k, Some(planted))?;
    if sep.is_finite() {
        data = data.with_meta("delta", sep);
    }
    Ok(data.with_meta("centers", centers.to_rows()))
}

pub fn sample_ball_model(spec: &BallModelSpec) -> Result<Dataset> {
    sample_ball_model_with(spec, &mut rng_from_seed(spec.seed))
}

/// Like [`sample_ball_model`] but drawing from a caller-owned generator;
/// `spec.seed` is ignored.
pub fn sample_ball_model_with(spec: &BallModelSpec, rng: &mut Rng) -> Result<Dataset> {
    spec.noise.validate()?;
    let (n, k, d) = (spec.n, spec.k(), spec.d());
    let labels = balanced_labels(n, k, rng)?;
    let mut points = Array2::zeros((n, d));
    for (i, &l) in labels.iter().enumerate() {
        let dir = random_unit_vector(d, rng);
        let r = spec.noise.radius(d, rng);
        let mut row = points.row_mut(i);
        row.assign(&spec.centers.center(l));
        row.scaled_add(r, &dir);
    }
    planted_dataset(points, labels, &spec.centers)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CenterKind {
    /// Two points at distance `delta` on the first axis, symmetric about 0.
    Segment { delta: f64 },
    /// Triangle with side `delta` in the first two coordinates.
    Equilateral { delta: f64 },
    /// iid `N(0, scale^2)` coordinates.
    Gaussian { scale: f64 },
}

/// Planted centers plus their realized minimum separation.
pub fn make_centers(kind: CenterKind, k: usize, d: usize, rng: &mut Rng) -> Result<(Centroids, f64)> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut mu = Array2::zeros((k, d));
    match kind {
        CenterKind::Segment { delta } => {
            if k != 2 {
                return Err(Error::InvalidArgument(format!("segment centers need k=2, got {k}")));
            }
            mu[[0, 0]] = -delta / 2.0;
            mu[[1, 0]] = delta / 2.0;
        }
        CenterKind::Equilateral { delta } => {
            if k != 3 || d < 2 {
                return Err(Error::InvalidArgument(format!(
                    "equilateral centers need k=3 and d>=2, got k={k}, d={d}"
                )));
            }
            mu[[1, 0]] = delta;
            mu[[2, 0]] = delta / 2.0;
            mu[[2, 1]] = delta * 3.0f64.sqrt() / 2.0;
        }
        CenterKind::Gaussian { scale } => {
            if k == 0 {
                return Err(Error::InvalidArgument("k must be positive".into()));
            }
            mu.mapv_inplace(|_| scale * rng.sample::<f64, _>(StandardNormal));
        }
    }
    let centers = Centroids::new(mu)?;
    let sep = min_separation(&centers);
    Ok((centers, sep))
}

/// Balanced mixture with standard normal displacements.
pub fn sample_gmm(centers: &Centroids, n: usize, rng: &mut Rng) -> Result<Dataset> {
    let (k, d) = (centers.k(), centers.d());
    let labels = balanced_labels(n, k, rng)?;
    let mut points = Array2::zeros((n, d));
    for (i, &l) in labels.iter().enumerate() {
        for c in 0..d {
            points[[i, c]] = centers.view()[[l, c]] + rng.sample::<f64, _>(StandardNormal);
        }
    }
    planted_dataset(points, labels, centers)
}
