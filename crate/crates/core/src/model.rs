//! Shared numeric types and the balanced k-means objective.
//!
//! Storage is row-major: point `i` is row `i` of an `n x d` array, centroid
//! `j` is row `j` of a `k x d` array and a coupling is an `n x k` array.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries within this distance of `0` or `1/n` count as integral.
pub const SNAP_TOL: f64 = 1e-9;

/// Default tolerance on the l1 marginal violation for feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Relative slack used by [`check_descent_step`].
pub const DESCENT_REL_TOL: f64 = 1e-9;

fn check_balanced(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n || !n.is_multiple_of(k) {
        return Err(Error::Unbalanced { n, k });
    }
    Ok(())
}

/// Label sequence into `0..k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for k={k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True iff every label occurs exactly `n/k` times.
    pub fn is_balanced(&self) -> bool {
        let n = self.labels.len();
        n.is_multiple_of(self.k) && self.cluster_sizes().iter().all(|&s| s == n / self.k)
    }

    /// The integral coupling with `F[i, label(i)] = 1/n`.
    pub fn to_coupling(&self) -> Coupling {
        let n = self.labels.len();
        let mut w = Array2::zeros((n, self.k));
        for (i, &l) in self.labels.iter().enumerate() {
            w[[i, l]] = 1.0 / n as f64;
        }
        Coupling { weights: w, feasibility_tol: FEASIBILITY_TOL }
    }
}

/// Data points plus the intended cluster count and optional planted labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Array2<f64>,
    k: usize,
    planted: Option<ClusterAssignment>,
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Dataset {
    /// `points` is `n x d`. Requires `1 <= k <= n`, `k | n` and finite coordinates.
    pub fn new(points: Array2<f64>, k: usize, planted: Option<ClusterAssignment>) -> Result<Self> {
        let n = points.nrows();
        check_balanced(n, k)?;
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset points"));
        }
        if let Some(p) = &planted {
            if p.len() != n || p.k() != k {
                return Err(Error::Dimension(format!(
                    "planted assignment has n={} k={}, dataset has n={n} k={k}",
                    p.len(),
                    p.k()
                )));
            }
        }
        Ok(Self { points, k, planted, meta: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.meta.insert(key.to_owned(), value.into());
        self
    }

    pub fn points(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn d(&self) -> usize {
        self.points.ncols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn planted(&self) -> Option<&ClusterAssignment> {
        self.planted.as_ref()
    }
}

/// Cluster centers, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Centroids {
    mu: Array2<f64>,
}

impl Centroids {
    /// `mu` is `k x d`.
    pub fn new(mu: Array2<f64>) -> Result<Self> {
        if mu.nrows() == 0 {
            return Err(Error::InvalidArgument("centroids need at least one row".into()));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("centroids"));
        }
        Ok(Self { mu })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged centroid rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let mu = Array2::from_shape_vec((k, d), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::new(mu)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.mu.view()
    }

    pub fn center(&self, j: usize) -> ArrayView1<'_, f64> {
        self.mu.row(j)
    }

    pub fn k(&self) -> usize {
        self.mu.nrows()
    }

    pub fn d(&self) -> usize {
        self.mu.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.mu
    }

    /// Squared Frobenius distance to `other`.
    pub fn frobenius_sq_dist(&self, other: &Centroids) -> f64 {
        self.mu
            .iter()
            .zip(other.mu.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.mu.outer_iter().map(|r| r.to_vec()).collect()
    }
}

/// Nonnegative `n x k` matrix; a member of the transportation polytope when
/// its row sums are `1/n` and its column sums are `1/k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    weights: Array2<f64>,
    pub feasibility_tol: f64,
}

impl Coupling {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coupling"));
        }
        if weights.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidArgument("coupling has negative entries".into()));
        }
        Ok(Self { weights, feasibility_tol: FEASIBILITY_TOL })
    }

    pub(crate) fn from_raw(weights: Array2<f64>) -> Self {
        Self { weights, feasibility_tol: FEASIBILITY_TOL }
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn k(&self) -> usize {
        self.weights.ncols()
    }

    /// `||F 1_k - 1_n/n||_1 + ||F^T 1_n - 1_k/k||_1`.
    pub fn marginal_violation(&self) -> f64 {
        let (n, k) = self.weights.dim();
        let r = 1.0 / n as f64;
        let c = 1.0 / k as f64;
        let rows: f64 = self.weights.sum_axis(Axis(1)).iter().map(|s| (s - r).abs()).sum();
        let cols: f64 = self.weights.sum_axis(Axis(0)).iter().map(|s| (s - c).abs()).sum();
        rows + cols
    }

    pub fn is_feasible(&self) -> bool {
        self.marginal_violation() <= self.feasibility_tol
    }

    /// Every entry within [`SNAP_TOL`] of `0` or `1/n`.
    pub fn is_integral(&self) -> bool {
        let unit = 1.0 / self.n() as f64;
        self.weights
            .iter()
            .all(|&w| w.abs() <= SNAP_TOL || (w - unit).abs() <= SNAP_TOL)
    }

    /// Row maximizers, ties to the lowest column.
    pub fn row_argmax(&self) -> ClusterAssignment {
        let labels = self
            .weights
            .outer_iter()
            .map(|row| {
                let mut best = 0;
                for (j, &w) in row.iter().enumerate() {
                    if w > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect();
        ClusterAssignment { labels, k: self.k() }
    }

    /// `<C, F>` for a cost matrix of matching shape.
    pub fn inner(&self, costs: ArrayView2<'_, f64>) -> f64 {
        self.weights.iter().zip(costs.iter()).map(|(w, c)| w * c).sum()
    }
}

/// Squared Euclidean distances `||x_i - mu_j||^2` via `||x||^2 + ||mu||^2 - 2<x, mu>`,
/// clamped at zero.
pub fn squared_distances(points: ArrayView2<'_, f64>, centers: ArrayView2<'_, f64>) -> Array2<f64> {
    let x_sq: Vec<f64> = points.outer_iter().map(|r| r.dot(&r)).collect();
    let m_sq: Vec<f64> = centers.outer_iter().map(|r| r.dot(&r)).collect();
    let mut out = points.dot(&centers.t());
    for ((i, j), v) in out.indexed_iter_mut() {
        *v = (x_sq[i] + m_sq[j] - 2.0 * *v).max(0.0);
    }
    out
}

fn check_shapes(data: &Dataset, coupling: &Coupling, mu: &Centroids) -> Result<()> {
    if coupling.n() != data.n() || coupling.k() != mu.k() || mu.d() != data.d() {
        return Err(Error::Dimension(format!(
            "data n={} d={}, coupling {}x{}, centroids {}x{}",
            data.n(),
            data.d(),
            coupling.n(),
            coupling.k(),
            mu.k(),
            mu.d()
        )));
    }
    Ok(())
}

/// `f(F, mu) = sum_ij F_ij ||x_i - mu_j||^2`.
pub fn objective_value(data: &Dataset, coupling: &Coupling, mu: &Centroids) -> Result<f64> {
    check_shapes(data, coupling, mu)?;
    let costs = squared_distances(data.points(), mu.view());
    let value = coupling.inner(costs.view());
    if !value.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(value)
}

/// `mu = k X F`; the per-cluster means when `F` is integral.
pub fn centroid_update(data: &Dataset, coupling: &Coupling) -> Result<Centroids> {
    if coupling.n() != data.n() {
        return Err(Error::Dimension(format!(
            "coupling has {} rows, dataset has {} points",
            coupling.n(),
            data.n()
        )));
    }
    let violation = coupling.marginal_violation();
    if violation > coupling.feasibility_tol {
        return Err(Error::Infeasible { violation, tol: coupling.feasibility_tol });
    }
    let k = coupling.k() as f64;
    let mu = coupling.weights.t().dot(&data.points()) * k;
    Centroids::new(mu)
}

/// Per-step descent check
/// `f(F', mu) >= f(F', mu') + ||mu' - mu||_F^2 / k` up to a relative slack.
pub fn check_descent_step(
    f_prev_pair: f64,
    f_next_pair: f64,
    mu_prev: &Centroids,
    mu_next: &Centroids,
    k: usize,
) -> bool {
    let rhs = f_next_pair + mu_prev.frobenius_sq_dist(mu_next) / k as f64;
    let slack = DESCENT_REL_TOL * f_prev_pair.abs().max(rhs.abs()).max(1.0);
    f_prev_pair >= rhs - slack
}

/// Relative residual of the exact identity
/// `f(F', mu) = f(F', mu') + ||mu' - mu||_F^2 / k` that holds when `mu' = k X F'`.
pub fn descent_identity_residual(
    f_prev_pair: f64,
    f_next_pair: f64,
    mu_prev: &Centroids,
    mu_next: &Centroids,
    k: usize,
) -> f64 {
    let rhs = f_next_pair + mu_prev.frobenius_sq_dist(mu_next) / k as f64;
    let scale = f_prev_pair.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (f_prev_pair - rhs).abs() / scale
    }
}
