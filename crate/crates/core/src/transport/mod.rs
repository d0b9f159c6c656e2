//! The assignment subproblem: minimize `<C, F>` over balanced couplings,
//! exactly or with entropic regularization.

mod network_simplex;
mod rounding;
mod sinkhorn;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::model::{squared_distances, Centroids, ClusterAssignment, Coupling, Dataset};

pub use network_simplex::{solve_transport, FlowSolution};
pub use rounding::round_to_polytope;
pub use sinkhorn::{sinkhorn, SinkhornOutput, SinkhornParams};

/// Nonnegative finite costs with a cached sup-norm.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    costs: Array2<f64>,
    max_abs: f64,
}

impl CostMatrix {
    pub fn new(costs: Array2<f64>) -> Result<Self> {
        let mut max_abs = 0.0f64;
        for &c in &costs {
            if !c.is_finite() {
                return Err(Error::NonFinite("cost matrix"));
            }
            if c < 0.0 {
                return Err(Error::InvalidArgument("cost matrix has negative entries".into()));
            }
            max_abs = max_abs.max(c);
        }
        Ok(Self { costs, max_abs })
    }

    /// `C[i, j] = ||x_i - mu_j||^2`.
    pub fn squared_euclidean(data: &Dataset, mu: &Centroids) -> Result<Self> {
        if mu.d() != data.d() {
            return Err(Error::Dimension(format!(
                "centroids have d={}, data has d={}",
                mu.d(),
                data.d()
            )));
        }
        Self::new(squared_distances(data.points(), mu.view()))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.costs.view()
    }

    pub fn n(&self) -> usize {
        self.costs.nrows()
    }

    pub fn k(&self) -> usize {
        self.costs.ncols()
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    fn as_contiguous(&self) -> std::borrow::Cow<'_, [f64]> {
        match self.costs.as_slice() {
            Some(s) => std::borrow::Cow::Borrowed(s),
            None => std::borrow::Cow::Owned(self.costs.iter().copied().collect()),
        }
    }
}

/// Exact minimizer of `<C, F>` over the balanced transportation polytope.
/// The result is a vertex, so every entry is `0` or `1/n`.
pub fn exact_kantorovich(cost: &CostMatrix, n: usize, k: usize) -> Result<Coupling> {
    if cost.n() != n || cost.k() != k {
        return Err(Error::Dimension(format!(
            "cost matrix is {}x{}, expected {n}x{k}",
            cost.n(),
            cost.k()
        )));
    }
    let sol = solve_transport(&cost.as_contiguous(), n, k)?;
    Ok(ClusterAssignment::new(sol.assignment, k)?.to_coupling())
}

/// `||F 1_k - 1_n/n||_1 + ||F^T 1_n - 1_k/k||_1`.
pub fn marginal_violation(coupling: &Coupling) -> f64 {
    coupling.marginal_violation()
}
