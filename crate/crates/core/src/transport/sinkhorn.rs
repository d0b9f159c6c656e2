use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::CostMatrix;
use crate::error::{Error, Result};
use crate::model::Coupling;

/// Entropic regularization settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinkhornParams {
    pub lambda: f64,
    /// Stop once the l1 marginal violation drops below this.
    pub marginal_tol: f64,
    pub max_sweeps: usize,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self { lambda: 0.05, marginal_tol: 0.01, max_sweeps: 10_000 }
    }
}

impl SinkhornParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.marginal_tol > 0.0) {
            return Err(Error::InvalidArgument("marginal_tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornOutput {
    pub coupling: Coupling,
    /// Completed row+column scaling sweeps.
    pub sweeps: usize,
    pub log_domain: bool,
}

/// Alternating row/column scaling of `exp(-C / lambda)` towards marginals
/// `1/n` and `1/k`, rows first. Runs in the log domain when
/// `lambda < ||C||_inf / 500`.
pub fn sinkhorn(cost: &CostMatrix, params: &SinkhornParams) -> Result<SinkhornOutput> {
    params.validate()?;
    if cost.n() == 0 || cost.k() == 0 {
        return Err(Error::Dimension("empty cost matrix".into()));
    }
    if params.lambda < cost.max_abs() / 500.0 {
        log_domain(cost, params)
    } else {
        plain(cost, params)
    }
}

fn plain(cost: &CostMatrix, params: &SinkhornParams) -> Result<SinkhornOutput> {
    let c = cost.view();
    let (n, k) = c.dim();
    let r = 1.0 / n as f64;
    let cm = 1.0 / k as f64;
    let lambda = params.lambda;

    // Row-shifted kernel; the shift folds into the row scaling.
    let mut kernel = Array2::zeros((n, k));
    for (i, row) in c.outer_iter().enumerate() {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        for (j, &cij) in row.iter().enumerate() {
            kernel[[i, j]] = (-(cij - min) / lambda).exp();
        }
    }

    let mut u = vec![0.0; n];
    let mut v = vec![1.0; k];
    let mut col_violation = f64::INFINITY;
    let build = |u: &[f64], v: &[f64]| {
        Coupling::from_raw(Array2::from_shape_fn((n, k), |(i, j)| u[i] * kernel[[i, j]] * v[j]))
    };

    for sweep in 0..=params.max_sweeps {
        // Row scaling; the row sums of the previous iterate fall out for free.
        let mut row_violation = 0.0;
        let mut new_u = vec![0.0; n];
        for i in 0..n {
            let kv: f64 = kernel.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
            if !(kv > 0.0 && kv.is_finite()) {
                return Err(Error::KernelRange { lambda });
            }
            row_violation += (u[i] * kv - r).abs();
            new_u[i] = r / kv;
        }
        if sweep > 0 {
            let violation = row_violation + col_violation;
            if violation < params.marginal_tol {
                return Ok(SinkhornOutput { coupling: build(&u, &v), sweeps: sweep, log_domain: false });
            }
            if sweep == params.max_sweeps {
                return Err(Error::SinkhornNonConvergence {
                    sweeps: sweep,
                    violation,
                    tol: params.marginal_tol,
                    last: Box::new(build(&u, &v)),
                });
            }
        }
        u = new_u;

        let mut ktu = vec![0.0; k];
        for i in 0..n {
            for (j, acc) in ktu.iter_mut().enumerate() {
                *acc += kernel[[i, j]] * u[i];
            }
        }
        col_violation = 0.0;
        for j in 0..k {
            if !(ktu[j] > 0.0 && ktu[j].is_finite()) {
                return Err(Error::KernelRange { lambda });
            }
            v[j] = cm / ktu[j];
            col_violation += (v[j] * ktu[j] - cm).abs();
        }
    }
    unreachable!("loop returns on the final sweep")
}

fn log_domain(cost: &CostMatrix, params: &SinkhornParams) -> Result<SinkhornOutput> {
    let c = cost.view();
    let (n, k) = c.dim();
    let lambda = params.lambda;
    let r = 1.0 / n as f64;
    let cm = 1.0 / k as f64;
    let log_r = r.ln();
    let log_c = cm.ln();

    // F_ij = exp((f_i + g_j - C_ij) / lambda)
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; k];
    let mut col_violation = f64::INFINITY;
    let mut col_max = vec![f64::NEG_INFINITY; k];
    let mut col_sum = vec![0.0; k];

    let build = |f: &[f64], g: &[f64]| {
        Coupling::from_raw(Array2::from_shape_fn((n, k), |(i, j)| {
            ((f[i] + g[j] - c[[i, j]]) / lambda).exp()
        }))
    };

    for sweep in 0..=params.max_sweeps {
        let mut row_violation = 0.0;
        let mut new_f = vec![0.0; n];
        for i in 0..n {
            let row = c.row(i);
            let mut m = f64::NEG_INFINITY;
            for j in 0..k {
                m = m.max((g[j] - row[j]) / lambda);
            }
            let s: f64 = (0..k).map(|j| ((g[j] - row[j]) / lambda - m).exp()).sum();
            let lse = m + s.ln();
            new_f[i] = lambda * (log_r - lse);
            // previous row sum = exp(f_i / lambda + lse) = r * exp((f_i - new_f_i) / lambda)
            row_violation += (r * ((f[i] - new_f[i]) / lambda).exp() - r).abs();
        }
        if !row_violation.is_finite() && sweep > 0 {
            return Err(Error::KernelRange { lambda });
        }
        if sweep > 0 {
            let violation = row_violation + col_violation;
            if violation < params.marginal_tol {
                return Ok(SinkhornOutput { coupling: build(&f, &g), sweeps: sweep, log_domain: true });
            }
            if sweep == params.max_sweeps {
                return Err(Error::SinkhornNonConvergence {
                    sweeps: sweep,
                    violation,
                    tol: params.marginal_tol,
                    last: Box::new(build(&f, &g)),
                });
            }
        }
        f = new_f;

        col_max.fill(f64::NEG_INFINITY);
        for i in 0..n {
            let row = c.row(i);
            for j in 0..k {
                col_max[j] = col_max[j].max((f[i] - row[j]) / lambda);
            }
        }
        col_sum.fill(0.0);
        for i in 0..n {
            let row = c.row(i);
            for j in 0..k {
                col_sum[j] += ((f[i] - row[j]) / lambda - col_max[j]).exp();
            }
        }
        col_violation = 0.0;
        for j in 0..k {
            let lse = col_max[j] + col_sum[j].ln();
            g[j] = lambda * (log_c - lse);
            let sum = (g[j] / lambda + lse).exp();
            col_violation += (sum - cm).abs();
        }
    }
    unreachable!("loop returns on the final sweep")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::squared_distances;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cost(seed: u64, n: usize, k: usize, scale: f64) -> CostMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-scale..scale));
        let mu = Array2::from_shape_fn((k, 2), |_| rng.random_range(-scale..scale));
        CostMatrix::new(squared_distances(x.view(), mu.view())).unwrap()
    }

    #[test]
    fn zero_cost_is_uniform_after_one_sweep() {
        let cost = CostMatrix::new(Array2::zeros((6, 3))).unwrap();
        let out = sinkhorn(&cost, &SinkhornParams::default()).unwrap();
        assert_eq!(out.sweeps, 1);
        assert!(!out.log_domain);
        for &w in out.coupling.weights() {
            assert!((w - 1.0 / 18.0).abs() < 1e-17);
        }
    }

    #[test]
    fn large_lambda_is_near_uniform() {
        let cost = random_cost(1, 40, 4, 2.0);
        let lambda = 1e3 * cost.max_abs();
        let params = SinkhornParams { lambda, marginal_tol: 1e-9, max_sweeps: 10_000 };
        let out = sinkhorn(&cost, &params).unwrap();
        let uniform = 1.0 / (40.0 * 4.0);
        for &w in out.coupling.weights() {
            assert!((w - uniform).abs() < 1e-3);
        }
        assert!(out.coupling.marginal_violation() < 1e-9);
    }

    #[test]
    fn log_domain_handles_small_lambda() {
        let cost = random_cost(2, 100, 2, 3.0);
        let params = SinkhornParams { lambda: 0.01, marginal_tol: 0.01, max_sweeps: 10_000 };
        let out = sinkhorn(&cost, &params).unwrap();
        assert!(out.log_domain);
        assert!(out.coupling.marginal_violation() < 0.01);
        assert!(out.coupling.weights().iter().all(|w| w.is_finite() && *w >= 0.0));
    }

    #[test]
    fn plain_and_log_domain_agree() {
        let cost = random_cost(3, 30, 3, 1.0);
        let params = SinkhornParams { lambda: 0.5, marginal_tol: 1e-10, max_sweeps: 100_000 };
        let plain_out = plain(&cost, &params).unwrap();
        let log_out = log_domain(&cost, &params).unwrap();
        for (a, b) in plain_out.coupling.weights().iter().zip(log_out.coupling.weights()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert_eq!(plain_out.sweeps, log_out.sweeps);
    }

    #[test]
    fn nonconvergence_carries_last_iterate() {
        let cost = random_cost(4, 50, 2, 3.0);
        let params = SinkhornParams { lambda: 0.01, marginal_tol: 1e-14, max_sweeps: 3 };
        match sinkhorn(&cost, &params) {
            Err(Error::SinkhornNonConvergence { sweeps, last, .. }) => {
                assert_eq!(sweeps, 3);
                assert_eq!(last.n(), 50);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_params() {
        let cost = random_cost(5, 4, 2, 1.0);
        for lambda in [0.0, -1.0, f64::NAN] {
            let p = SinkhornParams { lambda, ..Default::default() };
            assert!(sinkhorn(&cost, &p).is_err());
        }
        let p = SinkhornParams { marginal_tol: 0.0, ..Default::default() };
        assert!(sinkhorn(&cost, &p).is_err());
    }

    #[test]
    fn plain_kernel_underflow_is_reported() {
        // One column is astronomically expensive for every row: its kernel
        // column underflows to zero.
        let mut c = Array2::zeros((4, 2));
        for i in 0..4 {
            c[[i, 1]] = 1e6;
        }
        let cost = CostMatrix::new(c).unwrap();
        let p = SinkhornParams { lambda: 1.0, marginal_tol: 1e-3, max_sweeps: 100 };
        assert!(matches!(plain(&cost, &p), Err(Error::KernelRange { .. })));
    }

    #[test]
    fn transport_cost_approaches_exact_optimum() {
        // entropic gap is at most lambda*log(nk); the marginal slack adds at
        // most tol*max|C|
        for seed in 0..10 {
            let cost = random_cost(100 + seed, 24, 3, 2.0);
            let exact = super::super::exact_kantorovich(&cost, 24, 3).unwrap().inner(cost.view());
            for lambda in [0.5, 0.1, 0.02] {
                let p = SinkhornParams { lambda, marginal_tol: 1e-4, max_sweeps: 100_000 };
                let out = sinkhorn(&cost, &p).unwrap();
                let value = out.coupling.inner(cost.view());
                let slack = lambda * (72.0f64).ln() + 1e-4 * cost.max_abs();
                assert!((value - exact).abs() <= slack, "seed {seed} lambda {lambda}: {value} vs {exact}");
            }
        }
    }
}
