use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::model::Coupling;

/// Project a nonnegative matrix onto the balanced transportation polytope:
/// shrink over-full rows, then over-full columns, then spread the missing
/// mass as a rank-one correction `err_r err_c^T / ||err_r||_1`.
///
/// The l1 distance to the input is at most twice its marginal violation.
pub fn round_to_polytope(approx: ArrayView2<'_, f64>) -> Result<Coupling> {
    let (n, k) = approx.dim();
    if n == 0 || k == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if approx.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix to round"));
    }
    if approx.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("matrix to round has negative entries".into()));
    }
    if approx.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("cannot round an all-zero matrix".into()));
    }
    let r = 1.0 / n as f64;
    let c = 1.0 / k as f64;

    let mut out: Array2<f64> = approx.to_owned();
    for mut row in out.outer_iter_mut() {
        let s = row.sum();
        if s > r {
            row *= r / s;
        }
    }
    let col_sums = out.sum_axis(Axis(0));
    for (j, &s) in col_sums.iter().enumerate() {
        if s > c {
            out.column_mut(j).mapv_inplace(|v| v * (c / s));
        }
    }

    let err_r: Vec<f64> = out.sum_axis(Axis(1)).iter().map(|&s| (r - s).max(0.0)).collect();
    let err_c: Vec<f64> = out.sum_axis(Axis(0)).iter().map(|&s| (c - s).max(0.0)).collect();
    let mass: f64 = err_r.iter().sum();
    if mass > 0.0 {
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            let scale = err_r[i] / mass;
            for (j, v) in row.iter_mut().enumerate() {
                *v += scale * err_c[j];
            }
        }
    }
    Coupling::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClusterAssignment;
    use ndarray::array;

    fn l1(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum()
    }

    fn violation_of(a: ArrayView2<'_, f64>) -> f64 {
        Coupling::new(a.to_owned()).unwrap().marginal_violation()
    }

    #[test]
    fn feasible_input_is_unchanged() {
        let f = ClusterAssignment::new(vec![0, 1, 1, 0], 2).unwrap().to_coupling();
        let g = round_to_polytope(f.weights()).unwrap();
        assert_eq!(l1(f.weights(), g.weights()), 0.0);

        let uniform = Array2::from_elem((4, 2), 0.125);
        let g = round_to_polytope(uniform.view()).unwrap();
        assert_eq!(g.weights(), uniform);
    }

    #[test]
    fn scaled_row_hand_computed() {
        // feasible diag(1/2, 1/2) with row 0 scaled by 1.5:
        // row shrink restores row 0 to 1/2 exactly, column pass is idle,
        // no residual remains.
        let a = array![[0.75, 0.0], [0.0, 0.5]];
        let g = round_to_polytope(a.view()).unwrap();
        assert_eq!(g.weights(), array![[0.5, 0.0], [0.0, 0.5]]);
        let change = l1(a.view(), g.weights());
        assert!((change - 0.25).abs() < 1e-15);
        // violation of the input: rows 0.25, columns 0.25
        let bound = 2.0 * violation_of(a.view());
        assert!((bound - 1.0).abs() < 1e-15);
        assert!(change <= bound);
    }

    #[test]
    fn spread_row_hand_computed() {
        // row 0 = (0.45, 0.3) overshoots; after the row shrink it is
        // (0.3, 0.2); columns are (0.3, 0.7) so column 1 shrinks by 5/7;
        // residual mass then lands on column 0.
        let a = array![[0.45, 0.3], [0.0, 0.5]];
        let g = round_to_polytope(a.view()).unwrap();
        let w = g.weights();
        let want = array![[2.5 / 7.0, 1.0 / 7.0], [1.0 / 7.0, 2.5 / 7.0]];
        for (x, y) in w.iter().zip(want.iter()) {
            assert!((x - y).abs() < 1e-15, "{w:?}");
        }
        assert!((l1(a.view(), w) - 0.5357142857142857).abs() < 1e-12);
        assert!(g.marginal_violation() < 1e-15);
        assert!(l1(a.view(), w) <= 2.0 * violation_of(a.view()) + 1e-15);
    }

    #[test]
    fn uniform_with_wrong_mass_is_rescaled() {
        for scale in [0.1, 0.5, 3.0, 1e6] {
            let a = Array2::from_elem((6, 3), scale);
            let g = round_to_polytope(a.view()).unwrap();
            for &w in g.weights() {
                assert!((w - 1.0 / 18.0).abs() < 1e-15, "scale {scale}: {w}");
            }
        }
    }

    #[test]
    fn rejects_zero_and_negative() {
        assert!(round_to_polytope(Array2::zeros((3, 3)).view()).is_err());
        assert!(round_to_polytope(array![[0.5, -0.1], [0.0, 0.5]].view()).is_err());
    }
}
