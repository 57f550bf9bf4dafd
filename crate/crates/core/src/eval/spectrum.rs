use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Real-valued matrix the spectrum score is computed on: the raw 0/1
/// states for binary data, one-hot columns for Potts data.
pub fn score_matrix(samples: ArrayView2<u8>, n_states: usize) -> Array2<f64> {
    if n_states == 2 {
        samples.mapv(f64::from)
    } else {
        crate::data::one_hot(samples, n_states)
    }
}

/// Singular values in descending order.
///
/// Computed as square roots of the eigenvalues of the smaller Gram matrix,
/// which keeps wide one-hot matrices cheap.
pub fn singular_values(matrix: ArrayView2<f64>) -> Vec<f64> {
    let (m, n) = matrix.dim();
    if m == 0 || n == 0 {
        return Vec::new();
    }
    let gram = if m <= n { matrix.dot(&matrix.t()) } else { matrix.t().dot(&matrix) };
    let k = gram.nrows();
    let g = DMatrix::from_fn(k, k, |i, j| gram[[i, j]]);
    let mut values: Vec<f64> = g.symmetric_eigenvalues().iter().map(|&l| l.max(0.0).sqrt()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values
}

/// `1/N_s sum_i (s_i^real - s_i^gen)^2` over the sorted singular values,
/// `N_s = min(rows, columns)`.
///
/// Row counts may differ; both matrices are truncated to the smaller count
/// (leading rows kept).
pub fn spectrum_error(real: ArrayView2<f64>, generated: ArrayView2<f64>) -> Result<f64> {
    if real.ncols() != generated.ncols() {
        return Err(Error::Usage(format!(
            "spectrum error needs equal column counts, got {} and {}",
            real.ncols(),
            generated.ncols()
        )));
    }
    let rows = real.nrows().min(generated.nrows());
    if rows == 0 {
        return Err(Error::Usage("spectrum error needs nonempty matrices".into()));
    }
    let sr = singular_values(real.slice_axis(Axis(0), (0..rows).into()));
    let sg = singular_values(generated.slice_axis(Axis(0), (0..rows).into()));
    Ok(spectrum_error_from_values(&sr, &sg))
}

/// Spectrum error from precomputed descending singular values.
pub fn spectrum_error_from_values(real: &[f64], generated: &[f64]) -> f64 {
    let n_s = real.len().min(generated.len());
    if n_s == 0 {
        return 0.0;
    }
    real.iter()
        .zip(generated)
        .take(n_s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n_s as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn identical_and_permuted_give_zero() {
        let x = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(spectrum_error(x.view(), x.view()).unwrap(), 0.0);
        let p = x.select(Axis(0), &[2, 0, 3, 1]);
        assert_abs_diff_eq!(spectrum_error(x.view(), p.view()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_matrix_singular_values() {
        let x = array![[3.0, 0.0], [0.0, -4.0], [0.0, 0.0]];
        let s = singular_values(x.view());
        assert_abs_diff_eq!(s[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn column_mismatch_is_usage_error() {
        let a = Array2::<f64>::zeros((2, 3));
        let b = Array2::<f64>::zeros((2, 4));
        assert!(matches!(spectrum_error(a.view(), b.view()), Err(Error::Usage(_))));
    }

    #[test]
    fn binary_is_raw_and_potts_is_one_hot() {
        let v = array![[1u8, 0]];
        assert_eq!(score_matrix(v.view(), 2), array![[1.0, 0.0]]);
        assert_eq!(score_matrix(v.view(), 3), array![[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]]);
    }
}
