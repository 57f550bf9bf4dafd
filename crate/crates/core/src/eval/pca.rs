//! Top-two principal components of a reference set.
//!
//! Uses block subspace iteration on the centered data without forming the
//! covariance matrix, so wide one-hot inputs stay cheap.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    /// Reference column means used for centering.
    pub mean: Array1<f64>,
    /// Unit directions, shape `(2, n_columns)`.
    pub components: Array2<f64>,
    /// Sample variances (denominator `m - 1`) along each direction.
    pub variances: [f64; 2],
    pub reference: Array2<f64>,
    pub query: Array2<f64>,
}

const BLOCK: usize = 8;
const MAX_ITERATIONS: usize = 2000;
const TOLERANCE: f64 = 1e-12;

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn to_ndarray(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Projects `reference` and `query` onto the reference's top-2 directions.
///
/// Each direction's largest-magnitude loading is made positive.
pub fn pca_project(reference: ArrayView2<f64>, query: ArrayView2<f64>) -> Result<PcaProjection> {
    let (m, n) = reference.dim();
    if m < 2 {
        return Err(Error::Usage("PCA needs at least two reference rows".into()));
    }
    if query.ncols() != n {
        return Err(Error::Usage(format!("query has {} columns, reference {n}", query.ncols())));
    }
    let mean = reference.mean_axis(Axis(0)).expect("nonempty");
    let centered = &reference - &mean;
    let total_variance: f64 = centered.iter().map(|x| x * x).sum::<f64>() / (m - 1) as f64;
    if total_variance <= 0.0 {
        return Err(Error::Usage("reference set has zero variance".into()));
    }

    let p = BLOCK.min(n).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut rng));
    let mut basis = to_nalgebra(&start).qr().q();
    let mut previous = [f64::NAN; 2];
    let mut ritz = (DMatrix::zeros(p, p), vec![0.0; p]);
    for _ in 0..MAX_ITERATIONS {
        let q = to_ndarray(&basis);
        let xq = centered.dot(&q);
        // Rayleigh-Ritz on the current subspace.
        let t = to_nalgebra(&xq.t().dot(&xq)) / (m - 1) as f64;
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        ritz = (eig.eigenvectors.select_columns(&order), values);
        let top = [ritz.1[0], ritz.1.get(1).copied().unwrap_or(0.0)];
        let converged = top
            .iter()
            .zip(previous)
            .all(|(a, b)| (a - b).abs() <= TOLERANCE * total_variance);
        previous = top;
        if converged {
            break;
        }
        let next = centered.t().dot(&xq);
        basis = to_nalgebra(&next).qr().q();
    }
    let directions = to_ndarray(&(&basis * &ritz.0));
    let mut components = Array2::zeros((2, n));
    for k in 0..2.min(p) {
        let mut col = directions.column(k).to_owned();
        let norm = col.dot(&col).sqrt();
        col /= norm;
        let pivot = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        components.row_mut(k).assign(&col);
    }
    let project = |x: ArrayView2<f64>| (&x - &mean).dot(&components.t());
    let reference_coords = project(reference);
    let variances = [0, 1].map(|k| {
        let c = reference_coords.column(k);
        c.dot(&c) / (m - 1) as f64
    });
    Ok(PcaProjection {
        query: project(query),
        reference: reference_coords,
        mean,
        components,
        variances,
    })
}
