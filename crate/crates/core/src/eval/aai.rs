use ndarray::{concatenate, ArrayView2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, tags};

/// Nearest-neighbor membership rates behind the adversarial accuracy score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialAccuracy {
    /// Fraction of generated rows whose nearest neighbor is generated.
    pub p_gg: f64,
    /// Fraction of real rows whose nearest neighbor is real.
    pub p_dd: f64,
    /// `((p_gg - 1/2)^2 + (p_dd - 1/2)^2) / 2`.
    pub error: f64,
}

/// Row encoding with a fast Hamming distance.
enum Rows {
    /// 0/1 data packed into 64-bit words.
    Packed { words: Vec<u64>, per_row: usize },
    Bytes { data: Vec<u8>, per_row: usize },
}

impl Rows {
    fn new(rows: ArrayView2<u8>) -> Self {
        let n = rows.ncols();
        if rows.iter().all(|&s| s < 2) {
            let per_row = n.div_ceil(64).max(1);
            let mut words = vec![0u64; rows.nrows() * per_row];
            for (r, row) in rows.axis_iter(Axis(0)).enumerate() {
                for (j, &s) in row.iter().enumerate() {
                    words[r * per_row + j / 64] |= u64::from(s) << (j % 64);
                }
            }
            Rows::Packed { words, per_row }
        } else {
            Rows::Bytes {
                data: rows.iter().copied().collect(),
                per_row: n,
            }
        }
    }

    #[inline]
    fn distance(&self, a: usize, b: usize) -> u32 {
        match self {
            Rows::Packed { words, per_row } => {
                let (x, y) = (&words[a * per_row..(a + 1) * per_row], &words[b * per_row..(b + 1) * per_row]);
                x.iter().zip(y).map(|(p, q)| (p ^ q).count_ones()).sum()
            }
            Rows::Bytes { data, per_row } => {
                let (x, y) = (&data[a * per_row..(a + 1) * per_row], &data[b * per_row..(b + 1) * per_row]);
                x.iter().zip(y).map(|(p, q)| u32::from(p != q)).sum()
            }
        }
    }
}

/// Hamming nearest neighbor of every row among all other rows.
///
/// Rows `0..n_first` form set A and the rest set B. Among equidistant
/// candidates a row from the other set is preferred, then the lowest index,
/// so an exact copy of a set always points across.
pub fn nearest_neighbors(rows: ArrayView2<u8>, n_first: usize) -> Vec<usize> {
    let n = rows.nrows();
    let encoded = Rows::new(rows);
    let in_a = |i: usize| i < n_first;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = usize::MAX;
            let mut best_d = u32::MAX;
            for j in (0..n).filter(|&j| j != i) {
                let d = encoded.distance(i, j);
                let better = d < best_d || (d == best_d && in_a(best) == in_a(i) && in_a(j) != in_a(i));
                if better {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Adversarial accuracy of `generated` against `real`.
///
/// The larger set is uniformly subsampled (seeded) down to the size of the
/// smaller one; each set needs at least two rows.
pub fn adversarial_accuracy(real: ArrayView2<u8>, generated: ArrayView2<u8>, seed: u64) -> Result<AdversarialAccuracy> {
    if real.ncols() != generated.ncols() {
        return Err(Error::Usage(format!(
            "adversarial accuracy needs equal widths, got {} and {}",
            real.ncols(),
            generated.ncols()
        )));
    }
    let m = real.nrows().min(generated.nrows());
    if m < 2 {
        return Err(Error::Usage("adversarial accuracy needs at least two rows per set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tags::SUBSAMPLE));
    let mut take = |x: ArrayView2<u8>| {
        if x.nrows() == m {
            x.to_owned()
        } else {
            let mut rows = index::sample(&mut rng, x.nrows(), m).into_vec();
            rows.sort_unstable();
            x.select(Axis(0), &rows)
        }
    };
    let (r, g) = (take(real), take(generated));
    let joined = concatenate(Axis(0), &[r.view(), g.view()]).expect("equal widths");
    let nn = nearest_neighbors(joined.view(), m);
    let p_dd = nn[..m].iter().filter(|&&j| j < m).count() as f64 / m as f64;
    let p_gg = nn[m..].iter().filter(|&&j| j >= m).count() as f64 / m as f64;
    let error = 0.5 * ((p_gg - 0.5).powi(2) + (p_dd - 0.5).powi(2));
    Ok(AdversarialAccuracy { p_gg, p_dd, error })
}

pub fn aai_error(real: ArrayView2<u8>, generated: ArrayView2<u8>, seed: u64) -> Result<f64> {
    Ok(adversarial_accuracy(real, generated, seed)?.error)
}
