use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dictionary::{normalize_columns, Dictionary};
use crate::matrix::DenseMatrix;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn gaussian_dict(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Dictionary {
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    normalize_columns(&DenseMatrix::from_col_major(n, d, data).unwrap())
        .unwrap()
        .0
}

pub(crate) fn orthonormal_dict(n: usize) -> Dictionary {
    Dictionary::new(DenseMatrix::identity(n)).unwrap()
}

/// Sparse vector with `k` entries of magnitude in `[1, 2)` and random signs.
pub(crate) fn sparse_x(d: usize, k: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<usize>) {
    let mut support = sample(rng, d, k).into_vec();
    support.sort_unstable();
    let mut x = vec![0.0; d];
    for &j in &support {
        let mag = 1.0 + rng.random::<f64>();
        x[j] = if rng.random::<bool>() { mag } else { -mag };
    }
    (x, support)
}

pub(crate) fn instance(
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
) -> (Dictionary, Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut r = rng(seed);
    let dict = gaussian_dict(n, d, &mut r);
    let (x, support) = sparse_x(d, k, &mut r);
    let y = dict.synthesize(&x).unwrap();
    (dict, y, x, support)
}

pub(crate) fn rel_close(a: f64, b: f64, rel: f64, floor: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + floor
}
