use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{DataError, Dataset};
use crate::rng::{mix_seed, rng_from_seed};

/// Draws `n` samples from `C` isotropic unit-variance Gaussian clusters in `m`
/// dimensions.
///
/// Every class center lies at distance `separation` from the origin: along the
/// coordinate axes when `C <= m`, along seeded random unit directions
/// otherwise. Labels are dealt round-robin (so class counts differ by at most
/// one) and then shuffled.
pub fn gen_synthetic_classification(
    n: usize,
    m: usize,
    n_classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n == 0 || m == 0 || n_classes == 0 {
        return Err(DataError::InvalidArgument(
            "sample, feature and class counts must be positive".into(),
        ));
    }
    if n < n_classes {
        return Err(DataError::InvalidArgument(format!(
            "need at least one sample per class: n = {n} < C = {n_classes}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(DataError::InvalidArgument(format!(
            "separation must be finite and non-negative, got {separation}"
        )));
    }

    let mut rng = rng_from_seed(mix_seed(&[seed, 0xDA7A]));
    let centers: Vec<Vec<f64>> = (0..n_classes)
        .map(|c| {
            if n_classes <= m {
                let mut v = vec![0.0; m];
                v[c] = separation;
                v
            } else {
                let mut v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.iter_mut().for_each(|x| *x *= separation / norm);
                v
            }
        })
        .collect();

    let mut labels: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    labels.shuffle(&mut rng);

    let mut features = Vec::with_capacity(n * m);
    for &y in &labels {
        for &mu in &centers[y] {
            let z: f64 = rng.sample(StandardNormal);
            features.push(mu + z);
        }
    }
    Dataset::new(features, labels, m, n_classes)
}

/// Stratified split: from each class, `round(test_fraction * count)` samples
/// go to the test set. Returns `(train, test)`.
pub fn split_train_test(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes()];
    for i in 0..ds.len() {
        by_class[ds.label(i)].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut idx in by_class {
        idx.shuffle(&mut rng);
        let k = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(DataError::InvalidArgument(
            "split leaves an empty train or test set".into(),
        ));
    }
    Ok((ds.subset(&train), ds.subset(&test)))
}
