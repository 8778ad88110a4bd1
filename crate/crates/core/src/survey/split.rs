use rand::seq::SliceRandom;

use super::{SurveyError, SurveyTable};
use crate::seed::rng_from;

/// Seeded shuffle partition of `0..n`. The train part holds `round(n * fraction)`
/// rows; both parts come back in ascending row order.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SurveyError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SurveyError::InvalidFraction(train_fraction));
    }
    if n == 0 {
        return Err(SurveyError::Empty);
    }
    let n_train = (n as f64 * train_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    table: &SurveyTable,
    train_fraction: f64,
    seed: u64,
) -> Result<(SurveyTable, SurveyTable), SurveyError> {
    let (train, test) = split_indices(table.len(), train_fraction, seed)?;
    Ok((table.select(&train), table.select(&test)))
}
