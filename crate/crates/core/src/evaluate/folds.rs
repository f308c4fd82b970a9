// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fold index per row. Each class is shuffled with its own seeded stream and
/// dealt round-robin; negatives continue where positives stopped, so fold
/// sizes also differ by at most one.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>> {
    let keys: Vec<usize> = (0..labels.len()).collect();
    stratified_folds_by_key(labels, &keys, k, seed)
}

/// As [`stratified_folds`], but class members are ordered by `keys` before
/// shuffling, which makes the assignment independent of row order.
pub fn stratified_folds_by_key<K: Ord>(
    labels: &[bool],
    keys: &[K],
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("need k >= 2 folds, got {k}")));
    }
    if keys.len() != labels.len() {
        return Err(Error::InvalidInput("one key per label required".into()));
    }
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for (stream, class) in [true, false].into_iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::InvalidInput(format!(
                "class {} has {} members, fewer than k = {k}",
                u8::from(class),
                members.len()
            )));
        }
        members.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream as u64);
        members.shuffle(&mut rng);
        for (r, &i) in members.iter().enumerate() {
            folds[i] = (offset + r) % k;
        }
        offset += members.len();
    }
    Ok(folds)
}
