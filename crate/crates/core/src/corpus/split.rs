use rand::seq::SliceRandom;

use super::Corpus;
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Splits at dialog granularity into (train, test).
///
/// The train partition gets `round(train_fraction * n)` dialogs, clamped so
/// both partitions are non-empty whenever `n >= 2`. Dialogs keep their
/// original relative order inside each partition.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = corpus.dialogs.len();
    let mut n_train = (train_fraction * n as f64).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    } else {
        n_train = n;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut Stream::new(seed).child("split").rng());
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }

    let (train, test): (Vec<_>, Vec<_>) = corpus
        .dialogs
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok((
        Corpus {
            dialogs: train.into_iter().map(|(d, _)| d).collect(),
        },
        Corpus {
            dialogs: test.into_iter().map(|(d, _)| d).collect(),
        },
    ))
}
