use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::LabeledFeatures;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn members_by_class(labels: &[usize]) -> BTreeMap<usize, Vec<usize>> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    by_class
}

/// Per-class train/test split.
///
/// Each class keeps `round(ratio · count)` members for training, clamped so
/// both sides get at least one. Classes are visited in ascending order and
/// shuffled with one generator seeded from `seed`. Both index lists come back
/// sorted.
pub fn stratified_split(labels: &[usize], ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument {
            field: "split ratio",
            reason: "must lie strictly between 0 and 1",
        });
    }
    let mut rng = seeded(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in members_by_class(labels) {
        let count = members.len();
        if count < 2 {
            return Err(Error::ClassTooSmall { class, count });
        }
        members.shuffle(&mut rng);
        let n_train = (libm::round(ratio * count as f64) as usize).clamp(1, count - 1);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

/// Row indices of exactly `k` members of every class in `0..n_classes`,
/// grouped by class and sorted within each class.
pub fn sample_k_shot_indices(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::KOutOfRange { k });
    }
    let mut by_class = members_by_class(labels);
    let mut rng = seeded(seed);
    let mut picked = Vec::with_capacity(n_classes * k);
    for class in 0..n_classes {
        let mut members = by_class.remove(&class).unwrap_or_default();
        if members.len() < k {
            return Err(Error::InsufficientShots {
                class,
                available: members.len(),
                requested: k,
            });
        }
        members.shuffle(&mut rng);
        let mut chosen = members[..k].to_vec();
        chosen.sort_unstable();
        picked.extend(chosen);
    }
    Ok(picked)
}

pub fn sample_k_shot(train: &LabeledFeatures, k: usize, seed: u64) -> Result<LabeledFeatures> {
    let idx = sample_k_shot_indices(&train.labels, train.n_classes, k, seed)?;
    train.subset(&idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn single_class_eighty_twenty() {
        let s = stratified_split(&[0; 100], 0.8, 1).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
    }

    #[test]
    fn stratifies_per_class() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let s = stratified_split(&labels, 0.8, 9).unwrap();
        for class in 0..2 {
            assert_eq!(s.train.iter().filter(|&&i| labels[i] == class).count(), 8);
            assert_eq!(s.test.iter().filter(|&&i| labels[i] == class).count(), 2);
        }
        assert_eq!(s, stratified_split(&labels, 0.8, 9).unwrap());
    }

    #[test]
    fn tiny_classes() {
        assert_eq!(
            stratified_split(&[0, 0, 1], 0.8, 0),
            Err(Error::ClassTooSmall { class: 1, count: 1 })
        );
        let s = stratified_split(&[3, 3], 0.8, 0).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (1, 1));
    }

    #[test]
    fn k_shot_counts() {
        let labels: Vec<usize> = (0..80).map(|i| i % 8).collect();
        let idx = sample_k_shot_indices(&labels, 8, 4, 5).unwrap();
        assert_eq!(idx.len(), 32);
        for class in 0..8 {
            assert_eq!(idx.iter().filter(|&&i| labels[i] == class).count(), 4);
        }
        assert_eq!(idx, sample_k_shot_indices(&labels, 8, 4, 5).unwrap());
    }

    #[test]
    fn k_equal_to_class_size_takes_everything() {
        let labels = vec![1, 0, 1, 0, 0, 1];
        assert_eq!(
            sample_k_shot_indices(&labels, 2, 3, 77).unwrap(),
            vec![1, 3, 4, 0, 2, 5]
        );
        assert_eq!(
            sample_k_shot_indices(&labels, 2, 4, 77),
            Err(Error::InsufficientShots {
                class: 0,
                available: 3,
                requested: 4
            })
        );
        assert!(matches!(
            sample_k_shot_indices(&labels, 3, 1, 0),
            Err(Error::InsufficientShots {
                class: 2,
                available: 0,
                ..
            })
        ));
    }
}
