use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Label, Result};

const MAX_RESAMPLE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitKind {
    KFold { fold: usize, k: usize },
    Bootstrap { repeat: usize },
}

/// Train/test index sets over a label list.
///
/// For k-fold splits both sides are sorted and disjoint. For bootstrap
/// splits `train` holds `n` draws with replacement and `test` the
/// out-of-bag positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub kind: SplitKind,
}

impl Split {
    pub fn id(&self) -> String {
        match self.kind {
            SplitKind::KFold { fold, k } => format!("fold {}/{k}", fold + 1),
            SplitKind::Bootstrap { repeat } => format!("bootstrap {}", repeat + 1),
        }
    }
}

fn class_members(labels: &[Label]) -> BTreeMap<Label, Vec<usize>> {
    let mut members: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        members.entry(l).or_default().push(i);
    }
    members
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled and dealt round-robin into the folds, continuing
/// the deal position across classes so that total fold sizes also stay within
/// one of each other.
pub fn stratified_kfold(labels: &[Label], k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 {
        return Err(CorpusError::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0usize;
    for (label, mut members) in class_members(labels) {
        if members.len() < k {
            return Err(CorpusError::StratificationImpossible { label, count: members.len(), k });
        }
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + pos) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok((0..k)
        .map(|fold| {
            let (test_idx, train_idx) = (0..labels.len()).partition(|&i| fold_of[i] == fold);
            Split { train_idx, test_idx, kind: SplitKind::KFold { fold, k } }
        })
        .collect())
}

/// Stratified bootstrap with out-of-bag test sets.
///
/// Every class contributes exactly its own size in draws, taken with
/// replacement from within the class. A repeat whose out-of-bag set is empty
/// or misses a class is redrawn.
pub fn bootstrap_splits(labels: &[Label], repeats: usize, seed: u64) -> Result<Vec<Split>> {
    if repeats == 0 {
        return Err(CorpusError::InvalidArgument("repeats must be at least 1".into()));
    }
    if labels.len() < 2 {
        return Err(CorpusError::InvalidArgument("bootstrap needs at least 2 samples".into()));
    }
    let members = class_members(labels);
    for label in [Label::Deceptive, Label::Genuine] {
        if !members.contains_key(&label) {
            return Err(CorpusError::ClassMissing(label));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut attempt = 0;
        loop {
            if attempt == MAX_RESAMPLE_ATTEMPTS {
                return Err(CorpusError::DegenerateResample(attempt));
            }
            attempt += 1;
            let mut drawn = vec![false; labels.len()];
            let mut train_idx = Vec::with_capacity(labels.len());
            for class in members.values() {
                for _ in 0..class.len() {
                    let i = class[rng.gen_range(0..class.len())];
                    drawn[i] = true;
                    train_idx.push(i);
                }
            }
            let test_idx: Vec<usize> = (0..labels.len()).filter(|&i| !drawn[i]).collect();
            let has = |l: Label| test_idx.iter().any(|&i| labels[i] == l);
            if has(Label::Deceptive) && has(Label::Genuine) {
                train_idx.sort_unstable();
                splits.push(Split { train_idx, test_idx, kind: SplitKind::Bootstrap { repeat } });
                break;
            }
        }
    }
    Ok(splits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n_d: usize, n_g: usize) -> Vec<Label> {
        let mut v = vec![Label::Deceptive; n_d];
        v.extend(std::iter::repeat_n(Label::Genuine, n_g));
        v
    }

    fn count(idx: &[usize], labels: &[Label], l: Label) -> usize {
        idx.iter().filter(|&&i| labels[i] == l).count()
    }

    #[test]
    fn opspam_sized_kfold_is_exact() {
        let y = labels(800, 800);
        let splits = stratified_kfold(&y, 5, 3).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            assert_eq!(count(&s.test_idx, &y, Label::Deceptive), 160);
            assert_eq!(count(&s.test_idx, &y, Label::Genuine), 160);
            assert_eq!(s.train_idx.len(), 1280);
        }
    }

    #[test]
    fn six_four_two_folds() {
        // by enumeration: 6 A over 2 folds -> 3+3, 4 B -> 2+2
        let y = labels(6, 4);
        for s in stratified_kfold(&y, 2, 11).unwrap() {
            assert_eq!(count(&s.test_idx, &y, Label::Deceptive), 3);
            assert_eq!(count(&s.test_idx, &y, Label::Genuine), 2);
        }
    }

    #[test]
    fn kfold_rejects_small_classes() {
        let y = labels(1, 1);
        assert!(matches!(
            stratified_kfold(&y, 2, 0),
            Err(CorpusError::StratificationImpossible { count: 1, k: 2, .. })
        ));
        assert!(stratified_kfold(&labels(5, 5), 1, 0).is_err());
    }

    #[test]
    fn bootstrap_opspam_sized() {
        let y = labels(800, 800);
        let splits = bootstrap_splits(&y, 10, 5).unwrap();
        assert_eq!(splits.len(), 10);
        let mut frac = 0.0;
        for s in &splits {
            assert_eq!(s.train_idx.len(), 1600);
            assert_eq!(count(&s.train_idx, &y, Label::Deceptive), 800);
            frac += s.test_idx.len() as f64 / 1600.0;
        }
        frac /= 10.0;
        // out-of-bag probability (1 - 1/n)^n
        let oracle = (1.0 - 1.0 / 1600.0f64).powi(1600);
        assert!((frac - oracle).abs() < 0.05, "{frac}");
    }

    #[test]
    fn bootstrap_singleton_classes_are_degenerate() {
        // one member per class: each class must draw its only member, so the
        // out-of-bag set is always empty
        let y = labels(1, 1);
        assert!(matches!(bootstrap_splits(&y, 1, 0), Err(CorpusError::DegenerateResample(_))));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let y = labels(30, 20);
        assert_eq!(bootstrap_splits(&y, 3, 42).unwrap(), bootstrap_splits(&y, 3, 42).unwrap());
        assert_ne!(bootstrap_splits(&y, 3, 42).unwrap(), bootstrap_splits(&y, 3, 43).unwrap());
        assert!(matches!(bootstrap_splits(&labels(5, 0), 1, 0), Err(CorpusError::ClassMissing(_))));
    }

    proptest! {
        #[test]
        fn kfold_partitions(n_d in 2usize..40, n_g in 2usize..40, k in 2usize..6, seed in 0u64..500) {
            prop_assume!(n_d >= k && n_g >= k);
            let y = labels(n_d, n_g);
            let splits = stratified_kfold(&y, k, seed).unwrap();
            prop_assert_eq!(&splits, &stratified_kfold(&y, k, seed).unwrap());
            let mut seen = vec![0usize; y.len()];
            for s in &splits {
                for &i in &s.test_idx { seen[i] += 1; }
                prop_assert_eq!(s.train_idx.len() + s.test_idx.len(), y.len());
                prop_assert!(s.train_idx.iter().all(|i| !s.test_idx.contains(i)));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            for l in [Label::Deceptive, Label::Genuine] {
                let sizes: Vec<usize> = splits.iter().map(|s| count(&s.test_idx, &y, l)).collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }
        }

        #[test]
        fn bootstrap_invariants(n_d in 3usize..40, n_g in 3usize..40, seed in 0u64..500) {
            let y = labels(n_d, n_g);
            for s in bootstrap_splits(&y, 3, seed).unwrap() {
                prop_assert_eq!(s.train_idx.len(), y.len());
                prop_assert!(s.test_idx.iter().all(|i| !s.train_idx.contains(i)));
                prop_assert!(count(&s.test_idx, &y, Label::Deceptive) > 0);
                prop_assert!(count(&s.test_idx, &y, Label::Genuine) > 0);
            }
        }
    }
}
