use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{ManifestEntry, Split};
use crate::{rng, Error, Result};

const SPLIT_KEY: u64 = 0x5350_4c54;

/// Train, validation and test partitions of a manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplits {
    pub train: Vec<ManifestEntry>,
    pub val: Vec<ManifestEntry>,
    pub test: Vec<ManifestEntry>,
}

impl DatasetSplits {
    pub fn get(&self, split: Split) -> &[ManifestEntry] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    fn get_mut(&mut self, split: Split) -> &mut Vec<ManifestEntry> {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}

/// Assigns whole users to splits so no speaker appears in two of them.
///
/// Entries that already carry a split keep it. The remaining users are
/// shuffled with `seed` and cut at the rounded ratio counts.
pub fn split_dataset(entries: &[ManifestEntry], ratios: (f64, f64, f64), seed: u64) -> Result<DatasetSplits> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|r| !(0.0..=1.0).contains(r)) || (rt + rv + rs - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("split ratios {rt}/{rv}/{rs} must be non-negative and sum to 1")));
    }
    let mut out = DatasetSplits::default();
    let mut by_user: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in entries {
        match e.split {
            Some(s) => out.get_mut(s).push(e.clone()),
            None => by_user.entry(e.user_id.as_str()).or_default().push(e),
        }
    }
    let mut users: Vec<&str> = by_user.keys().copied().collect();
    users.shuffle(&mut rng::stream(&[seed, SPLIT_KEY]));
    let n = users.len();
    let n_train = ((n as f64 * rt).round() as usize).min(n);
    let n_val = ((n as f64 * rv).round() as usize).min(n - n_train);
    for (i, u) in users.iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        out.get_mut(split).extend(by_user[u].iter().map(|&e| e.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ClassLabel;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn corpus(users: usize, per_user: usize) -> Vec<ManifestEntry> {
        (0..users * per_user)
            .map(|i| ManifestEntry {
                path: format!("clip{i}.wav"),
                label: ClassLabel::ALL[i % 10],
                user_id: format!("user{}", i / per_user),
                split: None,
            })
            .collect()
    }

    fn users(v: &[ManifestEntry]) -> HashSet<String> {
        v.iter().map(|e| e.user_id.clone()).collect()
    }

    #[test]
    fn hundred_users() {
        let s = split_dataset(&corpus(100, 2), (0.8, 0.1, 0.1), 1).unwrap();
        assert_eq!((users(&s.train).len(), users(&s.val).len(), users(&s.test).len()), (80, 10, 10));
        assert_eq!(s, split_dataset(&corpus(100, 2), (0.8, 0.1, 0.1), 1).unwrap());
        assert_ne!(s, split_dataset(&corpus(100, 2), (0.8, 0.1, 0.1), 2).unwrap());
    }

    #[test]
    fn everything_in_train() {
        let s = split_dataset(&corpus(7, 3), (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(s.train.len(), 21);
        assert!(s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn preset_splits_are_kept_and_ratios_checked() {
        let mut c = corpus(10, 1);
        c[0].split = Some(Split::Test);
        let s = split_dataset(&c, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(s.test, vec![c[0].clone()]);
        assert!(matches!(split_dataset(&c, (0.8, 0.1, 0.2), 1), Err(Error::Argument(_))));
    }

    proptest! {
        #[test]
        fn disjoint_by_user_and_complete(n_users in 1usize..60, per in 1usize..4, seed in any::<u64>(), a in 0.0f64..1.0) {
            let c = corpus(n_users, per);
            let (rt, rv) = (a, (1.0 - a) / 2.0);
            let s = split_dataset(&c, (rt, rv, 1.0 - rt - rv), seed).unwrap();
            prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), c.len());
            let (ut, uv, us) = (users(&s.train), users(&s.val), users(&s.test));
            prop_assert!(ut.is_disjoint(&uv) && ut.is_disjoint(&us) && uv.is_disjoint(&us));
            prop_assert!((ut.len() as f64 - n_users as f64 * rt).abs() <= 1.0);
            prop_assert!((uv.len() as f64 - n_users as f64 * rv).abs() <= 1.0);
        }
    }
}
