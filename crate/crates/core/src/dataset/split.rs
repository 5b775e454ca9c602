use rand::seq::SliceRandom;

use super::InteractionDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Train,
    Validation,
    Test,
}

/// Per-user train/validation/test item lists. Each list is sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub train: Vec<Vec<usize>>,
    pub validation: Vec<Vec<usize>>,
    pub test: Vec<Vec<usize>>,
    pub seed: u64,
}

impl SplitDataset {
    pub fn part(&self, part: Part) -> &[Vec<usize>] {
        match part {
            Part::Train => &self.train,
            Part::Validation => &self.validation,
            Part::Test => &self.test,
        }
    }

    pub fn train_pairs(&self) -> Vec<(usize, usize)> {
        pairs_of(&self.train)
    }

    pub fn count(&self, part: Part) -> usize {
        self.part(part).iter().map(Vec::len).sum()
    }

    pub fn is_train(&self, user: usize, item: usize) -> bool {
        self.train[user].binary_search(&item).is_ok()
    }
}

fn pairs_of(lists: &[Vec<usize>]) -> Vec<(usize, usize)> {
    lists
        .iter()
        .enumerate()
        .flat_map(|(u, items)| items.iter().map(move |&v| (u, v)))
        .collect()
}

/// Users with fewer interactions than this keep everything in train.
const MIN_SPLIT_INTERACTIONS: usize = 3;

/// Shuffles each user's items with the split stream of `seed`, then cuts
/// them proportionally. Users with fewer than three interactions go entirely
/// to train, and every user keeps at least one training item.
pub fn split_dataset(ds: &InteractionDataset, train_frac: f64, valid_frac: f64, seed: u64) -> Result<SplitDataset> {
    if !(train_frac > 0.0) || valid_frac < 0.0 || train_frac + valid_frac > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "split fractions train={train_frac}, valid={valid_frac} must be positive and sum to at most 1"
        )));
    }
    let mut per_user = vec![Vec::new(); ds.num_users];
    for &(u, v) in &ds.pairs {
        per_user[u].push(v);
    }
    let mut rng = stream(seed, Purpose::Split);
    let mut train = Vec::with_capacity(ds.num_users);
    let mut validation = Vec::with_capacity(ds.num_users);
    let mut test = Vec::with_capacity(ds.num_users);
    for mut items in per_user {
        items.sort_unstable();
        items.shuffle(&mut rng);
        let n = items.len();
        let (n_train, n_valid) = if n < MIN_SPLIT_INTERACTIONS {
            (n, 0)
        } else {
            let n_train = ((n as f64 * train_frac).round() as usize).clamp(1, n);
            let n_valid = ((n as f64 * valid_frac).round() as usize).min(n - n_train);
            (n_train, n_valid)
        };
        let mut tr = items[..n_train].to_vec();
        let mut va = items[n_train..n_train + n_valid].to_vec();
        let mut te = items[n_train + n_valid..].to_vec();
        tr.sort_unstable();
        va.sort_unstable();
        te.sort_unstable();
        train.push(tr);
        validation.push(va);
        test.push(te);
    }
    Ok(SplitDataset {
        num_users: ds.num_users,
        num_items: ds.num_items,
        train,
        validation,
        test,
        seed,
    })
}
