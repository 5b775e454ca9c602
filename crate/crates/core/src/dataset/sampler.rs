use rand::Rng;

use super::SplitDataset;
use crate::error::{Error, Result};

/// Rejection attempts per negative before giving up on a user.
pub const NEGATIVE_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    /// `(user, positive item, negative item)`.
    pub triples: Vec<(usize, usize, usize)>,
    /// Distinct users of the batch, ascending.
    pub users: Vec<usize>,
    /// Distinct positive and negative items of the batch, ascending.
    pub items: Vec<usize>,
}

impl TripletBatch {
    pub fn new(triples: Vec<(usize, usize, usize)>) -> Self {
        let mut users: Vec<usize> = triples.iter().map(|t| t.0).collect();
        users.sort_unstable();
        users.dedup();
        let mut items: Vec<usize> = triples.iter().flat_map(|t| [t.1, t.2]).collect();
        items.sort_unstable();
        items.dedup();
        Self { triples, users, items }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Draws training interactions uniformly and pairs each with a rejection
/// sampled negative. Users who interacted with every item have no negative
/// and are skipped.
pub struct BprSampler<'a> {
    split: &'a SplitDataset,
    pairs: Vec<(usize, usize)>,
    eligible: Vec<(usize, usize)>,
}

impl<'a> BprSampler<'a> {
    pub fn new(split: &'a SplitDataset) -> Result<Self> {
        let pairs = split.train_pairs();
        if pairs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let eligible = pairs.iter().copied().filter(|&(u, _)| split.train[u].len() < split.num_items).collect();
        Ok(Self { split, pairs, eligible })
    }

    /// Training interactions whose user admits a negative.
    pub fn num_interactions(&self) -> usize {
        self.eligible.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<TripletBatch> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        let pool = if self.eligible.is_empty() { &self.pairs } else { &self.eligible };
        let mut triples = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let (u, pos) = pool[rng.gen_range(0..pool.len())];
            let neg = self.negative(u, rng)?;
            triples.push((u, pos, neg));
        }
        Ok(TripletBatch::new(triples))
    }

    fn negative<R: Rng + ?Sized>(&self, user: usize, rng: &mut R) -> Result<usize> {
        for _ in 0..NEGATIVE_ATTEMPTS {
            let v = rng.gen_range(0..self.split.num_items);
            if !self.split.is_train(user, v) {
                return Ok(v);
            }
        }
        Err(Error::NegativeSamplingExhausted { user, attempts: NEGATIVE_ATTEMPTS })
    }
}

pub fn sample_bpr_batch<R: Rng + ?Sized>(split: &SplitDataset, batch_size: usize, rng: &mut R) -> Result<TripletBatch> {
    BprSampler::new(split)?.sample(batch_size, rng)
}
