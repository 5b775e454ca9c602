//! Interaction ingestion, splitting, adjacency normalization and BPR sampling.

mod graph;
mod sampler;
mod split;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

pub use graph::{build_normalized_adjacency, BiAdjacency, NormalizedBipartiteGraph};
pub use sampler::{sample_bpr_batch, BprSampler, TripletBatch, NEGATIVE_ATTEMPTS};
pub use split::{split_dataset, Part, SplitDataset};

use crate::error::{Error, Result};

/// Deduplicated user-item pairs over contiguous indices.
///
/// Raw IDs are opaque strings; `user_ids[i]` is the raw ID of user index `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    pub pairs: Vec<(usize, usize)>,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

#[derive(Default)]
struct IdMap {
    index: HashMap<String, usize>,
    raw: Vec<String>,
}

impl IdMap {
    fn intern(&mut self, raw: &str) -> usize {
        if let Some(&i) = self.index.get(raw) {
            return i;
        }
        let i = self.raw.len();
        self.index.insert(raw.to_owned(), i);
        self.raw.push(raw.to_owned());
        i
    }
}

impl InteractionDataset {
    /// Re-indexes raw pairs by first appearance and collapses duplicates.
    pub fn from_raw_pairs<'a>(raw: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut users = IdMap::default();
        let mut items = IdMap::default();
        let mut seen = std::collections::HashSet::new();
        let mut pairs = Vec::new();
        for (u, v) in raw {
            let pair = (users.intern(u), items.intern(v));
            if seen.insert(pair) {
                pairs.push(pair);
            }
        }
        if pairs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            num_users: users.raw.len(),
            num_items: items.raw.len(),
            pairs,
            user_ids: users.raw,
            item_ids: items.raw,
        })
    }

    /// Builds a dataset from already-indexed pairs; raw IDs become the decimal
    /// index. Every index must be covered by at least one pair.
    pub fn from_index_pairs(num_users: usize, num_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut user_seen = vec![false; num_users];
        let mut item_seen = vec![false; num_items];
        let mut seen = std::collections::HashSet::new();
        let mut dedup = Vec::with_capacity(pairs.len());
        for &(u, v) in pairs {
            if u >= num_users {
                return Err(Error::IndexOutOfRange { what: "users", index: u, len: num_users });
            }
            if v >= num_items {
                return Err(Error::IndexOutOfRange { what: "items", index: v, len: num_items });
            }
            user_seen[u] = true;
            item_seen[v] = true;
            if seen.insert((u, v)) {
                dedup.push((u, v));
            }
        }
        if dedup.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(u) = user_seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("user index {u} has no interactions")));
        }
        if let Some(v) = item_seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("item index {v} has no interactions")));
        }
        Ok(Self {
            num_users,
            num_items,
            pairs: dedup,
            user_ids: (0..num_users).map(|i| i.to_string()).collect(),
            item_ids: (0..num_items).map(|i| i.to_string()).collect(),
        })
    }

    pub fn parse(text: &str, header: bool) -> Result<Self> {
        let mut raw = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if header && n == 0 {
                continue;
            }
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let user = cols.next().unwrap_or_default();
            let item = cols.next().ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected at least two tab-separated columns".into(),
            })?;
            if user.is_empty() || item.is_empty() {
                return Err(Error::Parse { line: n + 1, message: "empty user or item id".into() });
            }
            raw.push((user, item));
        }
        Self::from_raw_pairs(raw)
    }

    pub fn density(&self) -> f64 {
        self.pairs.len() as f64 / (self.num_users as f64 * self.num_items as f64)
    }

    /// Writes `raw_id<TAB>index` maps for users and items.
    pub fn write_id_maps(&self, user_path: &Path, item_path: &Path) -> Result<()> {
        write_id_map(user_path, &self.user_ids)?;
        write_id_map(item_path, &self.item_ids)
    }
}

fn write_id_map(path: &Path, ids: &[String]) -> Result<()> {
    let mut out = Vec::new();
    for (i, raw) in ids.iter().enumerate() {
        writeln!(out, "{raw}\t{i}").expect("write to vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a tab-separated interaction file; `header` skips the first line.
pub fn load_interactions(path: &Path, header: bool) -> Result<InteractionDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    InteractionDataset::parse(&text, header)
}
