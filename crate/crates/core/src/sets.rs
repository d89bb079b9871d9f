use serde::Serialize;

use crate::error::{Error, Result};
use crate::idset::IdSet;
use crate::model::CheckpointRef;

/// Sequences with score 1 at threshold `N` for one (model, checkpoint).
///
/// `universe_bound` is the number of candidate sequences (ids `0..bound`);
/// every member is below it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemorizedSet {
    owner: Option<CheckpointRef>,
    threshold: u8,
    ids: IdSet,
    universe_bound: u64,
}

impl MemorizedSet {
    pub fn new(ids: IdSet, universe_bound: u64, threshold: u8) -> Self {
        debug_assert!(ids.bound() == universe_bound);
        MemorizedSet {
            owner: None,
            threshold,
            ids,
            universe_bound,
        }
    }

    pub fn from_ids(ids: Vec<u64>, universe_bound: u64, threshold: u8) -> Result<Self> {
        if threshold == 0 || threshold > 64 {
            return Err(Error::param(format!(
                "threshold N = {threshold} outside 1..=64"
            )));
        }
        Ok(Self::new(
            IdSet::from_sorted(ids, universe_bound)?,
            universe_bound,
            threshold,
        ))
    }

    pub fn with_owner(mut self, owner: CheckpointRef) -> Self {
        self.owner = Some(owner);
        self
    }

    pub fn owner(&self) -> Option<&CheckpointRef> {
        self.owner.as_ref()
    }

    pub fn label(&self) -> String {
        self.owner
            .as_ref()
            .map_or_else(|| "<anonymous>".to_string(), ToString::to_string)
    }

    pub fn threshold(&self) -> u8 {
        self.threshold
    }

    pub fn ids(&self) -> &IdSet {
        &self.ids
    }

    pub fn universe_bound(&self) -> u64 {
        self.universe_bound
    }

    pub fn len(&self) -> u64 {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: u64) -> bool {
        self.ids.contains(id)
    }
}

/// Serializable summary used by reports.
#[derive(Debug, Clone, Serialize)]
pub struct SetSummary {
    pub owner: String,
    pub threshold: u8,
    pub universe_bound: u64,
    pub memorized: u64,
}

impl From<&MemorizedSet> for SetSummary {
    fn from(s: &MemorizedSet) -> Self {
        SetSummary {
            owner: s.label(),
            threshold: s.threshold,
            universe_bound: s.universe_bound,
            memorized: s.len(),
        }
    }
}
