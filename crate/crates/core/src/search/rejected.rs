//! Tracking of configurations known to match fewer rows than the limit.

use std::collections::{HashMap, HashSet};

use itertools::Itertools;

use super::Configuration;

/// Configurations known to match fewer rows than the limit the set was
/// built for. Keyed by attribute-index set, with the value tuples hashed
/// per subset, so sub-configuration membership is one lookup per candidate
/// sub-pattern. A whole subset can be marked rejected when every value
/// tuple occurring in the data fell below the limit.
///
/// A set is only meaningful for the limit it was built with; rebuild it
/// when the limit changes.
#[derive(Debug, Clone)]
pub struct RejectedSet {
    limit: usize,
    subsets: HashMap<Vec<usize>, SubsetRejection>,
}

#[derive(Debug, Clone)]
enum SubsetRejection {
    /// Every value tuple of this attribute subset matches fewer rows than
    /// the limit.
    AllValues,
    Values(HashSet<Vec<u64>>),
}

impl RejectedSet {
    pub fn new(limit: usize) -> Self {
        RejectedSet {
            limit,
            subsets: HashMap::new(),
        }
    }

    /// The required-visits limit this set was built for.
    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }

    /// Records one rejected configuration.
    pub fn insert(&mut self, config: &Configuration) {
        match self
            .subsets
            .entry(config.attribute_indices().to_vec())
            .or_insert_with(|| SubsetRejection::Values(HashSet::new()))
        {
            SubsetRejection::AllValues => {}
            SubsetRejection::Values(values) => {
                values.insert(config.values().to_vec());
            }
        }
    }

    /// Marks every value tuple of an attribute subset as rejected.
    pub fn mark_all_values(&mut self, attrs: &[usize]) {
        self.subsets
            .insert(attrs.to_vec(), SubsetRejection::AllValues);
    }

    /// Whether this exact `(attribute set, value tuple)` pair is recorded.
    pub fn contains(&self, attrs: &[usize], values: &[u64]) -> bool {
        match self.subsets.get(attrs) {
            None => false,
            Some(SubsetRejection::AllValues) => true,
            Some(SubsetRejection::Values(set)) => set.contains(values),
        }
    }

    /// True when `config` should be skipped because some recorded
    /// configuration is a sub-configuration of it (all its
    /// `(attribute, value)` pairs contained in `config`'s, the
    /// configuration itself included). Sub-configurations are checked by
    /// ascending size.
    pub fn prune_check(&self, config: &Configuration) -> bool {
        if self.subsets.is_empty() {
            return false;
        }
        let pairs: Vec<(usize, u64)> = config.pairs().collect();
        let mut attrs = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for size in 1..=pairs.len() {
            for combo in (0..pairs.len()).combinations(size) {
                attrs.clear();
                values.clear();
                for i in combo {
                    attrs.push(pairs[i].0);
                    values.push(pairs[i].1);
                }
                if self.contains(&attrs, &values) {
                    return true;
                }
            }
        }
        false
    }
}
